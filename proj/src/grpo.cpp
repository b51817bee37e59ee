#include "eog/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eog/norm.hpp"

namespace eog {

using nlohmann::json;

void GroupSample::validate() const {
    if (logp_new.empty()) throw Error("sample has no tokens");
    if (logp_new.size() != logp_old.size() || logp_new.size() != logp_ref.size()) {
        throw Error("log-prob vectors differ in length");
    }
    for (const auto* v : {&logp_new, &logp_old, &logp_ref}) {
        for (double x : *v) {
            if (x > 0.0) throw Error("log-probabilities must be <= 0");
        }
    }
}

void GrpoConfig::validate() const {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
        throw Error("clip_epsilon must lie in (0, 1)");
    }
    if (kl_beta < 0.0) throw Error("kl_beta must be >= 0");
    if (std_floor <= 0.0) throw Error("std_floor must be > 0");
}

std::vector<double> group_advantages(const std::vector<double>& rewards, double std_floor) {
    if (rewards.size() < 2) throw Error("group too small");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::max(std::sqrt(var / n), std_floor);
    std::vector<double> adv;
    adv.reserve(rewards.size());
    for (double r : rewards) adv.push_back((r - mean) / sd);
    return adv;
}

double token_kl(double logp_new, double logp_ref) {
    const double d = logp_ref - logp_new;
    return std::exp(d) - d - 1.0;
}

namespace {

GrpoReport objective_impl(const std::vector<GroupSample>& group, const GrpoConfig& config,
                          std::vector<std::vector<double>>* grad) {
    config.validate();
    for (const auto& s : group) s.validate();

    std::vector<double> rewards;
    rewards.reserve(group.size());
    for (const auto& s : group) rewards.push_back(s.reward);

    GrpoReport report;
    report.advantages = group_advantages(rewards, config.std_floor);

    if (grad) {
        grad->assign(group.size(), {});
        for (std::size_t i = 0; i < group.size(); ++i) {
            (*grad)[i].assign(group[i].logp_new.size(), 0.0);
        }
    }

    const double n_samples = static_cast<double>(group.size());
    double ratio_sum = 0.0;
    double kl_sum = 0.0;
    std::size_t total_tokens = 0;
    std::size_t clipped_tokens = 0;

    for (std::size_t i = 0; i < group.size(); ++i) {
        const auto& s = group[i];
        const double a = report.advantages[i];
        const double n_tokens = static_cast<double>(s.logp_new.size());
        double surr = 0.0;
        double kl = 0.0;
        for (std::size_t t = 0; t < s.logp_new.size(); ++t) {
            const double ratio = std::exp(s.logp_new[t] - s.logp_old[t]);
            const double clipped =
                std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
            const double unclipped_term = ratio * a;
            const double clipped_term = clipped * a;
            surr += std::min(unclipped_term, clipped_term);
            const double tk = token_kl(s.logp_new[t], s.logp_ref[t]);
            kl += tk;
            ratio_sum += ratio;
            ++total_tokens;
            if (clipped_term < unclipped_term) ++clipped_tokens;

            if (grad) {
                // The min picks the unclipped branch when it is not larger;
                // only that branch moves with logp_new. The k3 term
                // contributes exp(logp_ref - logp_new) - 1 per token.
                double g = 0.0;
                if (unclipped_term <= clipped_term) g += unclipped_term;
                g += config.kl_beta * (std::exp(s.logp_ref[t] - s.logp_new[t]) - 1.0);
                (*grad)[i][t] = g / (n_tokens * n_samples);
            }
        }
        report.objective += (surr / n_tokens - config.kl_beta * (kl / n_tokens)) / n_samples;
        kl_sum += kl;
    }

    report.mean_ratio = ratio_sum / static_cast<double>(total_tokens);
    report.mean_kl = kl_sum / static_cast<double>(total_tokens);
    report.clip_fraction =
        static_cast<double>(clipped_tokens) / static_cast<double>(total_tokens);
    return report;
}

}  // namespace

GrpoReport grpo_objective(const std::vector<GroupSample>& group, const GrpoConfig& config) {
    if (group.size() < 2) throw Error("group too small");
    return objective_impl(group, config, nullptr);
}

GrpoReport grpo_objective_with_grad(const std::vector<GroupSample>& group,
                                    const GrpoConfig& config,
                                    std::vector<std::vector<double>>& grad_logp_new) {
    if (group.size() < 2) throw Error("group too small");
    return objective_impl(group, config, &grad_logp_new);
}

namespace {

std::vector<double> read_numbers(const json& arr, const std::string& where,
                                 const std::string& what) {
    if (!arr.is_array()) throw Error(where + ": " + what + " must be an array");
    std::vector<double> out;
    for (const auto& v : arr) {
        if (!v.is_number()) throw Error(where + ": non-numeric entry in " + what);
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

std::vector<std::vector<GroupSample>> load_group_dump(std::istream& in,
                                                      const std::string& source_name) {
    std::vector<std::vector<GroupSample>> groups;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error(where + ": invalid JSON object");
        if (!j.contains("reward")) throw Error(where + ": missing \"reward\"");
        const auto rewards = read_numbers(j["reward"], where, "\"reward\"");
        std::vector<GroupSample> group(rewards.size());
        for (std::size_t i = 0; i < rewards.size(); ++i) group[i].reward = rewards[i];
        for (const char* key : {"logp_new", "logp_old", "logp_ref"}) {
            if (!j.contains(key) || !j[key].is_array() || j[key].size() != rewards.size()) {
                throw Error(where + ": \"" + std::string(key) +
                            "\" must hold one array per sample");
            }
            for (std::size_t i = 0; i < rewards.size(); ++i) {
                auto vals = read_numbers(j[key][i], where, "\"" + std::string(key) + "\"");
                if (key == std::string_view("logp_new")) group[i].logp_new = std::move(vals);
                else if (key == std::string_view("logp_old")) group[i].logp_old = std::move(vals);
                else group[i].logp_ref = std::move(vals);
            }
        }
        for (const auto& s : group) s.validate();
        groups.push_back(std::move(group));
    }
    return groups;
}

std::vector<std::vector<GroupSample>> load_group_dump_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open group dump: " + path);
    return load_group_dump(in, path);
}

}  // namespace eog
