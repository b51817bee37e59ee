#include "eog/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "eog/rewards.hpp"

namespace eog {

void EvalRecord::validate() const {
    if (n_correct_triples > std::min(n_pred_triples, n_gold_triples)) {
        throw Error("record " + id + ": n_correct_triples exceeds n_pred or n_gold");
    }
}

AnswerMetrics answer_metrics(const std::set<std::string>& predicted,
                             const std::set<std::string>& gold) {
    const OutcomeResult outcome = outcome_reward(predicted, gold);
    AnswerMetrics m;
    m.f1 = outcome.reward;
    m.hit1 = std::any_of(predicted.begin(), predicted.end(),
                         [&](const std::string& p) { return gold.count(p) > 0; });
    return m;
}

AnswerMetrics answer_metrics(const Trace& trace, const std::set<std::string>& gold) {
    return answer_metrics(trace.effective_answers(), gold);
}

namespace {

MetricSummary summarize_impl(const std::vector<EvalRecord>& records, bool strict) {
    MetricSummary s;
    s.n_samples = records.size();
    if (records.empty()) return s;
    double hit_sum = 0.0;
    double f1_sum = 0.0;
    double cov_sum = 0.0;
    double eff_sum = 0.0;
    std::size_t n_explored = 0;
    std::size_t n_eff = 0;
    for (const auto& r : records) {
        r.validate();
        hit_sum += r.hit1 ? 1.0 : 0.0;
        f1_sum += r.f1;
        if (r.n_gold_triples == 0) {
            if (strict) throw Error("record " + r.id + " has n_gold_triples == 0");
            continue;
        }
        ++n_explored;
        cov_sum +=
            static_cast<double>(r.n_correct_triples) / static_cast<double>(r.n_gold_triples);
        if (r.n_correct_triples > 0) {
            eff_sum += static_cast<double>(r.n_pred_triples) /
                       static_cast<double>(r.n_correct_triples);
            ++n_eff;
        } else {
            ++s.n_skipped_efficiency;
        }
    }
    s.hit1_mean = hit_sum / static_cast<double>(records.size());
    s.f1_mean = f1_sum / static_cast<double>(records.size());
    if (n_explored > 0) cov_sum /= static_cast<double>(n_explored);
    s.coverage = cov_sum;
    if (n_eff > 0) s.efficiency = eff_sum / static_cast<double>(n_eff);
    return s;
}

}  // namespace

MetricSummary exploration_metrics(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw Error("no records");
    return summarize_impl(records, true);
}

MetricSummary summarize(const std::vector<EvalRecord>& records) {
    return summarize_impl(records, false);
}

GroupedReport grouped_report(const std::vector<EvalRecord>& records,
                             const std::string& group_key) {
    GroupedReport report;
    report.overall = summarize(records);
    std::map<std::string, std::vector<EvalRecord>> buckets;
    for (const auto& r : records) {
        const auto it = r.group_labels.find(group_key);
        buckets[it == r.group_labels.end() ? "unlabeled" : it->second].push_back(r);
    }
    for (const auto& [label, group] : buckets) report.groups[label] = summarize(group);
    return report;
}

TTestResult one_sample_ttest(double model_mean, double model_sd, std::size_t n_runs,
                             double baseline) {
    if (n_runs < 2) throw Error("t-test needs at least two runs");
    if (model_sd <= 0.0) throw Error("t-test undefined for zero standard deviation");
    TTestResult r;
    r.df = n_runs - 1;
    r.t = (model_mean - baseline) / (model_sd / std::sqrt(static_cast<double>(n_runs)));
    return r;
}

TTestResult one_sample_ttest(const std::vector<double>& samples, double baseline) {
    if (samples.size() < 2) throw Error("t-test needs at least two runs");
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return one_sample_ttest(mean, sd, samples.size(), baseline);
}

}  // namespace eog
