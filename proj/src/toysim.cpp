#include "eog/toysim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eog/norm.hpp"

namespace eog {

using nlohmann::json;

namespace {

// splitmix64; used for seed derivation so parallel rollout order can
// never change the streams.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c, std::uint64_t d) {
    std::uint64_t s = mix64(base);
    s = mix64(s ^ a);
    s = mix64(s ^ b);
    s = mix64(s ^ c);
    s = mix64(s ^ d);
    return s;
}

struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        state = mix64(state);
        return state;
    }
    // Uniform in [0, 1).
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    std::size_t bounded(std::size_t n) { return static_cast<std::size_t>(next() % n); }
};

std::string entity_name(std::size_t task, std::size_t local) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "t%02zue%03zu", task, local);
    return buf;
}

std::string relation_name(std::size_t index) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "r%02zu", index);
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void SyntheticTaskFamily::validate() const {
    if (n_tasks < 1) throw Error("n_tasks must be >= 1");
    if (gold_hops < 1 || gold_hops > 4) throw Error("gold_hops must be in [1, 4]");
    if (edge_density < 0.0 || edge_density > 1.0) {
        throw Error("edge_density must be in [0, 1]");
    }
    if (n_tasks > 100 || n_relations > 100) {
        throw Error("family too large for the fixed-width naming scheme");
    }
    const std::size_t cluster = n_entities / n_tasks;
    if (cluster > 1000) throw Error("family too large for the fixed-width naming scheme");
    if (cluster < 2 * gold_hops) {
        throw Error("infeasible: each task cluster needs at least 2 * gold_hops entities");
    }
    const bool wants_distractors = distractor_branching > 0 && edge_density > 0.0;
    if (n_relations < 2 * gold_hops + (wants_distractors ? 1 : 0)) {
        throw Error("infeasible: n_relations cannot cover the route layout");
    }
}

FamilyInstance generate_family(const SyntheticTaskFamily& cfg) {
    cfg.validate();
    const std::size_t cluster = cfg.n_entities / cfg.n_tasks;
    const std::size_t g = cfg.gold_hops;
    Rng rng(derive_seed(cfg.seed, 0x6661 /* "fa" */, 0, 0, 0));

    std::vector<Triple> triples;
    std::vector<TaskInstance> tasks;

    for (std::size_t t = 0; t < cfg.n_tasks; ++t) {
        const auto ent = [&](std::size_t j) { return entity_name(t, j); };
        const std::size_t answer = g;

        // Scramble which relation plays which role per task, so relation
        // names carry no positional hint about the planted route.
        std::vector<std::size_t> rel_of(cfg.n_relations);
        for (std::size_t i = 0; i < cfg.n_relations; ++i) rel_of[i] = i;
        for (std::size_t i = cfg.n_relations - 1; i > 0; --i) {
            std::swap(rel_of[i], rel_of[rng.bounded(i + 1)]);
        }

        // Local adjacency for the shortest-route guard.
        std::vector<std::vector<std::size_t>> adj(cluster);
        std::set<std::tuple<std::size_t, std::size_t, std::size_t>> cluster_edges;
        const auto add_edge = [&](std::size_t u, std::size_t v, std::size_t rel) {
            adj[u].push_back(v);
            cluster_edges.insert({u, v, rel});
            triples.push_back(Triple{ent(u), relation_name(rel_of[rel]), ent(v)});
        };
        const auto shortest_to_answer = [&]() {
            std::vector<std::size_t> dist(cluster, SIZE_MAX);
            std::deque<std::size_t> queue{0};
            dist[0] = 0;
            while (!queue.empty()) {
                const std::size_t u = queue.front();
                queue.pop_front();
                for (std::size_t v : adj[u]) {
                    if (dist[v] != SIZE_MAX) continue;
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
            return dist[answer];
        };

        // Planted gold route 0 -> 1 -> ... -> answer, one relation per hop.
        std::vector<Triple> gold_chain;
        for (std::size_t i = 0; i < g; ++i) {
            add_edge(i, i + 1, i);
            gold_chain.push_back(Triple{ent(i), relation_name(rel_of[i]), ent(i + 1)});
        }
        // Equal-length detour over its own relation block; not a gold path.
        std::size_t prev = 0;
        for (std::size_t i = 0; i < g; ++i) {
            const std::size_t next = (i + 1 == g) ? answer : g + 1 + i;
            add_edge(prev, next, g + i);
            prev = next;
        }

        // Distractors: bounded fan-out per entity, never into the answer,
        // and never shortening the topic-to-answer distance below g.
        const std::size_t n_distractor_rels = cfg.n_relations - 2 * g;
        std::size_t rel_cycle = 0;
        for (std::size_t u = 0; u < cluster; ++u) {
            for (std::size_t b = 0; b < cfg.distractor_branching; ++b) {
                std::size_t v = rng.bounded(cluster);
                const bool accept = rng.u01() < cfg.edge_density;
                if (v == u || v == answer || !accept) continue;
                const std::size_t rel = 2 * g + rel_cycle % n_distractor_rels;
                if (cluster_edges.count({u, v, rel})) continue;
                ++rel_cycle;
                add_edge(u, v, rel);
                if (shortest_to_answer() < g) {
                    adj[u].pop_back();
                    cluster_edges.erase({u, v, rel});
                    triples.pop_back();
                }
            }
        }

        TaskInstance task;
        task.id = "task" + std::string(t < 10 ? "0" : "") + std::to_string(t);
        task.question =
            "which entity does the marked route starting at " + ent(0) + " reach?";
        task.topic_entities = {ent(0)};
        task.gold_answers = {ent(answer)};
        task.gold_paths = {ReasoningPath::from_oriented_triples(gold_chain)};
        task.labels["hops"] = std::to_string(g);
        task.validate();
        tasks.push_back(std::move(task));
    }

    FamilyInstance family;
    family.graph = KnowledgeGraph::from_triples(std::move(triples));
    family.tasks = std::move(tasks);
    return family;
}

std::string edge_option(const std::string& relation, const std::string& target) {
    return relation + "|" + target;
}

double ToyPolicy::logit(const std::string& entity, const std::string& option) const {
    const auto it = logits.find({entity, option});
    return it == logits.end() ? 0.0 : it->second;
}

std::vector<std::pair<std::string, double>> ToyPolicy::option_logps(
    const KnowledgeGraph& g, const std::string& entity) const {
    std::vector<std::pair<std::string, double>> options;
    for (const auto& edge : g.neighbors(entity, Direction::out)) {
        options.emplace_back(edge_option(edge.relation, edge.entity), 0.0);
    }
    options.emplace_back(kStopOption, 0.0);

    double max_z = -1e300;
    for (auto& [opt, z] : options) {
        z = logit(entity, opt) / temperature;
        max_z = std::max(max_z, z);
    }
    double sum = 0.0;
    for (const auto& [opt, z] : options) sum += std::exp(z - max_z);
    const double lse = max_z + std::log(sum);
    for (auto& [opt, z] : options) z -= lse;
    return options;
}

void save_policy(std::ostream& out, const ToyPolicy& policy) {
    json entries = json::array();
    for (const auto& [key, value] : policy.logits) {
        entries.push_back({{"entity", key.first}, {"option", key.second}, {"logit", value}});
    }
    const json j = {{"temperature", policy.temperature}, {"logits", entries}};
    out << j.dump(2) << "\n";
}

void save_policy_file(const std::string& path, const ToyPolicy& policy) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write policy file: " + path);
    save_policy(out, policy);
}

ToyPolicy load_policy(std::istream& in, const std::string& source_name) {
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("temperature") ||
        !j.contains("logits") || !j["logits"].is_array()) {
        throw Error(source_name + ": malformed policy file");
    }
    ToyPolicy policy;
    policy.temperature = j["temperature"].get<double>();
    if (policy.temperature <= 0.0) throw Error(source_name + ": temperature must be > 0");
    for (const auto& e : j["logits"]) {
        policy.logits[{e.at("entity").get<std::string>(),
                       e.at("option").get<std::string>()}] = e.at("logit").get<double>();
    }
    return policy;
}

ToyPolicy load_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open policy file: " + path);
    return load_policy(in, path);
}

namespace {

// Splits "relation|target"; returns false for the stop option.
bool split_option(const std::string& option, std::string& relation, std::string& target) {
    if (option == kStopOption) return false;
    const std::size_t bar = option.find('|');
    if (bar == std::string::npos) throw Error("malformed option: " + option);
    relation = option.substr(0, bar);
    target = option.substr(bar + 1);
    return true;
}

}  // namespace

namespace {

// rng == nullptr walks greedily (argmax option, ties to the first).
RolloutResult rollout_impl(const ToyPolicy& policy, const TaskInstance& task,
                           const KnowledgeGraph& g, std::size_t hop_cap, Rng* rng) {
    if (task.topic_entities.empty()) throw Error("task has no topic entities");
    const std::string& start = task.topic_entities.front();
    if (!g.has_entity(start)) throw Error("topic entity not in graph: " + start);

    RolloutResult result;
    std::string current = start;
    std::string think;

    for (std::size_t hop = 0; hop < hop_cap; ++hop) {
        const auto options = policy.option_logps(g, current);
        std::size_t chosen;
        if (rng) {
            chosen = options.size() - 1;
            const double u = rng->u01();
            double acc = 0.0;
            for (std::size_t i = 0; i < options.size(); ++i) {
                acc += std::exp(options[i].second);
                if (u < acc) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = 0;
            for (std::size_t i = 1; i < options.size(); ++i) {
                if (options[i].second > options[chosen].second) chosen = i;
            }
        }
        result.logps.push_back(options[chosen].second);
        result.actions.push_back({current, options[chosen].first});

        std::string relation, target;
        if (!split_option(options[chosen].first, relation, target)) break;
        const Triple step{current, relation, target};
        think += "visiting (" + step.subject + ", " + step.relation + ", " + step.object +
                 "). ";
        result.visited.push_back(step);
        current = target;
    }

    result.final_entity = current;
    result.trace = parse_trace("<think> " + think + "</think><answer>[\"" + current +
                               "\"]</answer>");
    return result;
}

}  // namespace

RolloutResult rollout(const ToyPolicy& policy, const TaskInstance& task,
                      const KnowledgeGraph& g, std::size_t hop_cap, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return rollout_impl(policy, task, g, hop_cap, &rng);
}

RolloutResult greedy_rollout(const ToyPolicy& policy, const TaskInstance& task,
                             const KnowledgeGraph& g, std::size_t hop_cap) {
    return rollout_impl(policy, task, g, hop_cap, nullptr);
}

std::vector<double> policy_logps(const ToyPolicy& policy, const KnowledgeGraph& g,
                                 const std::vector<ToyAction>& actions) {
    std::vector<double> out;
    out.reserve(actions.size());
    for (const auto& action : actions) {
        const auto options = policy.option_logps(g, action.entity);
        const auto it = std::find_if(options.begin(), options.end(),
                                     [&](const auto& o) { return o.first == action.option; });
        if (it == options.end()) {
            throw Error("action " + action.option + " not available at " + action.entity);
        }
        out.push_back(it->second);
    }
    return out;
}

double sft_nll(const ToyPolicy& policy, const KnowledgeGraph& g,
               const std::vector<ToyAction>& demonstration,
               std::map<std::pair<std::string, std::string>, double>* grad) {
    if (demonstration.empty()) throw Error("empty demonstration");
    if (grad) grad->clear();
    const double n = static_cast<double>(demonstration.size());
    double nll = 0.0;
    for (const auto& action : demonstration) {
        const auto options = policy.option_logps(g, action.entity);
        const auto it = std::find_if(options.begin(), options.end(),
                                     [&](const auto& o) { return o.first == action.option; });
        if (it == options.end()) {
            throw Error("action " + action.option + " not available at " + action.entity);
        }
        nll -= it->second / n;
        if (grad) {
            // d(-logp_c)/d logit_j = (p_j - [j == c]) / temperature.
            for (const auto& [opt, logp] : options) {
                const double p = std::exp(logp);
                const double indicator = (opt == action.option) ? 1.0 : 0.0;
                (*grad)[{action.entity, opt}] += (p - indicator) / (policy.temperature * n);
            }
        }
    }
    return nll;
}

GrpoReport grpo_step_objective(const ToyPolicy& policy, const KnowledgeGraph& g,
                               const std::vector<RolloutGroup>& groups,
                               const GrpoConfig& cfg,
                               std::map<std::pair<std::string, std::string>, double>* grad) {
    if (groups.empty()) throw Error("no rollout groups");
    if (grad) grad->clear();

    GrpoReport total;
    const double n_groups = static_cast<double>(groups.size());
    for (const auto& group : groups) {
        std::vector<GroupSample> samples(group.actions.size());
        for (std::size_t i = 0; i < group.actions.size(); ++i) {
            samples[i].reward = group.rewards[i];
            samples[i].logp_new = policy_logps(policy, g, group.actions[i]);
            samples[i].logp_old = group.logp_old[i];
            samples[i].logp_ref = group.logp_ref[i];
        }

        std::vector<std::vector<double>> grad_logp;
        const GrpoReport report =
            grad ? grpo_objective_with_grad(samples, cfg, grad_logp)
                 : grpo_objective(samples, cfg);

        total.objective += report.objective / n_groups;
        total.mean_ratio += report.mean_ratio / n_groups;
        total.mean_kl += report.mean_kl / n_groups;
        total.clip_fraction += report.clip_fraction / n_groups;
        total.advantages.insert(total.advantages.end(), report.advantages.begin(),
                                report.advantages.end());

        if (!grad) continue;
        for (std::size_t i = 0; i < group.actions.size(); ++i) {
            for (std::size_t t = 0; t < group.actions[i].size(); ++t) {
                const double upstream = grad_logp[i][t] / n_groups;
                if (upstream == 0.0) continue;
                const auto& action = group.actions[i][t];
                const auto options = policy.option_logps(g, action.entity);
                for (const auto& [opt, logp] : options) {
                    const double p = std::exp(logp);
                    const double indicator = (opt == action.option) ? 1.0 : 0.0;
                    (*grad)[{action.entity, opt}] +=
                        upstream * (indicator - p) / policy.temperature;
                }
            }
        }
    }
    return total;
}

void TrainSchedule::validate() const {
    if (group_size < 2) throw Error("group_size must be >= 2");
    if (learning_rate <= 0.0) throw Error("learning_rate must be > 0");
    if (alpha < 0.0) throw Error("alpha must be >= 0");
    if (inner_epochs < 1) throw Error("inner_epochs must be >= 1");
    GrpoConfig probe;
    probe.clip_epsilon = clip_epsilon;
    probe.kl_beta = kl_beta;
    probe.validate();
}

namespace {

constexpr std::uint64_t kTrainStream = 0;

struct BatchStats {
    double mean_r_outcome = 0.0;
    double mean_r_path = 0.0;
    double mean_r_joint = 0.0;
    MetricSummary summary;
};

EvalRecord record_for(const TaskInstance& task, const RolloutResult& r,
                      const RewardBreakdown& breakdown) {
    std::set<Triple> gold_pool;
    for (const auto& path : task.gold_paths) {
        const auto triples = path.triple_set();
        gold_pool.insert(triples.begin(), triples.end());
    }
    std::set<Triple> distinct(r.visited.begin(), r.visited.end());
    EvalRecord rec;
    rec.id = task.id;
    rec.hit1 = answer_metrics(r.trace, task.gold_answers).hit1;
    rec.f1 = breakdown.outcome.reward;
    rec.n_pred_triples = distinct.size();
    rec.n_correct_triples =
        r.trace.think ? extract_mentioned_triples(*r.trace.think, gold_pool).size() : 0;
    rec.n_gold_triples = gold_pool.size();
    rec.group_labels = task.labels;
    return rec;
}

}  // namespace

TrainReport train(const TrainSchedule& schedule, const SyntheticTaskFamily& family_cfg) {
    schedule.validate();
    const FamilyInstance family = generate_family(family_cfg);
    const std::size_t hop_cap = family_cfg.gold_hops + 2;
    const std::size_t S = schedule.group_size;

    GrpoConfig grpo_cfg;
    grpo_cfg.clip_epsilon = schedule.clip_epsilon;
    grpo_cfg.kl_beta = schedule.kl_beta;

    ToyPolicy policy;
    const ToyPolicy reference = policy;

    const auto reward_config = [&](RewardPhase phase) {
        RewardConfig rc;
        rc.phase = phase;
        rc.alpha = schedule.alpha;
        return rc;
    };

    // Draws a group of rollouts per task; used by both eval and training.
    const auto sample_batch = [&](std::uint64_t stream, std::size_t step,
                                  RewardPhase phase, std::vector<RolloutGroup>* groups,
                                  BatchStats& stats) {
        const RewardConfig rc = reward_config(phase);
        std::vector<EvalRecord> records;
        const double n_rollouts = static_cast<double>(family.tasks.size() * S);
        for (std::size_t ti = 0; ti < family.tasks.size(); ++ti) {
            const TaskInstance& task = family.tasks[ti];
            RolloutGroup group;
            for (std::size_t si = 0; si < S; ++si) {
                const std::uint64_t seed =
                    derive_seed(schedule.seed, stream, step, ti, si);
                RolloutResult r = rollout(policy, task, family.graph, hop_cap, seed);
                const RewardBreakdown breakdown = joint_reward(r.trace, task, rc);
                stats.mean_r_outcome += breakdown.outcome.reward / n_rollouts;
                stats.mean_r_path += breakdown.path.reward / n_rollouts;
                stats.mean_r_joint += breakdown.joint / n_rollouts;
                records.push_back(record_for(task, r, breakdown));
                if (groups) {
                    group.rewards.push_back(breakdown.joint);
                    group.logp_old.push_back(r.logps);
                    group.logp_ref.push_back(policy_logps(reference, family.graph,
                                                          r.actions));
                    group.actions.push_back(std::move(r.actions));
                }
            }
            if (groups) groups->push_back(std::move(group));
        }
        stats.summary = summarize(records);
    };

    // Sampling-free evaluation: one greedy rollout per task, so the
    // before/after comparison reflects only what the policy learned.
    const auto greedy_eval = [&](MetricSummary& summary, double& mean_r_outcome) {
        const RewardConfig rc = reward_config(RewardPhase::joint);
        std::vector<EvalRecord> records;
        double total = 0.0;
        for (const TaskInstance& task : family.tasks) {
            const RolloutResult r = greedy_rollout(policy, task, family.graph, hop_cap);
            const RewardBreakdown breakdown = joint_reward(r.trace, task, rc);
            total += breakdown.outcome.reward;
            records.push_back(record_for(task, r, breakdown));
        }
        summary = summarize(records);
        mean_r_outcome = total / static_cast<double>(family.tasks.size());
    };

    TrainReport report;
    greedy_eval(report.initial_eval, report.initial_mean_r_outcome);

    const std::size_t total_steps = schedule.phase1_steps + schedule.phase2_steps;
    for (std::size_t step = 1; step <= total_steps; ++step) {
        const RewardPhase phase = step <= schedule.phase1_steps ? RewardPhase::outcome_only
                                                                : RewardPhase::joint;
        std::vector<RolloutGroup> groups;
        BatchStats stats;
        sample_batch(kTrainStream, step, phase, &groups, stats);

        StepStats row;
        row.step = step;
        row.phase = phase;
        row.mean_r_outcome = stats.mean_r_outcome;
        row.mean_r_path = stats.mean_r_path;
        row.mean_r_joint = stats.mean_r_joint;
        row.coverage = stats.summary.coverage;
        row.efficiency = stats.summary.efficiency;

        for (std::size_t epoch = 0; epoch < schedule.inner_epochs; ++epoch) {
            std::map<std::pair<std::string, std::string>, double> grad;
            const GrpoReport objective =
                grpo_step_objective(policy, family.graph, groups, grpo_cfg, &grad);
            row.clip_fraction += objective.clip_fraction /
                                 static_cast<double>(schedule.inner_epochs);
            row.mean_kl += objective.mean_kl / static_cast<double>(schedule.inner_epochs);
            for (const auto& [key, value] : grad) {
                policy.logits[key] += schedule.learning_rate * value;
            }
        }
        report.steps.push_back(row);
    }

    greedy_eval(report.final_eval, report.final_mean_r_outcome);
    report.policy = std::move(policy);
    return report;
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
    out << "step,phase,mean_r_outcome,mean_r_path,mean_r_joint,coverage,efficiency,"
           "clip_fraction,mean_kl\n";
    for (const auto& row : report.steps) {
        out << row.step << ',' << phase_name(row.phase) << ','
            << format_double(row.mean_r_outcome) << ',' << format_double(row.mean_r_path)
            << ',' << format_double(row.mean_r_joint) << ',' << format_double(row.coverage)
            << ',' << (row.efficiency ? format_double(*row.efficiency) : "nan") << ','
            << format_double(row.clip_fraction) << ',' << format_double(row.mean_kl)
            << '\n';
    }
}

void write_report_csv_file(const std::string& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write report: " + path);
    write_report_csv(out, report);
}

}  // namespace eog
