#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eog/evalkit.hpp"
#include "eog/grpo.hpp"
#include "eog/kg.hpp"
#include "eog/rewards.hpp"
#include "eog/trace.hpp"

namespace eog {

// Recipe for a synthetic benchmark: n_tasks disjoint entity clusters,
// each with a planted gold route of exactly gold_hops edges from topic to
// answer, an equal-length detour route the gold paths do not include, and
// random distractor edges. No distractor ever creates a shorter
// topic-to-answer route than the planted one.
struct SyntheticTaskFamily {
    std::uint64_t seed = 1;
    std::size_t n_entities = 40;
    std::size_t n_relations = 12;
    double edge_density = 0.6;  // acceptance probability per candidate distractor
    std::size_t gold_hops = 2;  // in [1, 4]
    std::size_t distractor_branching = 3;  // candidate distractor targets per entity
    std::size_t n_tasks = 8;

    void validate() const;
};

struct FamilyInstance {
    KnowledgeGraph graph;
    std::vector<TaskInstance> tasks;
};

// Deterministic under cfg.seed. Throws on infeasible combinations (too
// few entities per cluster or too few relations for the route layout).
FamilyInstance generate_family(const SyntheticTaskFamily& cfg);

// Option key at an entity: an outgoing edge rendered as "relation|target"
// or the stop token.
inline constexpr const char* kStopOption = "<stop>";
std::string edge_option(const std::string& relation, const std::string& target);

// Tabular softmax policy over (entity, option) logits. Options at an
// entity are its outgoing edges plus STOP; missing logits read as 0.
struct ToyPolicy {
    std::map<std::pair<std::string, std::string>, double> logits;
    double temperature = 1.0;

    double logit(const std::string& entity, const std::string& option) const;
    // Log-probabilities over the entity's options (sorted edge options
    // first, STOP last), as a parallel (option, logp) list.
    std::vector<std::pair<std::string, double>> option_logps(const KnowledgeGraph& g,
                                                             const std::string& entity) const;
};

void save_policy(std::ostream& out, const ToyPolicy& policy);
void save_policy_file(const std::string& path, const ToyPolicy& policy);
ToyPolicy load_policy(std::istream& in, const std::string& source_name = "<stream>");
ToyPolicy load_policy_file(const std::string& path);

struct ToyAction {
    std::string entity;
    std::string option;  // edge option or kStopOption
};

struct RolloutResult {
    Trace trace;
    std::vector<double> logps;      // one per sampled decision, STOP included
    std::vector<ToyAction> actions;
    std::vector<Triple> visited;    // traversed edges in order
    std::string final_entity;
};

// Samples a walk from the task's first topic entity, stopping on STOP or
// the hop cap (gold_hops + 2), and renders it as a tagged trace whose
// think text lists every traversed triple verbatim.
RolloutResult rollout(const ToyPolicy& policy, const TaskInstance& task,
                      const KnowledgeGraph& g, std::size_t hop_cap, std::uint64_t rng_seed);

// Deterministic variant: takes the highest-probability option at every
// entity (ties to the first in option order). Used for the before/after
// policy evaluations so they are free of sampling noise.
RolloutResult greedy_rollout(const ToyPolicy& policy, const TaskInstance& task,
                             const KnowledgeGraph& g, std::size_t hop_cap);

// Log-probabilities the policy assigns to an already-sampled action
// sequence. Throws on an action that is not available at its entity.
std::vector<double> policy_logps(const ToyPolicy& policy, const KnowledgeGraph& g,
                                 const std::vector<ToyAction>& actions);

// Mean negative log-probability of the demonstrated actions; optional
// analytic gradient with respect to every logit. Throws on an action that
// is not available at its entity.
double sft_nll(const ToyPolicy& policy, const KnowledgeGraph& g,
               const std::vector<ToyAction>& demonstration,
               std::map<std::pair<std::string, std::string>, double>* grad = nullptr);

// Frozen rollout batch for one task: the sampled actions with their
// rewards and the behavior/reference log-probs taken at rollout time.
struct RolloutGroup {
    std::vector<std::vector<ToyAction>> actions;
    std::vector<double> rewards;
    std::vector<std::vector<double>> logp_old;
    std::vector<std::vector<double>> logp_ref;
};

// Mean GRPO objective over the groups with logp_new recomputed from the
// current policy, plus diagnostics averaged over groups. When grad is
// given it receives d objective / d logit for every (entity, option)
// reachable from the sampled actions.
GrpoReport grpo_step_objective(const ToyPolicy& policy, const KnowledgeGraph& g,
                               const std::vector<RolloutGroup>& groups,
                               const GrpoConfig& cfg,
                               std::map<std::pair<std::string, std::string>, double>* grad
                               = nullptr);

// Defaults are calibrated on the default family so that phase 2 reliably
// pulls every task onto its planted route within the step budget.
struct TrainSchedule {
    std::size_t phase1_steps = 300;  // outcome-only reward
    std::size_t phase2_steps = 300;  // joint reward
    std::size_t group_size = 6;      // S >= 2
    double learning_rate = 0.7;
    double alpha = 0.25;
    double clip_epsilon = 0.2;
    double kl_beta = 0.0;
    std::size_t inner_epochs = 3;  // clipped re-use of each rollout batch
    std::uint64_t seed = 1;

    void validate() const;
};

struct StepStats {
    std::size_t step = 0;
    RewardPhase phase = RewardPhase::outcome_only;
    double mean_r_outcome = 0.0;
    double mean_r_path = 0.0;
    double mean_r_joint = 0.0;
    double coverage = 0.0;
    std::optional<double> efficiency;
    double clip_fraction = 0.0;
    double mean_kl = 0.0;
};

struct TrainReport {
    std::vector<StepStats> steps;
    MetricSummary initial_eval;
    MetricSummary final_eval;
    double initial_mean_r_outcome = 0.0;
    double final_mean_r_outcome = 0.0;
    ToyPolicy policy;
};

// Two-phase GRPO training: phase 1 scores rollouts with the outcome-only
// reward, phase 2 with the joint reward at schedule.alpha. Each step
// draws group_size rollouts per task, takes one gradient-ascent step on
// the summed group objectives, and logs per-step means. Deterministic
// for a fixed (schedule.seed, family) pair.
TrainReport train(const TrainSchedule& schedule, const SyntheticTaskFamily& family_cfg);

// step, phase, mean_r_outcome, mean_r_path, mean_r_joint, coverage,
// efficiency, clip_fraction, mean_kl. Absent efficiency prints as nan.
void write_report_csv(std::ostream& out, const TrainReport& report);
void write_report_csv_file(const std::string& path, const TrainReport& report);

}  // namespace eog
