#pragma once

#include <set>
#include <string>
#include <vector>

#include "eog/kg.hpp"
#include "eog/trace.hpp"

namespace eog {

enum class RewardPhase { outcome_only, joint };

RewardPhase parse_phase(std::string_view name);
std::string phase_name(RewardPhase phase);

struct RewardConfig {
    RewardPhase phase = RewardPhase::joint;
    double alpha = 0.25;                  // weight on the path term
    std::size_t overlong_threshold = 3000;  // tokens before the penalty kicks in
    double penalty_per_token = 0.001;
    double penalty_cap = 1.0;

    void validate() const;
};

struct OutcomeResult {
    double reward = 0.0;  // F1 of predicted vs gold answers
    double precision = 0.0;
    double recall = 0.0;
};

struct PathResult {
    double reward = 0.0;  // matched / total over the union of gold-path triples
    std::size_t matched = 0;
    std::size_t total = 0;
};

struct RewardBreakdown {
    OutcomeResult outcome;
    PathResult path;
    double length_penalty = 0.0;  // <= 0
    double joint = 0.0;
    bool format_valid = false;
};

// Entity-level F1 between the trace's effective answers and the gold set.
// An invalid trace or an empty predicted set scores zero across the board.
// Throws if the gold set is empty.
OutcomeResult outcome_reward(const Trace& trace, const std::set<std::string>& gold_answers);
OutcomeResult outcome_reward(const std::set<std::string>& predicted,
                             const std::set<std::string>& gold_answers);

// Fraction of the union of gold-path triples whose subject, relation, and
// object all appear in the think text. No gold paths or an invalid trace
// scores zero with total = 0.
PathResult path_reward(const Trace& trace, const std::vector<ReasoningPath>& gold_paths);

double length_penalty(std::size_t token_count, const RewardConfig& config);

// outcome + alpha * path + penalty in the joint phase; the path term is
// dropped (not just zero-weighted) in the outcome-only phase.
RewardBreakdown joint_reward(const Trace& trace, const TaskInstance& task,
                             const RewardConfig& config);

}  // namespace eog
