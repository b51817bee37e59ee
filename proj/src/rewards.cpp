#include "eog/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "eog/norm.hpp"

namespace eog {

RewardPhase parse_phase(std::string_view name) {
    if (name == "outcome_only") return RewardPhase::outcome_only;
    if (name == "joint") return RewardPhase::joint;
    throw Error("unknown reward phase: " + std::string(name));
}

std::string phase_name(RewardPhase phase) {
    return phase == RewardPhase::outcome_only ? "outcome_only" : "joint";
}

void RewardConfig::validate() const {
    if (alpha < 0.0 || !std::isfinite(alpha)) throw Error("alpha must be finite and >= 0");
    if (penalty_per_token < 0.0) throw Error("penalty_per_token must be >= 0");
    if (penalty_cap < 0.0) throw Error("penalty_cap must be >= 0");
}

OutcomeResult outcome_reward(const std::set<std::string>& predicted,
                             const std::set<std::string>& gold_answers) {
    if (gold_answers.empty()) throw Error("gold answer set is empty");
    OutcomeResult result;
    if (predicted.empty()) return result;
    std::size_t overlap = 0;
    for (const auto& p : predicted) overlap += gold_answers.count(p);
    result.precision = static_cast<double>(overlap) / static_cast<double>(predicted.size());
    result.recall = static_cast<double>(overlap) / static_cast<double>(gold_answers.size());
    if (overlap > 0) {
        result.reward =
            2.0 * result.precision * result.recall / (result.precision + result.recall);
    }
    return result;
}

OutcomeResult outcome_reward(const Trace& trace, const std::set<std::string>& gold_answers) {
    return outcome_reward(trace.effective_answers(), gold_answers);
}

PathResult path_reward(const Trace& trace, const std::vector<ReasoningPath>& gold_paths) {
    PathResult result;
    std::set<Triple> pool;
    for (const auto& path : gold_paths) {
        const auto triples = path.triple_set();
        pool.insert(triples.begin(), triples.end());
    }
    result.total = pool.size();
    if (result.total == 0 || !trace.format_valid || !trace.think) return result;
    result.matched = extract_mentioned_triples(*trace.think, pool).size();
    result.reward = static_cast<double>(result.matched) / static_cast<double>(result.total);
    return result;
}

double length_penalty(std::size_t token_count, const RewardConfig& config) {
    if (token_count <= config.overlong_threshold) return 0.0;
    const double excess = static_cast<double>(token_count - config.overlong_threshold);
    return -std::min(config.penalty_cap, config.penalty_per_token * excess);
}

RewardBreakdown joint_reward(const Trace& trace, const TaskInstance& task,
                             const RewardConfig& config) {
    config.validate();
    RewardBreakdown out;
    out.format_valid = trace.format_valid;
    out.outcome = outcome_reward(trace, task.gold_answers);
    out.length_penalty = length_penalty(trace.token_count, config);
    out.joint = out.outcome.reward + out.length_penalty;
    if (config.phase == RewardPhase::joint) {
        out.path = path_reward(trace, task.gold_paths);
        out.joint += config.alpha * out.path.reward;
    }
    return out;
}

}  // namespace eog
