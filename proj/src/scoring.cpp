#include "eog/scoring.hpp"

#include <cstdint>

#include "eog/trace.hpp"

namespace eog {

using nlohmann::json;

TaskIndex index_tasks(const std::vector<TaskInstance>& tasks) {
    TaskIndex index;
    for (const auto& task : tasks) {
        if (!index.emplace(task.id, task).second) {
            throw Error("duplicate task id: " + task.id);
        }
    }
    return index;
}

RewardConfig apply_overrides(RewardConfig base, const json& overrides) {
    if (!overrides.is_object()) throw Error("overrides must be a JSON object");
    for (const auto& [key, value] : overrides.items()) {
        if (key == "alpha") {
            if (!value.is_number()) throw Error("override alpha must be a number");
            base.alpha = value.get<double>();
        } else if (key == "phase") {
            if (!value.is_string()) throw Error("override phase must be a string");
            base.phase = parse_phase(value.get<std::string>());
        } else if (key == "overlong_threshold") {
            // is_number_unsigned() alone would be a storage-type check and
            // reject signed-stored values like json(100); test the value.
            const bool non_negative_integer =
                value.is_number_unsigned() ||
                (value.is_number_integer() && value.get<std::int64_t>() >= 0);
            if (!non_negative_integer) {
                throw Error("override overlong_threshold must be a non-negative integer");
            }
            base.overlong_threshold = value.get<std::size_t>();
        } else if (key == "penalty_per_token") {
            if (!value.is_number()) throw Error("override penalty_per_token must be a number");
            base.penalty_per_token = value.get<double>();
        } else if (key == "penalty_cap") {
            if (!value.is_number()) throw Error("override penalty_cap must be a number");
            base.penalty_cap = value.get<double>();
        } else {
            throw Error("unknown override key: " + key);
        }
    }
    base.validate();
    return base;
}

json score_trace(const TaskIndex& tasks, const std::string& id, const std::string& text,
                 const RewardConfig& config) {
    const auto it = tasks.find(id);
    if (it == tasks.end()) throw Error("unknown task id: " + id);
    const Trace trace = parse_trace(text);
    const RewardBreakdown b = joint_reward(trace, it->second, config);
    return {
        {"id", id},
        {"r_outcome", b.outcome.reward},
        {"r_path", b.path.reward},
        {"r_joint", b.joint},
        {"precision", b.outcome.precision},
        {"recall", b.outcome.recall},
        {"format_valid", b.format_valid},
        {"length_penalty", b.length_penalty},
    };
}

}  // namespace eog
