#pragma once

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "eog/kg.hpp"
#include "eog/rewards.hpp"

namespace eog {

using TaskIndex = std::map<std::string, TaskInstance>;

TaskIndex index_tasks(const std::vector<TaskInstance>& tasks);

// Applies JSON overrides (alpha, phase, overlong_threshold,
// penalty_per_token, penalty_cap) to a copy of the base config. Unknown
// keys or wrong types throw.
RewardConfig apply_overrides(RewardConfig base, const nlohmann::json& overrides);

// The one scoring path shared by cmd_score and the HTTP service. Returns
// the reward JSONL object: id, r_outcome, r_path, r_joint, precision,
// recall, format_valid, length_penalty. Throws Error for an unknown id.
nlohmann::json score_trace(const TaskIndex& tasks, const std::string& id,
                           const std::string& text, const RewardConfig& config);

}  // namespace eog
