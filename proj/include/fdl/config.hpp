#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "fdl/diffusion.hpp"
#include "fdl/unlearning.hpp"

namespace fdl {

nlohmann::json to_json(const UnlearnConfig& config);
/// Missing keys keep their defaults; unknown keys throw std::invalid_argument.
UnlearnConfig unlearn_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PretrainOptions& options);
PretrainOptions pretrain_options_from_json(const nlohmann::json& j);

/// Applies "key=value" or "group.key=value". The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& assignments);

/// Throws std::runtime_error when the file is missing or not valid JSON.
nlohmann::json read_json_file(const std::string& path);

}  // namespace fdl
