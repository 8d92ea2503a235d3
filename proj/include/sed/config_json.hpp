#pragma once

#include <json.hpp>

#include "sed/data.hpp"
#include "sed/model.hpp"
#include "sed/train.hpp"

namespace sed {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

// Throws ConfigError naming the first key of `j` not present in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& where);

}  // namespace sed
