#include "sed/config_json.hpp"

namespace sed {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
static T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"d", cfg.d},
              {"num_blocks", cfg.num_blocks},
              {"g", cfg.g},
              {"n_state", cfg.n_state},
              {"expand", cfg.expand},
              {"fctf_e", cfg.fctf_e},
              {"dilations", cfg.dilations}};
}

ModelConfig model_config_from_json(const json& j) {
  reject_unknown_keys(j, {"d", "num_blocks", "g", "n_state", "expand", "fctf_e", "dilations"},
                      "model config");
  ModelConfig cfg;
  cfg.d = get_or<std::size_t>(j, "d", cfg.d);
  cfg.num_blocks = get_or<std::size_t>(j, "num_blocks", cfg.num_blocks);
  cfg.g = get_or<std::size_t>(j, "g", cfg.g);
  cfg.n_state = get_or<std::size_t>(j, "n_state", cfg.n_state);
  cfg.expand = get_or<std::size_t>(j, "expand", cfg.expand);
  cfg.fctf_e = get_or<std::size_t>(j, "fctf_e", cfg.fctf_e);
  cfg.dilations = get_or<std::vector<std::size_t>>(j, "dilations", cfg.dilations);
  cfg.validate();
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate},
              {"max_epochs", cfg.max_epochs},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"weight_decay", cfg.weight_decay},
              {"eps", cfg.eps},
              {"seed", cfg.seed},
              {"checkpoint_every", cfg.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"learning_rate", "max_epochs", "beta1", "beta2", "weight_decay",
                       "eps", "seed", "checkpoint_every"},
                      "train config");
  TrainConfig cfg;
  cfg.learning_rate = get_or<double>(j, "learning_rate", cfg.learning_rate);
  cfg.max_epochs = get_or<std::size_t>(j, "max_epochs", cfg.max_epochs);
  cfg.beta1 = get_or<double>(j, "beta1", cfg.beta1);
  cfg.beta2 = get_or<double>(j, "beta2", cfg.beta2);
  cfg.weight_decay = get_or<double>(j, "weight_decay", cfg.weight_decay);
  cfg.eps = get_or<double>(j, "eps", cfg.eps);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.checkpoint_every = get_or<std::size_t>(j, "checkpoint_every", cfg.checkpoint_every);
  cfg.validate();
  return cfg;
}

json synth_config_to_json(const SynthConfig& cfg) {
  return json{{"seed", cfg.seed},
              {"num_sequences", cfg.num_sequences},
              {"min_length", cfg.min_length},
              {"max_length", cfg.max_length},
              {"width", cfg.width},
              {"sample_rate", cfg.sample_rate},
              {"segments_per_sequence", cfg.segments_per_sequence},
              {"short_fraction", cfg.short_fraction},
              {"snr", cfg.snr}};
}

SynthConfig synth_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"seed", "num_sequences", "min_length", "max_length", "width",
                       "sample_rate", "segments_per_sequence", "short_fraction", "snr"},
                      "synth config");
  SynthConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.num_sequences = get_or<std::size_t>(j, "num_sequences", cfg.num_sequences);
  cfg.min_length = get_or<std::size_t>(j, "min_length", cfg.min_length);
  cfg.max_length = get_or<std::size_t>(j, "max_length", cfg.max_length);
  cfg.width = get_or<std::size_t>(j, "width", cfg.width);
  cfg.sample_rate = get_or<double>(j, "sample_rate", cfg.sample_rate);
  cfg.segments_per_sequence =
      get_or<std::size_t>(j, "segments_per_sequence", cfg.segments_per_sequence);
  cfg.short_fraction = get_or<double>(j, "short_fraction", cfg.short_fraction);
  cfg.snr = get_or<double>(j, "snr", cfg.snr);
  cfg.validate();
  return cfg;
}

}  // namespace sed
