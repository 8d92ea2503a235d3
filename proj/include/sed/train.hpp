#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sed/model.hpp"
#include "sed/tensor.hpp"

namespace sed {

// Mean binary cross-entropy over frames; probabilities clamped to
// [1e-7, 1 - 1e-7] before the log.
Tensor bce_loss(const Tensor& probs, const std::vector<int>& labels);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t max_epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs between checkpoints, 0 = final only

  void validate() const;
};

// Decoupled-weight-decay Adam over a named parameter registry.
class AdamW {
 public:
  void init(const NamedParams& params);
  void step(NamedParams& params, const TrainConfig& cfg);
  std::size_t step_count() const { return step_count_; }

  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  void restore(std::vector<Slot> slots, std::size_t step_count);

 private:
  std::vector<Slot> slots_;
  std::size_t step_count_ = 0;
};

struct TrainSequence {
  Tensor input;  // L x D
  std::vector<int> labels;
  std::string id;
};

using TrainDataset = std::vector<TrainSequence>;

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_auc;
  std::optional<double> val_ap;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_val_epoch = 0;  // epoch with highest validation AUC (or last)
};

using EpochCallback =
    std::function<void(const EpochLog&, Model& model, const AdamW& opt)>;

// One full sequence per optimization step, shuffled per epoch from the seed.
// Numeric aborts carry the offending epoch and sequence id.
TrainResult train_run(Model& model, AdamW& opt, const TrainDataset& train,
                      const TrainDataset& val, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = nullptr,
                      std::size_t start_epoch = 0);

// Checkpoint container: "SEDC" magic, version, JSON header (config, epoch, seed,
// tensor directory with offsets), raw f64 payload, CRC32 of payload.
struct Checkpoint {
  ModelConfig model_config;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  NamedParams tensors;
  std::size_t optimizer_step = 0;
  std::vector<AdamW::Slot> optimizer_slots;  // empty if optimizer state absent
  std::string metrics_snapshot;              // JSON text, may be empty
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Model& model, const AdamW& opt, std::size_t epoch,
                           std::uint64_t seed, const std::string& metrics_snapshot = "");
// Copies checkpoint tensors/optimizer state into an existing model/optimizer.
void restore_checkpoint(const Checkpoint& ck, Model& model, AdamW& opt);

}  // namespace sed
