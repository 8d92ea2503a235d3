#include "sed/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "sed/config_json.hpp"
#include "sed/io.hpp"
#include "sed/metrics.hpp"

namespace sed {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
  if (max_epochs < 1) throw ConfigError("train: need at least one epoch");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("train: betas must lie in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("train: weight decay must be non-negative");
}

static constexpr double kProbEps = 1e-7;

Tensor bce_loss(const Tensor& probs, const std::vector<int>& labels) {
  const std::size_t L = labels.size();
  if (probs->size() != L)
    throw ShapeError("bce_loss: " + std::to_string(probs->size()) + " probabilities vs " +
                     std::to_string(L) + " labels");
  if (L == 0) throw ShapeError("bce_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    const double p = std::clamp(probs->v[i], kProbEps, 1.0 - kProbEps);
    acc -= labels[i] ? std::log(p) : std::log1p(-p);
  }
  Tensor out = scalar_tensor(acc / static_cast<double>(L));
  check_finite(*out, "bce_loss");
  if (active_tape() && probs->requires_grad) {
    out->requires_grad = true;
    active_tape()->record([probs, out, labels, L]() {
      probs->ensure_grad();
      const double go = out->g[0] / static_cast<double>(L);
      for (std::size_t i = 0; i < L; ++i) {
        const double raw = probs->v[i];
        if (raw < kProbEps || raw > 1.0 - kProbEps) continue;  // clamped region
        probs->g[i] += go * (labels[i] ? -1.0 / raw : 1.0 / (1.0 - raw));
      }
    });
  }
  return out;
}

void AdamW::init(const NamedParams& params) {
  slots_.clear();
  slots_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    slots_[i].m.assign(params[i].second->size(), 0.0);
    slots_[i].v.assign(params[i].second->size(), 0.0);
  }
  step_count_ = 0;
}

void AdamW::restore(std::vector<Slot> slots, std::size_t step_count) {
  slots_ = std::move(slots);
  step_count_ = step_count;
}

void AdamW::step(NamedParams& params, const TrainConfig& cfg) {
  if (slots_.size() != params.size())
    throw ConfigError("adamw: optimizer state does not match parameter registry");
  // Validate all gradients before touching any parameter.
  for (const auto& [name, p] : params) {
    if (p->g.size() != p->v.size())
      throw NumericError("adamw: missing gradient for " + name);
    for (double g : p->g)
      if (!std::isfinite(g)) throw NumericError("adamw: non-finite gradient in " + name);
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].second;
    auto& slot = slots_[i];
    for (std::size_t k = 0; k < p.v.size(); ++k) {
      const double g = p.g[k];
      slot.m[k] = cfg.beta1 * slot.m[k] + (1.0 - cfg.beta1) * g;
      slot.v[k] = cfg.beta2 * slot.v[k] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = slot.m[k] / bc1;
      const double v_hat = slot.v[k] / bc2;
      p.v[k] -= cfg.learning_rate *
                (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p.v[k]);
    }
    check_finite(p, "adamw");
  }
}

static std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t epoch) {
  std::uint64_t x = seed ^ (0x632BE59BD9B4E019ull + epoch * 0x9E3779B97F4A7C15ull);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  return x ^ (x >> 31);
}

TrainResult train_run(Model& model, AdamW& opt, const TrainDataset& train,
                      const TrainDataset& val, const TrainConfig& cfg,
                      const EpochCallback& on_epoch, std::size_t start_epoch) {
  cfg.validate();
  if (train.empty()) throw DataError("train_run: empty training set");

  TrainResult result;
  double best_auc = -1.0;
  auto& params = model.parameters();

  for (std::size_t epoch = start_epoch; epoch < cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t si : order) {
      const auto& seq = train[si];
      try {
        for (auto& [name, t] : params) t->zero_grad();
        Tape tape;
        {
          TapeScope scope(tape);
          Tensor probs = model.forward(seq.input);
          Tensor loss = bce_loss(probs, seq.labels);
          epoch_loss += loss->v[0];
          tape.backward(loss);
        }
        opt.step(params, cfg);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", sequence '" + seq.id +
                           "': " + e.what());
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(train.size());
    if (!val.empty()) {
      std::vector<std::vector<int>> vl;
      std::vector<std::vector<double>> vp;
      for (const auto& seq : val) {
        Tensor probs = model.forward(seq.input);
        vp.emplace_back(probs->v.begin(), probs->v.end());
        vl.push_back(seq.labels);
      }
      MetricsReport rep = stratified_eval(vl, vp, 5.0);
      log.val_auc = rep.frame_auc;
      log.val_ap = rep.frame_ap;
      if (log.val_auc && *log.val_auc > best_auc) {
        best_auc = *log.val_auc;
        result.best_val_epoch = epoch;
      }
    } else {
      result.best_val_epoch = epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log, model, opt);
  }
  return result;
}

static const char kCheckpointMagic[4] = {'S', 'E', 'D', 'C'};

Checkpoint make_checkpoint(const Model& model, const AdamW& opt, std::size_t epoch,
                           std::uint64_t seed, const std::string& metrics_snapshot) {
  Checkpoint ck;
  ck.model_config = model.config();
  ck.epoch = epoch;
  ck.seed = seed;
  ck.tensors = model.parameters();
  ck.optimizer_step = opt.step_count();
  ck.optimizer_slots = opt.slots();
  ck.metrics_snapshot = metrics_snapshot;
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  using nlohmann::json;
  std::vector<double> payload;
  json dir = json::array();
  for (const auto& [name, t] : ck.tensors) {
    dir.push_back({{"name", name},
                   {"shape", t->shape},
                   {"offset", payload.size()},
                   {"count", t->size()}});
    payload.insert(payload.end(), t->v.begin(), t->v.end());
  }
  json opt = json::array();
  if (!ck.optimizer_slots.empty()) {
    if (ck.optimizer_slots.size() != ck.tensors.size())
      throw ConfigError("save_checkpoint: optimizer slots do not match tensors");
    for (std::size_t i = 0; i < ck.optimizer_slots.size(); ++i) {
      const auto& slot = ck.optimizer_slots[i];
      json entry = {{"name", ck.tensors[i].first},
                    {"m_offset", payload.size()},
                    {"count", slot.m.size()}};
      payload.insert(payload.end(), slot.m.begin(), slot.m.end());
      entry["v_offset"] = payload.size();
      payload.insert(payload.end(), slot.v.begin(), slot.v.end());
      opt.push_back(entry);
    }
  }
  json header = {{"model", model_config_to_json(ck.model_config)},
                 {"epoch", ck.epoch},
                 {"seed", ck.seed},
                 {"tensors", dir},
                 {"optimizer", {{"step", ck.optimizer_step}, {"slots", opt}}},
                 {"metrics", ck.metrics_snapshot}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("save_checkpoint: cannot write " + path);
  out.write(kCheckpointMagic, 4);
  write_u32(out, 1);
  write_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
  const std::size_t byte_len = payload.size() * sizeof(double);
  write_u64(out, payload.size());
  out.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(byte_len));
  write_u32(out, crc32(bytes, byte_len));
  if (!out) throw DataError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  char magic[4];
  read_exact(in, magic, 4, "checkpoint header");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw DataError("load_checkpoint: bad magic in " + path);
  if (read_u32(in, "checkpoint version") != 1)
    throw DataError("load_checkpoint: unsupported version");
  const std::uint64_t header_len = read_u64(in, "checkpoint header length");
  std::string header_text(header_len, '\0');
  read_exact(in, header_text.data(), header_len, "checkpoint header");
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("load_checkpoint: bad header JSON: ") + e.what());
  }
  const std::uint64_t count = read_u64(in, "checkpoint payload length");
  std::vector<double> payload(count);
  read_exact(in, reinterpret_cast<char*>(payload.data()), count * sizeof(double),
             "checkpoint payload");
  const std::uint32_t stored = read_u32(in, "checkpoint checksum");
  const std::uint32_t computed = crc32(reinterpret_cast<const unsigned char*>(payload.data()),
                                       count * sizeof(double));
  if (stored != computed) throw DataError("load_checkpoint: checksum mismatch in " + path);

  Checkpoint ck;
  try {
    ck.model_config = model_config_from_json(header.at("model"));
    ck.epoch = header.at("epoch").get<std::size_t>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.metrics_snapshot = header.value("metrics", std::string{});
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto n = entry.at("count").get<std::size_t>();
      if (offset + n > payload.size())
        throw DataError("load_checkpoint: tensor '" + name + "' out of payload bounds");
      ck.tensors.emplace_back(
          name, make_tensor(shape, std::vector<double>(payload.begin() + offset,
                                                       payload.begin() + offset + n),
                            true));
    }
    const auto& optj = header.at("optimizer");
    ck.optimizer_step = optj.at("step").get<std::size_t>();
    for (const auto& entry : optj.at("slots")) {
      const auto mo = entry.at("m_offset").get<std::size_t>();
      const auto vo = entry.at("v_offset").get<std::size_t>();
      const auto n = entry.at("count").get<std::size_t>();
      if (mo + n > payload.size() || vo + n > payload.size())
        throw DataError("load_checkpoint: optimizer slot out of payload bounds");
      AdamW::Slot slot;
      slot.m.assign(payload.begin() + mo, payload.begin() + mo + n);
      slot.v.assign(payload.begin() + vo, payload.begin() + vo + n);
      ck.optimizer_slots.push_back(std::move(slot));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("load_checkpoint: malformed header: ") + e.what());
  }
  return ck;
}

void restore_checkpoint(const Checkpoint& ck, Model& model, AdamW& opt) {
  auto& params = model.parameters();
  if (params.size() != ck.tensors.size())
    throw DataError("restore_checkpoint: parameter registry size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].first != ck.tensors[i].first)
      throw DataError("restore_checkpoint: parameter '" + params[i].first +
                      "' does not match checkpoint entry '" + ck.tensors[i].first + "'");
    if (params[i].second->shape != ck.tensors[i].second->shape)
      throw DataError("restore_checkpoint: shape mismatch for " + params[i].first);
    params[i].second->v = ck.tensors[i].second->v;
  }
  if (!ck.optimizer_slots.empty())
    opt.restore(ck.optimizer_slots, ck.optimizer_step);
  else
    opt.init(params);
}

}  // namespace sed
