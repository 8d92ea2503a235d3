// Command-line front end: synthetic data generation, training, evaluation,
// and complexity reporting over JSON run configs.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "sed/complexity.hpp"
#include "sed/config_json.hpp"
#include "sed/data.hpp"
#include "sed/io.hpp"
#include "sed/metrics.hpp"
#include "sed/model.hpp"
#include "sed/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGeneric = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct DataSection {
  sed::SynthConfig synth;
  bool has_synth = false;
  std::string manifest;
  std::string embeddings_dir;
  std::string annotations;
  std::string split;
  double native_rate = 5.0;
  double sample_rate = 5.0;
  std::size_t num_train = 0;  // for manifest datasets: first N sequences train
};

struct EvalSection {
  bool curves = true;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir;
  sed::ModelConfig model;
  DataSection data;
  sed::TrainConfig train;
  EvalSection eval;
  json resolved() const;
};

json RunConfig::resolved() const {
  json d;
  if (data.has_synth) d["synth"] = sed::synth_config_to_json(data.synth);
  if (!data.manifest.empty()) d["manifest"] = data.manifest;
  if (!data.embeddings_dir.empty()) d["embeddings_dir"] = data.embeddings_dir;
  if (!data.annotations.empty()) d["annotations"] = data.annotations;
  if (!data.split.empty()) d["split"] = data.split;
  d["native_rate"] = data.native_rate;
  d["sample_rate"] = data.sample_rate;
  d["num_train"] = data.num_train;
  return json{{"seed", seed},
              {"out_dir", out_dir},
              {"model", sed::model_config_to_json(model)},
              {"data", d},
              {"train", sed::train_config_to_json(train)},
              {"eval", json{{"curves", eval.curves}}}};
}

RunConfig parse_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(sed::read_text_file(path));
  } catch (const json::exception& e) {
    throw sed::ConfigError(std::string("config parse error: ") + e.what());
  }
  sed::reject_unknown_keys(j, {"seed", "out_dir", "model", "data", "train", "eval"},
                           "run config");
  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("model")) cfg.model = sed::model_config_from_json(j.at("model"));
  if (j.contains("train")) cfg.train = sed::train_config_from_json(j.at("train"));
  if (j.contains("eval")) {
    sed::reject_unknown_keys(j.at("eval"), {"curves"}, "eval config");
    cfg.eval.curves = j.at("eval").value("curves", true);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    sed::reject_unknown_keys(d,
                             {"synth", "manifest", "embeddings_dir", "annotations", "split",
                              "native_rate", "sample_rate", "num_train"},
                             "data config");
    if (d.contains("synth")) {
      cfg.data.synth = sed::synth_config_from_json(d.at("synth"));
      cfg.data.has_synth = true;
    }
    cfg.data.manifest = d.value("manifest", std::string{});
    cfg.data.embeddings_dir = d.value("embeddings_dir", std::string{});
    cfg.data.annotations = d.value("annotations", std::string{});
    cfg.data.split = d.value("split", std::string{});
    cfg.data.native_rate = d.value("native_rate", 5.0);
    cfg.data.sample_rate = d.value("sample_rate", 5.0);
    cfg.data.num_train = d.value("num_train", std::size_t{0});
  }
  return cfg;
}

void write_resolved_config(const RunConfig& cfg, const fs::path& out_dir) {
  sed::write_text_file((out_dir / "resolved_config.json").string(),
                       cfg.resolved().dump(2) + "\n");
}

void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sed::DataError("cannot create output directory " + dir.string());
}

// ---------- synth ----------

int cmd_synth(const RunConfig& cfg, const fs::path& out_dir, bool force) {
  if (!cfg.data.has_synth)
    throw sed::ConfigError("synth: run config has no data.synth section");
  ensure_out_dir(out_dir);
  const fs::path manifest_path = out_dir / "manifest.json";
  if (fs::exists(manifest_path) && !force)
    throw sed::DataError("synth: " + manifest_path.string() +
                         " already exists (pass --force to overwrite)");

  const auto sequences = sed::synth_generate(cfg.data.synth);
  json mseqs = json::array();
  for (const auto& seq : sequences) {
    const std::string file = seq.embeddings.video_id + ".sede";
    sed::save_embeddings(seq.embeddings, (out_dir / file).string());
    json segs = json::array();
    for (const auto& s : seq.segments)
      segs.push_back({{"start", s.start}, {"end", s.end}, {"short", s.is_short}});
    mseqs.push_back({{"id", seq.embeddings.video_id},
                     {"file", file},
                     {"frames", seq.embeddings.frames},
                     {"width", seq.embeddings.width},
                     {"labels", seq.labels},
                     {"segments", segs}});
  }
  json manifest{{"synth", sed::synth_config_to_json(cfg.data.synth)},
                {"sample_rate", cfg.data.synth.sample_rate},
                {"sequences", mseqs}};
  sed::write_text_file(manifest_path.string(), manifest.dump(2) + "\n");
  write_resolved_config(cfg, out_dir);
  std::cout << "wrote " << sequences.size() << " sequences to " << out_dir.string() << "\n";
  return kExitOk;
}

// ---------- dataset loading ----------

struct LoadedDataset {
  sed::TrainDataset train;
  sed::TrainDataset test;
  double sample_rate = 5.0;
};

sed::TrainSequence make_sequence(const sed::EmbeddingSequence& emb,
                                 std::vector<int> labels) {
  if (labels.size() != emb.frames)
    throw sed::DataError("sequence " + emb.video_id + ": label count " +
                         std::to_string(labels.size()) + " does not match frames");
  sed::TrainSequence seq;
  seq.input = emb.to_tensor();
  seq.labels = std::move(labels);
  seq.id = emb.video_id;
  return seq;
}

LoadedDataset load_manifest_dataset(const fs::path& manifest_path, std::size_t num_train) {
  json manifest;
  try {
    manifest = json::parse(sed::read_text_file(manifest_path.string()));
  } catch (const json::exception& e) {
    throw sed::DataError("manifest parse error: " + std::string(e.what()));
  }
  LoadedDataset out;
  out.sample_rate = manifest.value("sample_rate", 5.0);
  const fs::path base = manifest_path.parent_path();
  const auto& seqs = manifest.at("sequences");
  std::size_t idx = 0;
  for (const auto& entry : seqs) {
    auto emb = sed::load_embeddings((base / entry.at("file").get<std::string>()).string());
    emb.video_id = entry.at("id").get<std::string>();
    emb.sample_rate = out.sample_rate;
    emb.native_rate = out.sample_rate;
    auto seq = make_sequence(emb, entry.at("labels").get<std::vector<int>>());
    if (idx < num_train)
      out.train.push_back(std::move(seq));
    else
      out.test.push_back(std::move(seq));
    ++idx;
  }
  return out;
}

LoadedDataset load_real_dataset(const DataSection& d) {
  if (d.embeddings_dir.empty() || d.annotations.empty() || d.split.empty())
    throw sed::ConfigError(
        "data: need either a manifest or embeddings_dir + annotations + split");
  json split;
  try {
    split = json::parse(sed::read_text_file(d.split));
  } catch (const json::exception& e) {
    throw sed::DataError("split parse error: " + std::string(e.what()));
  }
  const auto tracks = sed::load_annotations(d.annotations);
  auto track_for = [&](const std::string& id) -> sed::AnnotationTrack {
    for (const auto& t : tracks)
      if (t.video_id == id) return t;
    return sed::AnnotationTrack{id, {}};
  };
  LoadedDataset out;
  out.sample_rate = d.sample_rate;
  auto load_side = [&](const char* key, sed::TrainDataset& side) {
    for (const auto& idj : split.at(key)) {
      const auto id = idj.get<std::string>();
      const fs::path file = fs::path(d.embeddings_dir) / (id + ".sede");
      if (!fs::exists(file))
        throw sed::DataError("missing embedding file " + file.string());
      auto emb = sed::load_embeddings(file.string());
      emb.video_id = id;
      emb.native_rate = d.native_rate;
      emb.sample_rate = d.sample_rate;
      auto labels =
          sed::derive_frame_labels(track_for(id), d.native_rate, d.sample_rate, emb.frames);
      side.push_back(make_sequence(emb, std::move(labels)));
    }
  };
  load_side("train", out.train);
  load_side("test", out.test);
  return out;
}

LoadedDataset load_dataset(const DataSection& d) {
  if (!d.manifest.empty()) {
    if (!fs::exists(d.manifest))
      throw sed::DataError("manifest not found: " + d.manifest);
    return load_manifest_dataset(d.manifest, d.num_train);
  }
  return load_real_dataset(d);
}

// ---------- train ----------

int cmd_train(const RunConfig& cfg, const fs::path& out_dir) {
  ensure_out_dir(out_dir);
  LoadedDataset ds = load_dataset(cfg.data);
  if (ds.train.empty()) throw sed::DataError("train: dataset has no training sequences");

  sed::Model model(cfg.model, cfg.seed);
  sed::AdamW opt;
  opt.init(model.parameters());

  std::ofstream log_file(out_dir / "epoch_log.jsonl", std::ios::trunc);
  if (!log_file) throw sed::DataError("cannot write epoch log in " + out_dir.string());

  double best_auc = -1.0;
  auto on_epoch = [&](const sed::EpochLog& log, sed::Model& m, const sed::AdamW& o) {
    json line{{"epoch", log.epoch}, {"train_loss", log.train_loss}};
    line["val_auc"] = log.val_auc ? json(*log.val_auc) : json(nullptr);
    line["val_ap"] = log.val_ap ? json(*log.val_ap) : json(nullptr);
    log_file << line.dump() << "\n";
    log_file.flush();
    if (log.val_auc && *log.val_auc > best_auc) {
      best_auc = *log.val_auc;
      sed::save_checkpoint(
          sed::make_checkpoint(m, o, log.epoch, cfg.seed, line.dump()),
          (out_dir / "checkpoint_best.sedc").string());
    }
    if (cfg.train.checkpoint_every > 0 && (log.epoch + 1) % cfg.train.checkpoint_every == 0)
      sed::save_checkpoint(
          sed::make_checkpoint(m, o, log.epoch, cfg.seed, line.dump()),
          (out_dir / ("checkpoint_epoch" + std::to_string(log.epoch) + ".sedc")).string());
  };

  sed::TrainResult result = sed::train_run(model, opt, ds.train, ds.test, cfg.train, on_epoch);
  sed::save_checkpoint(
      sed::make_checkpoint(model, opt, cfg.train.max_epochs - 1, cfg.seed),
      (out_dir / "checkpoint_final.sedc").string());
  write_resolved_config(cfg, out_dir);
  std::cout << "trained " << cfg.train.max_epochs << " epochs; final loss "
            << result.log.back().train_loss;
  if (result.log.back().val_auc) std::cout << ", val AUC " << *result.log.back().val_auc;
  std::cout << "\n";
  return kExitOk;
}

// ---------- eval ----------

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
             const fs::path& out_dir, std::size_t workers) {
  if (checkpoint_path.empty()) throw sed::ConfigError("eval: --checkpoint is required");
  if (!fs::exists(checkpoint_path))
    throw sed::DataError("eval: checkpoint not found: " + checkpoint_path);
  ensure_out_dir(out_dir);
  LoadedDataset ds = load_dataset(cfg.data);
  const sed::TrainDataset& eval_set = ds.test.empty() ? ds.train : ds.test;
  if (eval_set.empty()) throw sed::DataError("eval: dataset is empty");

  const sed::Checkpoint ck = sed::load_checkpoint(checkpoint_path);
  sed::Model model(ck.model_config, ck.seed);
  sed::AdamW opt;
  sed::restore_checkpoint(ck, model, opt);

  std::vector<std::vector<double>> probs(eval_set.size());
  std::vector<std::vector<int>> labels(eval_set.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < eval_set.size(); i = next.fetch_add(1)) {
      sed::Tensor p = model.forward(eval_set[i].input);
      probs[i].assign(p->v.begin(), p->v.end());
      labels[i] = eval_set[i].labels;
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  sed::MetricsReport report = sed::stratified_eval(labels, probs, ds.sample_rate);
  sed::write_text_file((out_dir / "metrics.json").string(), report.to_json());
  if (cfg.eval.curves) {
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
      std::ostringstream csv;
      csv << "frame_index,probability,label\n";
      csv.precision(9);
      for (std::size_t t = 0; t < probs[i].size(); ++t)
        csv << t << ',' << probs[i][t] << ',' << labels[i][t] << "\n";
      sed::write_text_file((out_dir / ("curve_" + eval_set[i].id + ".csv")).string(),
                           csv.str());
    }
  }
  write_resolved_config(cfg, out_dir);
  std::cout << report.to_json();
  return kExitOk;
}

// ---------- complexity / sweep ----------

int cmd_complexity(const RunConfig& cfg, const fs::path& out_dir, std::size_t ref_length) {
  const sed::ComplexityReport rep = sed::analyze_complexity(cfg.model, ref_length);
  std::cout << rep.to_text();
  if (!out_dir.empty()) {
    ensure_out_dir(out_dir);
    sed::write_text_file((out_dir / "complexity.json").string(), rep.to_json());
    write_resolved_config(cfg, out_dir);
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& out_dir, std::size_t ref_length) {
  std::vector<std::string> names;
  std::vector<sed::ModelConfig> configs;
  for (std::size_t blocks = 1; blocks <= 5; ++blocks) {
    sed::ModelConfig c = cfg.model;
    c.num_blocks = blocks;
    names.push_back("blocks=" + std::to_string(blocks));
    configs.push_back(c);
  }
  for (std::size_t g : {16, 32, 64, 128}) {
    sed::ModelConfig c = cfg.model;
    c.g = g;
    names.push_back("G=" + std::to_string(g));
    configs.push_back(c);
  }
  const std::vector<std::size_t> all_dil{2, 4, 8, 16, 32};
  for (std::size_t depth = 0; depth <= 5; ++depth) {
    sed::ModelConfig c = cfg.model;
    c.dilations.assign(all_dil.begin(), all_dil.begin() + depth);
    names.push_back("fctf_depth=" + std::to_string(depth));
    configs.push_back(c);
  }
  const auto reports = sed::sweep_report(configs, ref_length);

  bool monotone = true;
  auto check_increasing = [&](std::size_t first, std::size_t count) {
    for (std::size_t i = first + 1; i < first + count; ++i)
      if (reports[i].total_params <= reports[i - 1].total_params) monotone = false;
  };
  check_increasing(0, 5);   // block count
  check_increasing(5, 4);   // compression factor
  check_increasing(9, 6);   // fctf depth
  for (std::size_t i = 6; i < 9; ++i)  // flops grow with G as well
    if (reports[i].total_flops <= reports[i - 1].total_flops) monotone = false;

  std::cout << sed::sweep_table(names, reports);
  if (!out_dir.empty()) {
    ensure_out_dir(out_dir);
    std::ostringstream js;
    js << "[\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
      js << "{\"config\": \"" << names[i] << "\", \"report\": " << reports[i].to_json() << "}";
      js << (i + 1 < reports.size() ? ",\n" : "\n");
    }
    js << "]\n";
    sed::write_text_file((out_dir / "sweep.json").string(), js.str());
    write_resolved_config(cfg, out_dir);
  }
  if (!monotone) {
    std::cerr << "sweep: monotonicity violation detected\n";
    return kExitGeneric;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frame-level error detection toolkit"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_dir_flag;
  std::uint64_t seed_flag = 0;
  bool seed_set = false, force = false;
  std::size_t workers = 1, ref_length = 4096;

  app.add_option("--config", config_path, "Run config JSON")->required();
  app.add_option("--checkpoint", checkpoint_path, "Checkpoint file (.sedc)");
  app.add_option("--out", out_dir_flag, "Output directory (overrides config out_dir)");
  app.add_option("--seed", seed_flag, "Seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--workers", workers, "Parallel evaluation workers (default 1)");
  app.add_option("--ref-length", ref_length, "Reference L for FLOP reports");
  app.add_flag("--force", force, "Allow overwriting existing outputs");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* train = app.add_subcommand("train", "Train a model");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  auto* complexity = app.add_subcommand("complexity", "Parameter/FLOP report");
  auto* sweep = app.add_subcommand("sweep", "Ablation-axis complexity sweep");
  for (auto* sub : {synth, train, eval, complexity, sweep}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = parse_run_config(config_path);
    if (seed_set) {
      cfg.seed = seed_flag;
      cfg.train.seed = seed_flag;
    }
    if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
    const fs::path out_dir = cfg.out_dir;
    if (cfg.out_dir.empty() &&
        !(complexity->parsed() || sweep->parsed()))
      throw sed::ConfigError("an output directory is required (--out or out_dir)");

    if (synth->parsed()) return cmd_synth(cfg, out_dir, force);
    if (train->parsed()) return cmd_train(cfg, out_dir);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint_path, out_dir, workers);
    if (complexity->parsed()) return cmd_complexity(cfg, out_dir, ref_length);
    if (sweep->parsed()) return cmd_sweep(cfg, out_dir, ref_length);
    return kExitGeneric;
  } catch (const sed::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const sed::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const sed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeneric;
  }
}
