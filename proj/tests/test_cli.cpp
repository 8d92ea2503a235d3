#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

fs::path scratch_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "sed_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out_path = scratch_root() / ("stdout_" + std::to_string(counter) + ".txt");
  const fs::path err_path = scratch_root() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(SEDMAMBA_BIN) + " " + args + " >" + out_path.string() +
                          " 2>" + err_path.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

json base_config() {
  return json{
      {"seed", 5},
      {"model",
       {{"d", 16}, {"num_blocks", 2}, {"g", 4}, {"n_state", 2}}},
      {"data",
       {{"synth",
         {{"seed", 11},
          {"num_sequences", 4},
          {"min_length", 150},
          {"max_length", 200},
          {"width", 16},
          {"segments_per_sequence", 2},
          {"snr", 3.0}}}}},
      {"train", {{"learning_rate", 0.01}, {"max_epochs", 2}}},
  };
}

fs::path write_config(const std::string& name, const json& j) {
  const fs::path path = scratch_root() / name;
  std::ofstream(path) << j.dump(2);
  return path;
}

std::string slurp_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synthetic datasets are byte-identical across runs") {
  const auto cfg = write_config("synth.json", base_config());
  const fs::path dir_a = scratch_root() / "synth_a";
  const fs::path dir_b = scratch_root() / "synth_b";
  RunResult a = run_cli("synth --config " + cfg.string() + " --out " + dir_a.string());
  RunResult b = run_cli("synth --config " + cfg.string() + " --out " + dir_b.string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp_file(dir_a / "manifest.json") == slurp_file(dir_b / "manifest.json"));
  CHECK(slurp_file(dir_a / "synth_0.sede") == slurp_file(dir_b / "synth_0.sede"));
  CHECK(fs::exists(dir_a / "resolved_config.json"));

  // a second run into the same directory must refuse to clobber
  RunResult again = run_cli("synth --config " + cfg.string() + " --out " + dir_a.string());
  CHECK(again.exit_code == 3);
  CHECK(again.err.find("--force") != std::string::npos);
  RunResult forced =
      run_cli("synth --config " + cfg.string() + " --out " + dir_a.string() + " --force");
  CHECK(forced.exit_code == 0);
}

TEST_CASE("bad configuration fails before any output is written") {
  json cfg = base_config();
  cfg["data"]["synth"]["snr"] = -2.0;
  const auto path = write_config("bad_snr.json", cfg);
  const fs::path dir = scratch_root() / "bad_snr_out";
  RunResult r = run_cli("synth --config " + path.string() + " --out " + dir.string());
  CHECK(r.exit_code == 2);
  CHECK(!fs::exists(dir / "manifest.json"));

  const auto garbled = scratch_root() / "garbled.json";
  std::ofstream(garbled) << "{not json";
  CHECK(run_cli("synth --config " + garbled.string() + " --out " + dir.string()).exit_code ==
        2);

  json unknown = base_config();
  unknown["surprise"] = 1;
  const auto upath = write_config("unknown_key.json", unknown);
  RunResult u = run_cli("synth --config " + upath.string() + " --out " + dir.string());
  CHECK(u.exit_code == 2);
  CHECK(u.err.find("surprise") != std::string::npos);
}

TEST_CASE("missing data paths are reported by name with the data exit code") {
  json cfg = base_config();
  cfg["data"].erase("synth");
  cfg["data"]["manifest"] = "/nonexistent/manifest.json";
  const auto path = write_config("missing_manifest.json", cfg);
  RunResult r = run_cli("train --config " + path.string() + " --out " +
                        (scratch_root() / "mm_out").string());
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("/nonexistent/manifest.json") != std::string::npos);
}

TEST_CASE("train then eval round trip over a synthetic manifest") {
  const fs::path data_dir = scratch_root() / "data";
  const fs::path train_dir = scratch_root() / "train_out";
  const fs::path eval_dir = scratch_root() / "eval_out";
  json cfg = base_config();
  const auto synth_cfg = write_config("pipeline_synth.json", cfg);
  REQUIRE(run_cli("synth --config " + synth_cfg.string() + " --out " + data_dir.string())
              .exit_code == 0);

  cfg["data"].erase("synth");
  cfg["data"]["manifest"] = (data_dir / "manifest.json").string();
  cfg["data"]["num_train"] = 3;
  const auto run_cfg = write_config("pipeline_run.json", cfg);

  RunResult tr =
      run_cli("train --config " + run_cfg.string() + " --out " + train_dir.string());
  REQUIRE(tr.exit_code == 0);
  CHECK(fs::exists(train_dir / "checkpoint_final.sedc"));
  CHECK(fs::exists(train_dir / "checkpoint_best.sedc"));

  // the epoch log is one JSON object per line with the expected fields
  std::ifstream log(train_dir / "epoch_log.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const json entry = json::parse(line);
    CHECK(entry.at("epoch").get<std::size_t>() == lines);
    CHECK(entry.contains("train_loss"));
    CHECK(entry.contains("val_auc"));
    ++lines;
  }
  CHECK(lines == 2);

  RunResult ev = run_cli("eval --config " + run_cfg.string() + " --checkpoint " +
                         (train_dir / "checkpoint_final.sedc").string() + " --out " +
                         eval_dir.string() + " --workers 2");
  REQUIRE(ev.exit_code == 0);
  const json metrics = json::parse(slurp_file(eval_dir / "metrics.json"));
  for (const char* key : {"frame_auc", "frame_ap", "instance_auc", "instance_ap",
                          "short_auc", "short_ap", "long_auc", "long_ap", "frame_count",
                          "error_frames", "instance_count"})
    CHECK(metrics.contains(key));
  CHECK(metrics.at("frame_count").get<std::size_t>() > 0);
  // per-video probability curves accompany the report
  bool any_curve = false;
  for (const auto& entry : fs::directory_iterator(eval_dir))
    if (entry.path().filename().string().rfind("curve_", 0) == 0) any_curve = true;
  CHECK(any_curve);

  // eval without a checkpoint is a usage error, with a corrupt one a data error
  CHECK(run_cli("eval --config " + run_cfg.string() + " --out " + eval_dir.string())
            .exit_code == 2);
  const fs::path broken = scratch_root() / "broken.sedc";
  std::ofstream(broken) << "SEDCgarbage";
  CHECK(run_cli("eval --config " + run_cfg.string() + " --checkpoint " + broken.string() +
                " --out " + eval_dir.string())
            .exit_code == 3);
}

TEST_CASE("complexity report and sweep run standalone") {
  json cfg;
  cfg["model"] = json::object();  // full-size defaults
  const auto path = write_config("complexity.json", cfg);
  RunResult r = run_cli("complexity --config " + path.string() + " --ref-length 1000");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("total") != std::string::npos);

  const fs::path dir = scratch_root() / "sweep_out";
  RunResult s =
      run_cli("sweep --config " + path.string() + " --out " + dir.string());
  REQUIRE(s.exit_code == 0);
  CHECK(fs::exists(dir / "sweep.json"));
  CHECK(s.out.find("blocks=3") != std::string::npos);
  CHECK(s.out.find("G=64") != std::string::npos);
  CHECK(s.out.find("fctf_depth=3") != std::string::npos);
}
