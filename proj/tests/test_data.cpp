#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "sed/data.hpp"

using namespace sed;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

EmbeddingSequence sample_sequence(std::size_t frames, std::size_t width, unsigned seed) {
  EmbeddingSequence seq;
  seq.video_id = "sample";
  seq.frames = frames;
  seq.width = width;
  seq.data.resize(frames * width);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> uni(-2.0f, 2.0f);
  for (auto& v : seq.data) v = uni(rng);
  return seq;
}

void write_csv(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  out << body;
}

}  // namespace

TEST_CASE("embedding files round-trip bit for bit") {
  const auto path = temp_file("roundtrip.sede");
  EmbeddingSequence seq = sample_sequence(37, 5, 1);
  save_embeddings(seq, path.string());
  EmbeddingSequence back = load_embeddings(path.string());
  CHECK(back.frames == 37);
  CHECK(back.width == 5);
  CHECK(back.data == seq.data);
  CHECK(back.video_id == "roundtrip");  // id defaults to the file stem
  fs::remove(path);
}

TEST_CASE("embedding loader rejects corruption and reports what is missing") {
  const auto path = temp_file("corrupt.sede");
  EmbeddingSequence seq = sample_sequence(10, 4, 2);
  save_embeddings(seq, path.string());

  SUBCASE("payload byte flip fails the checksum") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(24 + 7);
    char b;
    f.seekg(24 + 7);
    f.read(&b, 1);
    b = static_cast<char>(b ^ 0x40);
    f.seekp(24 + 7);
    f.write(&b, 1);
    f.close();
    CHECK_THROWS_WITH_AS(load_embeddings(path.string()),
                         doctest::Contains("checksum"), DataError);
  }
  SUBCASE("truncation names the missing piece") {
    fs::resize_file(path, 24 + 11);
    try {
      load_embeddings(path.string());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("payload") != std::string::npos);
    }
  }
  SUBCASE("bad magic is rejected") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
    f.close();
    CHECK_THROWS_WITH_AS(load_embeddings(path.string()),
                         doctest::Contains("magic"), DataError);
  }
  fs::remove(path);
}

TEST_CASE("empty sequences are rejected on both ends") {
  EmbeddingSequence empty;
  empty.video_id = "empty";
  CHECK_THROWS_AS(save_embeddings(empty, temp_file("empty.sede").string()), DataError);
  CHECK_THROWS_AS(load_embeddings("/nonexistent/never.sede"), DataError);
}

TEST_CASE("annotation csv parsing") {
  const auto path = temp_file("ann.csv");
  write_csv(path,
            "video_id,error_type,start_frame,end_frame\n"
            "vid_a,E3,24,36\n"
            "vid_a,E17,100,120\n"
            "vid_b,E1,0,5\n"
            "vid_a,E24,200,210\n");
  auto tracks = load_annotations(path.string());
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].video_id == "vid_a");
  REQUIRE(tracks[0].records.size() == 3);  // rows regroup even when interleaved
  CHECK(tracks[0].records[0].error_type == "E3");
  CHECK(tracks[0].records[2].start_frame == 200);
  CHECK(tracks[1].records[0].end_frame == 5);

  write_csv(path, "video_id,error_type,start_frame,end_frame\nvid,E25,1,2\n");
  CHECK_THROWS_AS(load_annotations(path.string()), DataError);
  write_csv(path, "video_id,error_type,start_frame,end_frame\nvid,E3,9,2\n");
  CHECK_THROWS_AS(load_annotations(path.string()), DataError);
  write_csv(path, "wrong,header\n");
  CHECK_THROWS_AS(load_annotations(path.string()), DataError);
  write_csv(path, "");
  CHECK_THROWS_AS(load_annotations(path.string()), DataError);
  fs::remove(path);
}

TEST_CASE("label derivation maps native frame spans onto the sampled grid") {
  AnnotationTrack track{"vid", {{"E3", 24, 36}}};
  // stride 12: sampled frame i sits at native frame 12*i
  auto labels = derive_frame_labels(track, 60.0, 5.0, 5);
  CHECK(labels == std::vector<int>{0, 0, 1, 1, 0});

  SUBCASE("empty track yields all zeros") {
    AnnotationTrack none{"vid", {}};
    auto zeros = derive_frame_labels(none, 60.0, 5.0, 4);
    CHECK(zeros == std::vector<int>{0, 0, 0, 0});
  }
  SUBCASE("overlapping records take the union") {
    AnnotationTrack two{"vid", {{"E1", 0, 30}, {"E2", 24, 60}}};
    auto lab = derive_frame_labels(two, 60.0, 5.0, 7);
    CHECK(lab == std::vector<int>{1, 1, 1, 1, 1, 1, 0});
    // order independence
    AnnotationTrack swapped{"vid", {{"E2", 24, 60}, {"E1", 0, 30}}};
    CHECK(derive_frame_labels(swapped, 60.0, 5.0, 7) == lab);
  }
  SUBCASE("stride one is the identity mapping") {
    AnnotationTrack t{"vid", {{"E1", 2, 3}}};
    CHECK(derive_frame_labels(t, 5.0, 5.0, 6) == std::vector<int>{0, 0, 1, 1, 0, 0});
  }
  SUBCASE("non-integral stride is a configuration error") {
    CHECK_THROWS_AS(derive_frame_labels(track, 60.0, 7.0, 5), ConfigError);
    CHECK_THROWS_AS(derive_frame_labels(track, 5.0, 0.0, 5), ConfigError);
  }
}

TEST_CASE("short and long duration classes split at three seconds") {
  CHECK(short_long_boundary_frames(5.0) == 15);
  CHECK(short_long_boundary_frames(1.0) == 3);
}

TEST_CASE("synthetic generation is seed-deterministic") {
  SynthConfig cfg;
  cfg.num_sequences = 4;
  cfg.min_length = 200;
  cfg.max_length = 260;
  cfg.width = 16;
  auto a = synth_generate(cfg);
  auto b = synth_generate(cfg);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i].embeddings.data == b[i].embeddings.data);
    CHECK(a[i].labels == b[i].labels);
  }
  cfg.seed = 2;
  auto c = synth_generate(cfg);
  CHECK(a[0].embeddings.data != c[0].embeddings.data);
}

TEST_CASE("planted segments agree with the labels and duration classes") {
  SynthConfig cfg;
  cfg.num_sequences = 8;
  cfg.width = 8;
  const std::size_t boundary = short_long_boundary_frames(cfg.sample_rate);
  auto seqs = synth_generate(cfg);
  std::size_t shorts = 0, longs = 0;
  for (const auto& seq : seqs) {
    std::vector<int> expect(seq.embeddings.frames, 0);
    std::size_t prev_end = 0;
    bool first = true;
    for (const auto& seg : seq.segments) {
      CHECK(seg.start <= seg.end);
      CHECK(seg.end < seq.embeddings.frames);
      if (!first) CHECK(seg.start > prev_end);  // non-overlapping, ordered
      first = false;
      prev_end = seg.end;
      const std::size_t dur = seg.end - seg.start + 1;
      if (seg.is_short) {
        CHECK(dur < boundary);
        ++shorts;
      } else {
        CHECK(dur >= boundary);
        ++longs;
      }
      for (std::size_t t = seg.start; t <= seg.end; ++t) expect[t] = 1;
    }
    CHECK(seq.labels == expect);
  }
  // with a 0.5 short fraction both classes should be represented
  CHECK(shorts > 0);
  CHECK(longs > 0);
}

TEST_CASE("planted segments lift the mean along a fixed direction") {
  SynthConfig cfg;
  cfg.num_sequences = 6;
  cfg.width = 32;
  cfg.snr = 2.0;
  auto seqs = synth_generate(cfg);
  // compare the norm of the mean embedding inside vs outside error spans
  std::vector<double> mean_err(cfg.width, 0.0), mean_ok(cfg.width, 0.0);
  std::size_t n_err = 0, n_ok = 0;
  for (const auto& seq : seqs)
    for (std::size_t t = 0; t < seq.embeddings.frames; ++t) {
      auto& acc = seq.labels[t] ? mean_err : mean_ok;
      (seq.labels[t] ? n_err : n_ok)++;
      for (std::size_t c = 0; c < cfg.width; ++c)
        acc[c] += seq.embeddings.data[t * cfg.width + c];
    }
  REQUIRE(n_err > 0);
  REQUIRE(n_ok > 0);
  double norm_err = 0.0, norm_ok = 0.0;
  for (std::size_t c = 0; c < cfg.width; ++c) {
    norm_err += std::pow(mean_err[c] / n_err, 2);
    norm_ok += std::pow(mean_ok[c] / n_ok, 2);
  }
  CHECK(std::sqrt(norm_err) > 2.0 * std::sqrt(norm_ok));
}

TEST_CASE("synthetic config validation") {
  SynthConfig cfg;
  cfg.num_sequences = 0;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.min_length = 100;
  cfg.max_length = 50;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.short_fraction = 1.5;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.snr = -1.0;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
}
