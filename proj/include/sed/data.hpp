#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sed/tensor.hpp"

namespace sed {

// Per-video matrix of L frame embeddings of width D, stored as f32.
struct EmbeddingSequence {
  std::string video_id;
  double native_rate = 5.0;
  double sample_rate = 5.0;
  std::size_t frames = 0;
  std::size_t width = 0;
  std::vector<float> data;  // row-major L x D

  Tensor to_tensor() const;
};

// Binary "SEDE" container: magic, version u32=1, L u64, D u32, dtype u8 (0=f32),
// 3 reserved bytes, payload row-major, CRC32 of payload. Little-endian.
void save_embeddings(const EmbeddingSequence& seq, const std::string& path);
EmbeddingSequence load_embeddings(const std::string& path);

struct AnnotationRecord {
  std::string error_type;  // E1..E24
  std::size_t start_frame = 0;  // native rate, inclusive
  std::size_t end_frame = 0;    // native rate, inclusive
};

struct AnnotationTrack {
  std::string video_id;
  std::vector<AnnotationRecord> records;
};

// CSV with header video_id,error_type,start_frame,end_frame; rows grouped per video.
std::vector<AnnotationTrack> load_annotations(const std::string& path);

// Sampled frame i maps to native frame i*stride (stride = native/sample, must be
// integral); label 1 iff that native frame lies in any record's [start, end].
std::vector<int> derive_frame_labels(const AnnotationTrack& track, double native_rate,
                                     double sample_rate, std::size_t sampled_frames);

struct LabeledSequence {
  EmbeddingSequence embeddings;
  std::vector<int> labels;  // one per sampled frame
};

struct PlantedSegment {
  std::size_t start = 0;  // sampled frame, inclusive
  std::size_t end = 0;    // inclusive
  bool is_short = false;  // duration < 15 frames at 5 Hz (< 3 s)
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t num_sequences = 20;
  std::size_t min_length = 500;
  std::size_t max_length = 700;
  std::size_t width = 64;
  double sample_rate = 5.0;
  std::size_t segments_per_sequence = 16;  // cap on planted segments
  double short_fraction = 0.5;  // probability a planted segment is short
  double snr = 2.0;             // signature amplitude relative to background std

  void validate() const;
};

struct SynthSequence {
  EmbeddingSequence embeddings;
  std::vector<int> labels;
  std::vector<PlantedSegment> segments;
};

// Smooth AR(1) background per channel; a dataset-fixed direction added inside
// planted segments (amplitude by duration class) plus a fast oscillation along
// a second direction inside short segments only. Seed-deterministic.
std::vector<SynthSequence> synth_generate(const SynthConfig& cfg);

constexpr std::size_t kShortErrorSeconds = 3;

std::size_t short_long_boundary_frames(double sample_rate);  // 3 s * rate

}  // namespace sed
