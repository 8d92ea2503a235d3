#include "sed/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "sed/io.hpp"

namespace sed {

Tensor EmbeddingSequence::to_tensor() const {
  Tensor t = make_tensor({frames, width});
  for (std::size_t i = 0; i < data.size(); ++i) t->v[i] = static_cast<double>(data[i]);
  return t;
}

static const char kEmbeddingMagic[4] = {'S', 'E', 'D', 'E'};

void save_embeddings(const EmbeddingSequence& seq, const std::string& path) {
  if (seq.frames == 0 || seq.width == 0)
    throw DataError("save_embeddings: empty sequence " + seq.video_id);
  if (seq.data.size() != seq.frames * seq.width)
    throw DataError("save_embeddings: element count does not match header");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("save_embeddings: cannot write " + path);
  out.write(kEmbeddingMagic, 4);
  write_u32(out, 1);
  write_u64(out, seq.frames);
  write_u32(out, static_cast<std::uint32_t>(seq.width));
  const char dtype_and_reserved[4] = {0, 0, 0, 0};  // dtype 0 = f32
  out.write(dtype_and_reserved, 4);
  const auto* payload = reinterpret_cast<const unsigned char*>(seq.data.data());
  const std::size_t payload_len = seq.data.size() * sizeof(float);
  out.write(reinterpret_cast<const char*>(payload), static_cast<std::streamsize>(payload_len));
  write_u32(out, crc32(payload, payload_len));
  if (!out) throw DataError("save_embeddings: write failed for " + path);
}

EmbeddingSequence load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_embeddings: cannot open " + path);
  char magic[4];
  read_exact(in, magic, 4, "embedding header");
  if (std::memcmp(magic, kEmbeddingMagic, 4) != 0)
    throw DataError("load_embeddings: bad magic in " + path);
  const std::uint32_t version = read_u32(in, "embedding version");
  if (version != 1) throw DataError("load_embeddings: unsupported version");
  EmbeddingSequence seq;
  seq.frames = read_u64(in, "embedding frame count");
  seq.width = read_u32(in, "embedding width");
  char dtype_and_reserved[4];
  read_exact(in, dtype_and_reserved, 4, "embedding dtype");
  if (dtype_and_reserved[0] != 0) throw DataError("load_embeddings: unsupported dtype");
  if (seq.frames == 0 || seq.width == 0)
    throw DataError("load_embeddings: zero-size sequence rejected");
  seq.data.resize(seq.frames * seq.width);
  const std::size_t payload_len = seq.data.size() * sizeof(float);
  read_exact(in, reinterpret_cast<char*>(seq.data.data()), payload_len, "embedding payload");
  const std::uint32_t stored = read_u32(in, "embedding checksum");
  const std::uint32_t computed =
      crc32(reinterpret_cast<const unsigned char*>(seq.data.data()), payload_len);
  if (stored != computed) throw DataError("load_embeddings: checksum mismatch in " + path);
  for (float x : seq.data)
    if (!std::isfinite(x)) throw DataError("load_embeddings: non-finite value in " + path);
  // video id defaults to the file stem; callers may override from a manifest
  const auto slash = path.find_last_of("/\\");
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  seq.video_id = stem;
  return seq;
}

static bool valid_error_type(const std::string& s) {
  if (s.size() < 2 || s.size() > 3 || s[0] != 'E') return false;
  int code = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    code = code * 10 + (s[i] - '0');
  }
  return code >= 1 && code <= 24;
}

std::vector<AnnotationTrack> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_annotations: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("load_annotations: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "video_id,error_type,start_frame,end_frame")
    throw DataError("load_annotations: unexpected header '" + line + "'");
  std::vector<AnnotationTrack> tracks;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string vid, etype, start_s, end_s;
    if (!std::getline(ss, vid, ',') || !std::getline(ss, etype, ',') ||
        !std::getline(ss, start_s, ',') || !std::getline(ss, end_s))
      throw DataError("load_annotations: malformed row at line " + std::to_string(lineno));
    if (!valid_error_type(etype))
      throw DataError("load_annotations: unknown error type '" + etype + "' at line " +
                      std::to_string(lineno));
    AnnotationRecord rec;
    rec.error_type = etype;
    try {
      rec.start_frame = std::stoull(start_s);
      rec.end_frame = std::stoull(end_s);
    } catch (const std::exception&) {
      throw DataError("load_annotations: bad frame index at line " + std::to_string(lineno));
    }
    if (rec.start_frame > rec.end_frame)
      throw DataError("load_annotations: start > end at line " + std::to_string(lineno));
    if (tracks.empty() || tracks.back().video_id != vid) {
      bool seen = false;
      for (auto& t : tracks)
        if (t.video_id == vid) {
          t.records.push_back(rec);
          seen = true;
          break;
        }
      if (!seen) tracks.push_back({vid, {rec}});
    } else {
      tracks.back().records.push_back(rec);
    }
  }
  return tracks;
}

std::vector<int> derive_frame_labels(const AnnotationTrack& track, double native_rate,
                                     double sample_rate, std::size_t sampled_frames) {
  if (native_rate <= 0 || sample_rate <= 0)
    throw ConfigError("derive_frame_labels: rates must be positive");
  const double ratio = native_rate / sample_rate;
  const auto stride = static_cast<std::size_t>(std::llround(ratio));
  if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9)
    throw ConfigError("derive_frame_labels: native rate must be an integer multiple of "
                      "the sample rate");
  std::vector<int> labels(sampled_frames, 0);
  for (const auto& rec : track.records) {
    for (std::size_t i = 0; i < sampled_frames; ++i) {
      const std::size_t native = i * stride;
      if (native >= rec.start_frame && native <= rec.end_frame) labels[i] = 1;
    }
  }
  return labels;
}

std::size_t short_long_boundary_frames(double sample_rate) {
  return static_cast<std::size_t>(std::llround(kShortErrorSeconds * sample_rate));
}

void SynthConfig::validate() const {
  if (num_sequences == 0) throw ConfigError("synth: need at least one sequence");
  if (min_length == 0 || min_length > max_length)
    throw ConfigError("synth: invalid length range");
  if (width == 0) throw ConfigError("synth: width must be >= 1");
  if (sample_rate <= 0) throw ConfigError("synth: sample rate must be positive");
  if (short_fraction < 0.0 || short_fraction > 1.0)
    throw ConfigError("synth: short fraction must lie in [0,1]");
  if (snr < 0.0) throw ConfigError("synth: signal-to-noise must be non-negative");
}

static std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::vector<SynthSequence> synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t boundary = short_long_boundary_frames(cfg.sample_rate);

  // Dataset-fixed signature directions shared by every sequence.
  std::mt19937_64 dir_rng(splitmix64(cfg.seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> dir_main(cfg.width), dir_osc(cfg.width);
  double norm_main = 0.0, norm_osc = 0.0;
  for (std::size_t i = 0; i < cfg.width; ++i) {
    dir_main[i] = gauss(dir_rng);
    dir_osc[i] = gauss(dir_rng);
    norm_main += dir_main[i] * dir_main[i];
    norm_osc += dir_osc[i] * dir_osc[i];
  }
  norm_main = std::sqrt(norm_main);
  norm_osc = std::sqrt(norm_osc);
  for (std::size_t i = 0; i < cfg.width; ++i) {
    dir_main[i] /= norm_main;
    dir_osc[i] /= norm_osc;
  }

  const double rho = 0.95, noise_std = 0.3;
  const double background_std = noise_std / std::sqrt(1.0 - rho * rho);
  const double amp = cfg.snr * background_std;

  std::vector<SynthSequence> out;
  out.reserve(cfg.num_sequences);
  for (std::size_t s = 0; s < cfg.num_sequences; ++s) {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ (0xA5A5ull + s * 0x10001ull)));
    std::uniform_int_distribution<std::size_t> len_dist(cfg.min_length, cfg.max_length);
    const std::size_t length = len_dist(rng);

    SynthSequence seq;
    seq.embeddings.video_id = "synth_" + std::to_string(s);
    seq.embeddings.native_rate = cfg.sample_rate;
    seq.embeddings.sample_rate = cfg.sample_rate;
    seq.embeddings.frames = length;
    seq.embeddings.width = cfg.width;
    seq.embeddings.data.assign(length * cfg.width, 0.0f);
    seq.labels.assign(length, 0);

    std::vector<double> row(cfg.width);
    std::vector<std::vector<double>> base(length, std::vector<double>(cfg.width));
    for (std::size_t c = 0; c < cfg.width; ++c) row[c] = gauss(rng) * background_std;
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t c = 0; c < cfg.width; ++c) {
        row[c] = rho * row[c] + gauss(rng) * noise_std;
        base[t][c] = row[c];
      }
    }

    // Plant non-overlapping error segments by a gap/segment walk that enters
    // from before frame zero with a random phase and clips at both sequence
    // ends. This keeps the per-frame error probability flat in time, so frame
    // position carries no label information a detector could latch onto.
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> short_dur(3, boundary > 4 ? boundary - 1 : 4);
    std::uniform_int_distribution<std::size_t> long_dur(boundary, boundary * 4);
    std::uniform_int_distribution<std::size_t> gap_dist(10, 60);
    std::uniform_int_distribution<std::size_t> phase_dist(0, 2 * (60 + boundary * 4));
    std::ptrdiff_t cursor = -static_cast<std::ptrdiff_t>(phase_dist(rng));
    const auto len = static_cast<std::ptrdiff_t>(length);
    for (std::size_t k = 0; k < cfg.segments_per_sequence && cursor < len; ++k) {
      const bool short_signal = coin(rng) < cfg.short_fraction;
      const std::size_t dur = short_signal ? short_dur(rng) : long_dur(rng);
      const std::ptrdiff_t raw_start = cursor;
      const std::ptrdiff_t raw_end = cursor + static_cast<std::ptrdiff_t>(dur) - 1;
      cursor = raw_end + 1 + static_cast<std::ptrdiff_t>(gap_dist(rng));
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(raw_start, 0);
      const std::ptrdiff_t hi = std::min(raw_end, len - 1);
      if (lo > hi) continue;
      PlantedSegment seg{static_cast<std::size_t>(lo), static_cast<std::size_t>(hi), false};
      // the class reflects the visible duration; a long segment clipped down
      // to a stub counts as short, matching how evaluation strata see it
      seg.is_short = seg.end - seg.start + 1 < boundary;
      seq.segments.push_back(seg);
      for (std::ptrdiff_t t = lo; t <= hi; ++t) {
        seq.labels[t] = 1;
        const double local = static_cast<double>(t - raw_start);
        const double steady = short_signal ? 0.6 * amp : amp;
        const double osc =
            short_signal ? amp * std::sin(2.0 * M_PI * local / 4.0) : 0.0;
        for (std::size_t c = 0; c < cfg.width; ++c)
          base[t][c] += steady * dir_main[c] + osc * dir_osc[c];
      }
    }

    for (std::size_t t = 0; t < length; ++t)
      for (std::size_t c = 0; c < cfg.width; ++c)
        seq.embeddings.data[t * cfg.width + c] = static_cast<float>(base[t][c]);
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace sed
