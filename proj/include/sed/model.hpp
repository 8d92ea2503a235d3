#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sed/ops.hpp"
#include "sed/ssm.hpp"
#include "sed/tensor.hpp"

namespace sed {

// Receptive field claimed for dilated layer l (1..3) of the fusion stack,
// 2^(l+2) - 1. The measured impulse support of a kernel-3 stack at dilations
// 2/4/8 is 5/13/29; tests pin both numbers.
std::size_t receptive_field_formula(std::size_t layer);

struct FctfConfig {
  std::size_t width = 64;          // G, input and output channels
  std::size_t inner_channels = 8;  // E
  std::size_t kernel = 3;
  std::vector<std::size_t> dilations{2, 4, 8};

  void validate() const;
};

struct BmssConfig {
  std::size_t d_in = 0;
  std::size_t g = 64;  // compression factor
  std::size_t n_state = 16;
  std::size_t expand = 1;
  FctfConfig fctf;

  std::size_t d_inner() const { return expand * g; }
  std::size_t d_out() const { return d_in / 2; }
  std::size_t dt_rank() const { return dt_rank_for(d_inner()); }
  void validate() const;
};

struct ModelConfig {
  std::size_t d = 1536;  // embedding width
  std::size_t num_blocks = 3;
  std::size_t g = 64;
  std::size_t n_state = 16;
  std::size_t expand = 1;
  std::size_t fctf_e = 0;  // 0 -> rule: max(1, g/8)
  std::vector<std::size_t> dilations{2, 4, 8};

  std::size_t fctf_channels() const { return fctf_e ? fctf_e : std::max<std::size_t>(1, g / 8); }
  std::size_t block_input_width(std::size_t i) const { return d >> i; }
  std::size_t final_width() const { return d >> num_blocks; }
  BmssConfig block_config(std::size_t i) const;
  void validate() const;
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Dilated fine-to-coarse temporal fusion: a stack of kernel-3 dilated
// convolutions whose outputs are concatenated with the input and fused by a
// 1-tap convolution back to G channels. With zero dilated layers the stage is
// a passthrough.
struct Fctf {
  FctfConfig cfg;
  std::vector<Tensor> dil_w, dil_b;
  Tensor fuse_w, fuse_b;

  void init(const FctfConfig& c, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  // Output of the dilated stack only, up to layer `depth` (for receptive-field probes).
  Tensor dilated_stack(const Tensor& x, std::size_t depth) const;
  void collect(const std::string& prefix, NamedParams& out);
};

// Bottleneck multi-scale state space block: 1-tap compress D_in -> G, FCTF,
// expand-and-split linear, gated selective scan, 1-tap restore to D_in/2.
struct BmssBlock {
  BmssConfig cfg;
  Tensor compress_w, compress_b;
  Fctf fctf;
  Tensor in_proj_w, in_proj_b;  // G -> 2*d_inner
  Tensor conv_w, conv_b;        // depthwise, k=4, causal
  Tensor x_proj_w;              // d_inner -> dt_rank + 2N
  Tensor dt_proj_w, dt_proj_b;  // dt_rank -> d_inner
  Tensor a_log, skip;
  Tensor restore_w, restore_b;  // d_inner -> D_in/2

  void init(const BmssConfig& c, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, bool fast_scan) const;
  void collect(const std::string& prefix, NamedParams& out);
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  // x [L x D] -> per-frame error probability [L x 1], all values in (0,1).
  // Uses the sequential differentiable scan while a tape is active, the
  // chunked forward-only scan otherwise.
  Tensor forward(const Tensor& x) const;

  const ModelConfig& config() const { return cfg_; }
  NamedParams& parameters() { return params_; }
  const NamedParams& parameters() const { return params_; }
  Tensor find_parameter(const std::string& name) const;
  void set_requires_grad(bool on);

 private:
  ModelConfig cfg_;
  std::vector<BmssBlock> blocks_;
  Tensor head_w, head_b;
  NamedParams params_;
};

}  // namespace sed
