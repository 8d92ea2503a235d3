#include "sed/model.hpp"

#include <cmath>

namespace sed {

std::size_t receptive_field_formula(std::size_t layer) {
  if (layer < 1 || layer > 3)
    throw ConfigError("receptive_field_formula: layer index must be in [1,3]");
  return (std::size_t{1} << (layer + 2)) - 1;
}

void FctfConfig::validate() const {
  if (width == 0) throw ConfigError("fctf: width must be >= 1");
  if (!dilations.empty() && inner_channels == 0)
    throw ConfigError("fctf: inner channel count must be >= 1");
  if (kernel % 2 == 0) throw ConfigError("fctf: kernel size must be odd");
  for (std::size_t i = 1; i < dilations.size(); ++i)
    if (dilations[i] <= dilations[i - 1])
      throw ConfigError("fctf: dilation rates must be strictly increasing");
  for (auto d : dilations)
    if (d == 0) throw ConfigError("fctf: dilation rates must be >= 1");
}

void BmssConfig::validate() const {
  fctf.validate();
  if (d_in == 0 || d_in % 2 != 0) throw ConfigError("bmss: input width must be even");
  if (g == 0 || g > d_in) throw ConfigError("bmss: compression factor must be in [1, D_in]");
  if (n_state == 0) throw ConfigError("bmss: state size must be >= 1");
  if (expand == 0) throw ConfigError("bmss: expansion factor must be >= 1");
  if (fctf.width != g) throw ConfigError("bmss: fctf width must equal G");
}

BmssConfig ModelConfig::block_config(std::size_t i) const {
  BmssConfig b;
  b.d_in = block_input_width(i);
  b.g = g;
  b.n_state = n_state;
  b.expand = expand;
  b.fctf.width = g;
  b.fctf.inner_channels = fctf_channels();
  b.fctf.dilations = dilations;
  return b;
}

void ModelConfig::validate() const {
  if (num_blocks == 0) throw ConfigError("model: at least one block required");
  if (num_blocks > 62 || (d >> num_blocks) == 0 || (d % (std::size_t{1} << num_blocks)) != 0)
    throw ConfigError("model: embedding width must be divisible by 2^num_blocks");
  for (std::size_t i = 0; i < num_blocks; ++i) block_config(i).validate();
}

static Tensor uniform_init(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t = make_tensor(std::move(shape), 0.0, true);
  std::uniform_real_distribution<double> uni(-bound, bound);
  for (auto& v : t->v) v = uni(rng);
  return t;
}

static Tensor zeros_param(Shape shape) { return make_tensor(std::move(shape), 0.0, true); }

void Fctf::init(const FctfConfig& c, std::mt19937_64& rng) {
  c.validate();
  cfg = c;
  dil_w.clear();
  dil_b.clear();
  std::size_t in_ch = cfg.width;
  for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * cfg.kernel));
    dil_w.push_back(uniform_init({cfg.inner_channels, in_ch, cfg.kernel}, bound, rng));
    dil_b.push_back(uniform_init({cfg.inner_channels}, bound, rng));
    in_ch = cfg.inner_channels;
  }
  if (!cfg.dilations.empty()) {
    const std::size_t fuse_in = cfg.width + cfg.dilations.size() * cfg.inner_channels;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fuse_in));
    fuse_w = uniform_init({cfg.width, fuse_in, 1}, bound, rng);
    fuse_b = uniform_init({cfg.width}, bound, rng);
  } else {
    fuse_w.reset();
    fuse_b.reset();
  }
}

Tensor Fctf::forward(const Tensor& x) const {
  if (x->rank() != 2 || x->dim(1) != cfg.width)
    throw ShapeError("fctf: expected width " + std::to_string(cfg.width));
  if (cfg.dilations.empty()) return x;
  std::vector<Tensor> parts{x};
  Tensor cur = x;
  for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
    cur = conv1d(cur, dil_w[i], dil_b[i], cfg.dilations[i], PadMode::SameSymmetric);
    parts.push_back(cur);
  }
  return conv1d(concat_channels(parts), fuse_w, fuse_b, 1, PadMode::SameSymmetric);
}

Tensor Fctf::dilated_stack(const Tensor& x, std::size_t depth) const {
  if (depth == 0 || depth > cfg.dilations.size())
    throw ConfigError("fctf: stack depth out of range");
  Tensor cur = x;
  for (std::size_t i = 0; i < depth; ++i)
    cur = conv1d(cur, dil_w[i], dil_b[i], cfg.dilations[i], PadMode::SameSymmetric);
  return cur;
}

void Fctf::collect(const std::string& prefix, NamedParams& out) {
  for (std::size_t i = 0; i < dil_w.size(); ++i) {
    out.emplace_back(prefix + ".dil" + std::to_string(i) + ".w", dil_w[i]);
    out.emplace_back(prefix + ".dil" + std::to_string(i) + ".b", dil_b[i]);
  }
  if (fuse_w) {
    out.emplace_back(prefix + ".fuse.w", fuse_w);
    out.emplace_back(prefix + ".fuse.b", fuse_b);
  }
}

void BmssBlock::init(const BmssConfig& c, std::mt19937_64& rng) {
  c.validate();
  cfg = c;
  const std::size_t d = cfg.d_inner(), n = cfg.n_state, r = cfg.dt_rank();

  double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_in));
  compress_w = uniform_init({cfg.g, cfg.d_in, 1}, bound, rng);
  compress_b = uniform_init({cfg.g}, bound, rng);

  fctf.init(cfg.fctf, rng);

  bound = 1.0 / std::sqrt(static_cast<double>(cfg.g));
  in_proj_w = uniform_init({cfg.g, 2 * d}, bound, rng);
  in_proj_b = zeros_param({2 * d});

  bound = 1.0 / std::sqrt(4.0);  // depthwise, fan-in = kernel
  conv_w = uniform_init({d, 1, 4}, bound, rng);
  conv_b = uniform_init({d}, bound, rng);

  bound = 1.0 / std::sqrt(static_cast<double>(d));
  x_proj_w = uniform_init({d, r + 2 * n}, bound, rng);

  bound = 1.0 / std::sqrt(static_cast<double>(r));
  dt_proj_w = uniform_init({r, d}, bound, rng);

  SelectiveInit sel = init_s4d_real(d, n, rng());
  a_log = sel.a_log;
  a_log->requires_grad = true;
  skip = sel.skip;
  skip->requires_grad = true;
  dt_proj_b = make_tensor({d}, sel.dt_bias, true);

  bound = 1.0 / std::sqrt(static_cast<double>(d));
  restore_w = uniform_init({cfg.d_out(), d, 1}, bound, rng);
  restore_b = uniform_init({cfg.d_out()}, bound, rng);
}

Tensor BmssBlock::forward(const Tensor& x, bool fast_scan) const {
  if (x->rank() != 2 || x->dim(1) != cfg.d_in)
    throw ShapeError("bmss: expected input width " + std::to_string(cfg.d_in) + ", got " +
                     shape_str(x->shape));
  const std::size_t d = cfg.d_inner(), n = cfg.n_state, r = cfg.dt_rank();

  Tensor fc = conv1d(x, compress_w, compress_b, 1, PadMode::SameSymmetric);
  Tensor ffc = fctf.forward(fc);

  Tensor xz = add(matmul(ffc, in_proj_w), in_proj_b);
  Tensor flow = slice_channels(xz, 0, d);
  Tensor z = slice_channels(xz, d, 2 * d);

  flow = conv1d(flow, conv_w, conv_b, 1, PadMode::Causal, d);
  flow = silu(flow);

  Tensor proj = matmul(flow, x_proj_w);
  Tensor dt_low = slice_channels(proj, 0, r);
  Tensor b_seq = slice_channels(proj, r, r + n);
  Tensor c_seq = slice_channels(proj, r + n, r + 2 * n);
  Tensor dt = softplus(add(matmul(dt_low, dt_proj_w), dt_proj_b));
  Tensor a = scale(exp_op(a_log), -1.0);

  Tensor scanned = fast_scan ? selective_scan_fast(flow, dt, a, b_seq, c_seq, skip)
                             : selective_scan_reference(flow, dt, a, b_seq, c_seq, skip);
  Tensor gated = mul(scanned, silu(z));
  return conv1d(gated, restore_w, restore_b, 1, PadMode::SameSymmetric);
}

void BmssBlock::collect(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".compress.w", compress_w);
  out.emplace_back(prefix + ".compress.b", compress_b);
  fctf.collect(prefix + ".fctf", out);
  out.emplace_back(prefix + ".in_proj.w", in_proj_w);
  out.emplace_back(prefix + ".in_proj.b", in_proj_b);
  out.emplace_back(prefix + ".conv.w", conv_w);
  out.emplace_back(prefix + ".conv.b", conv_b);
  out.emplace_back(prefix + ".x_proj.w", x_proj_w);
  out.emplace_back(prefix + ".dt_proj.w", dt_proj_w);
  out.emplace_back(prefix + ".dt_proj.b", dt_proj_b);
  out.emplace_back(prefix + ".a_log", a_log);
  out.emplace_back(prefix + ".skip", skip);
  out.emplace_back(prefix + ".restore.w", restore_w);
  out.emplace_back(prefix + ".restore.b", restore_b);
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  blocks_.resize(cfg_.num_blocks);
  for (std::size_t i = 0; i < cfg_.num_blocks; ++i) {
    blocks_[i].init(cfg_.block_config(i), rng);
    blocks_[i].collect("block" + std::to_string(i), params_);
  }
  const std::size_t w = cfg_.final_width();
  const double bound = 1.0 / std::sqrt(static_cast<double>(w));
  head_w = uniform_init({1, w, 1}, bound, rng);
  head_b = uniform_init({1}, bound, rng);
  params_.emplace_back("head.w", head_w);
  params_.emplace_back("head.b", head_b);
}

Tensor Model::forward(const Tensor& x) const {
  if (x->rank() != 2 || x->dim(1) != cfg_.d)
    throw ShapeError("model: expected embedding width " + std::to_string(cfg_.d) + ", got " +
                     shape_str(x->shape));
  const bool fast_scan = active_tape() == nullptr;
  Tensor cur = x;
  for (const auto& block : blocks_) cur = block.forward(cur, fast_scan);
  return sigmoid(conv1d(cur, head_w, head_b, 1, PadMode::SameSymmetric));
}

Tensor Model::find_parameter(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw ConfigError("model: no parameter named " + name);
}

void Model::set_requires_grad(bool on) {
  for (auto& [n, t] : params_) t->requires_grad = on;
}

}  // namespace sed
