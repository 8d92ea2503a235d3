#include "sed/complexity.hpp"

#include <iomanip>
#include <sstream>

namespace sed {

namespace {

std::size_t conv_params(std::size_t c_in_per_group, std::size_t c_out, std::size_t k,
                        bool bias = true) {
  return c_out * c_in_per_group * k + (bias ? c_out : 0);
}

std::size_t conv_flops(std::size_t L, std::size_t c_in_per_group, std::size_t c_out,
                       std::size_t k, bool bias = true) {
  return L * c_out * (2 * c_in_per_group * k + (bias ? 1 : 0));
}

std::size_t linear_params(std::size_t in, std::size_t out, bool bias) {
  return in * out + (bias ? out : 0);
}

std::size_t linear_flops(std::size_t L, std::size_t in, std::size_t out, bool bias) {
  return L * (2 * in * out + (bias ? out : 0));
}

}  // namespace

ComplexityReport analyze_complexity(const ModelConfig& cfg, std::size_t L) {
  cfg.validate();
  if (L < 1) throw ConfigError("analyze_complexity: reference length must be >= 1");
  ComplexityReport rep;
  rep.ref_length = L;
  auto layer = [&](std::string name, std::size_t params, std::size_t flops) {
    rep.layers.push_back({std::move(name), params, flops});
  };

  for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
    const BmssConfig b = cfg.block_config(i);
    const std::size_t d = b.d_inner(), n = b.n_state, r = b.dt_rank();
    const std::string p = "block" + std::to_string(i);

    layer(p + ".compress", conv_params(b.d_in, b.g, 1), conv_flops(L, b.d_in, b.g, 1));

    std::size_t in_ch = b.g;
    const auto& f = b.fctf;
    for (std::size_t j = 0; j < f.dilations.size(); ++j) {
      layer(p + ".fctf.dil" + std::to_string(j), conv_params(in_ch, f.inner_channels, f.kernel),
            conv_flops(L, in_ch, f.inner_channels, f.kernel));
      in_ch = f.inner_channels;
    }
    if (!f.dilations.empty()) {
      const std::size_t fuse_in = b.g + f.dilations.size() * f.inner_channels;
      layer(p + ".fctf.fuse", conv_params(fuse_in, b.g, 1), conv_flops(L, fuse_in, b.g, 1));
    }

    layer(p + ".in_proj", linear_params(b.g, 2 * d, true), linear_flops(L, b.g, 2 * d, true));
    // depthwise k=4 causal conv plus SiLU (4 flops per element)
    layer(p + ".conv", conv_params(1, d, 4), conv_flops(L, 1, d, 4) + 4 * L * d);
    layer(p + ".x_proj", linear_params(d, r + 2 * n, false),
          linear_flops(L, d, r + 2 * n, false));
    // dt projection plus softplus (3 flops per element)
    layer(p + ".dt_proj", linear_params(r, d, true), linear_flops(L, r, d, true) + 3 * L * d);
    // scan: per (t, channel, state) one exp-decay update and one output MAC,
    // ~8 flops, plus the skip path and the SiLU gate.
    layer(p + ".ssm", d * n + d, 8 * L * d * n + 2 * L * d + 5 * L * d);
    layer(p + ".restore", conv_params(d, b.d_out(), 1), conv_flops(L, d, b.d_out(), 1));
  }
  const std::size_t w = cfg.final_width();
  // 1-tap classifier plus sigmoid (3 flops per frame)
  layer("head", conv_params(w, 1, 1), conv_flops(L, w, 1, 1) + 3 * L);

  for (const auto& l : rep.layers) {
    rep.total_params += l.params;
    rep.total_flops += l.flops;
  }
  return rep;
}

std::size_t count_params(const ModelConfig& cfg) {
  return analyze_complexity(cfg, 1).total_params;
}

std::size_t estimate_flops(const ModelConfig& cfg, std::size_t length) {
  return analyze_complexity(cfg, length).total_flops;
}

std::vector<ComplexityReport> sweep_report(const std::vector<ModelConfig>& configs,
                                           std::size_t ref_length) {
  std::vector<ComplexityReport> out;
  out.reserve(configs.size());
  for (const auto& cfg : configs) out.push_back(analyze_complexity(cfg, ref_length));
  return out;
}

std::string ComplexityReport::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\n  \"convention\": \"multiply-add = 2 FLOPs\",\n";
  os << "  \"reference_length\": " << ref_length << ",\n";
  os << "  \"total_params\": " << total_params << ",\n";
  os << "  \"total_flops\": " << total_flops << ",\n";
  os << "  \"params_k\": " << params_k() << ",\n";
  os << "  \"flops_m\": " << flops_m() << ",\n";
  os << "  \"flops_per_frame\": " << flops_per_frame() << ",\n";
  os << "  \"layers\": [\n";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    os << "    {\"name\": \"" << layers[i].name << "\", \"params\": " << layers[i].params
       << ", \"flops\": " << layers[i].flops << "}";
    os << (i + 1 < layers.size() ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

std::string ComplexityReport::to_text() const {
  std::ostringstream os;
  os << "layer                          params        flops\n";
  for (const auto& l : layers)
    os << std::left << std::setw(28) << l.name << std::right << std::setw(11) << l.params
       << std::setw(13) << l.flops << "\n";
  os << std::left << std::setw(28) << "total" << std::right << std::setw(11) << total_params
     << std::setw(13) << total_flops << "\n";
  os << "reference length " << ref_length << ", " << std::fixed << std::setprecision(2)
     << params_k() << "K params, " << flops_m() << "M FLOPs ("
     << std::setprecision(1) << flops_per_frame() << " per frame); multiply-add = 2 FLOPs\n";
  return os.str();
}

std::string sweep_table(const std::vector<std::string>& row_names,
                        const std::vector<ComplexityReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "config" << std::right << std::setw(12) << "params(K)"
     << std::setw(12) << "flops(M)" << "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    os << std::left << std::setw(24) << row_names.at(i) << std::right << std::fixed
       << std::setprecision(2) << std::setw(12) << reports[i].params_k() << std::setw(12)
       << reports[i].flops_m() << "\n";
  }
  return os.str();
}

}  // namespace sed
