#pragma once

#include <string>
#include <vector>

#include "sed/model.hpp"

namespace sed {

struct LayerCost {
  std::string name;
  std::size_t params = 0;
  std::size_t flops = 0;  // at the report's reference length
};

// Multiply-add counted as 2 FLOPs; parameters are trainable scalars including
// biases. FLOPs are linear in L for this architecture.
struct ComplexityReport {
  std::vector<LayerCost> layers;
  std::size_t total_params = 0;
  std::size_t total_flops = 0;
  std::size_t ref_length = 0;

  double params_k() const { return static_cast<double>(total_params) / 1e3; }
  double flops_m() const { return static_cast<double>(total_flops) / 1e6; }
  double flops_per_frame() const {
    return static_cast<double>(total_flops) / static_cast<double>(ref_length);
  }
  std::string to_json() const;
  std::string to_text() const;
};

ComplexityReport analyze_complexity(const ModelConfig& cfg, std::size_t ref_length);

std::size_t count_params(const ModelConfig& cfg);
std::size_t estimate_flops(const ModelConfig& cfg, std::size_t length);

std::vector<ComplexityReport> sweep_report(const std::vector<ModelConfig>& configs,
                                           std::size_t ref_length);

// Aligned table over several reports (one row per config).
std::string sweep_table(const std::vector<std::string>& row_names,
                        const std::vector<ComplexityReport>& reports);

}  // namespace sed
