#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sed/tensor.hpp"

namespace sed {

// Metric requested on a degenerate set (single class / no positives).
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trapezoidal ROC AUC with tie groups (equals Mann-Whitney with half credit
// for ties). Requires at least one positive and one negative label.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// AP = sum_i (R_i - R_{i-1}) * P_i over descending score thresholds, ties
// grouped. Requires at least one positive label.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

// Maximal run of consecutive frames sharing a label, scored by the mean
// predicted probability of its member frames.
struct ErrorInstance {
  int label = 0;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  double mean_prob = 0.0;
  std::size_t duration() const { return end - start + 1; }
};

std::vector<ErrorInstance> group_instances(const std::vector<int>& labels,
                                           const std::vector<double>& probs);

struct MetricsReport {
  std::optional<double> frame_auc, frame_ap;
  std::optional<double> instance_auc, instance_ap;
  std::optional<double> short_auc, short_ap;
  std::optional<double> long_auc, long_ap;
  std::size_t frame_count = 0;
  std::size_t error_frames = 0;
  std::size_t instance_count = 0;
  std::size_t short_error_instances = 0;
  std::size_t long_error_instances = 0;
  double sample_rate = 0.0;

  std::string to_json(int indent = 2) const;  // undefined strata serialize as null
};

// Frame metrics over all pooled frames; instance metrics over per-video runs;
// short/long strata pair that duration class's error frames with all normal
// frames (the opposite class's error frames are excluded). The short/long
// boundary is 3 seconds at the given sample rate.
MetricsReport stratified_eval(const std::vector<std::vector<int>>& labels,
                              const std::vector<std::vector<double>>& probs,
                              double sample_rate);

MetricsReport stratified_eval(const std::vector<int>& labels,
                              const std::vector<double>& probs, double sample_rate);

}  // namespace sed
