#include "sed/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "sed/data.hpp"

namespace sed {

namespace {

struct Counts {
  std::size_t pos = 0, neg = 0;
};

Counts check_binary(const std::vector<double>& scores, const std::vector<int>& labels,
                    const char* op) {
  if (scores.size() != labels.size())
    throw ShapeError(std::string(op) + ": scores and labels differ in length");
  if (scores.empty()) throw ShapeError(std::string(op) + ": empty input");
  Counts c;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ConfigError(std::string(op) + ": labels must be 0/1");
    (y ? c.pos : c.neg)++;
  }
  return c;
}

// Indices sorted by descending score.
std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const Counts c = check_binary(scores, labels, "roc_auc");
  if (c.pos == 0 || c.neg == 0)
    throw UndefinedMetricError("roc_auc: needs both classes present");
  const auto idx = descending_order(scores);
  double auc = 0.0;
  double tpr_prev = 0.0, fpr_prev = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double threshold = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == threshold) {
      (labels[idx[i]] ? tp : fp)++;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(c.pos);
    const double fpr = static_cast<double>(fp) / static_cast<double>(c.neg);
    auc += 0.5 * (tpr + tpr_prev) * (fpr - fpr_prev);
    tpr_prev = tpr;
    fpr_prev = fpr;
  }
  return auc;
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  const Counts c = check_binary(scores, labels, "average_precision");
  if (c.pos == 0) throw UndefinedMetricError("average_precision: no positive labels");
  const auto idx = descending_order(scores);
  double ap = 0.0, recall_prev = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double threshold = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == threshold) {
      (labels[idx[i]] ? tp : fp)++;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(c.pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - recall_prev) * precision;
    recall_prev = recall;
  }
  return ap;
}

std::vector<ErrorInstance> group_instances(const std::vector<int>& labels,
                                           const std::vector<double>& probs) {
  if (labels.size() != probs.size())
    throw ShapeError("group_instances: labels and probs differ in length");
  if (labels.empty()) throw ShapeError("group_instances: empty input");
  std::vector<ErrorInstance> out;
  std::size_t start = 0;
  double acc = probs[0];
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i == labels.size() || labels[i] != labels[start]) {
      ErrorInstance inst;
      inst.label = labels[start];
      inst.start = start;
      inst.end = i - 1;
      inst.mean_prob = acc / static_cast<double>(i - start);
      out.push_back(inst);
      if (i < labels.size()) {
        start = i;
        acc = probs[i];
      }
    } else {
      acc += probs[i];
    }
  }
  return out;
}

static std::optional<double> try_auc(const std::vector<double>& s, const std::vector<int>& y) {
  try {
    return roc_auc(s, y);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

static std::optional<double> try_ap(const std::vector<double>& s, const std::vector<int>& y) {
  try {
    return average_precision(s, y);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

MetricsReport stratified_eval(const std::vector<std::vector<int>>& labels,
                              const std::vector<std::vector<double>>& probs,
                              double sample_rate) {
  if (labels.size() != probs.size() || labels.empty())
    throw ShapeError("stratified_eval: need matching, non-empty per-video lists");
  const std::size_t boundary = short_long_boundary_frames(sample_rate);

  MetricsReport rep;
  rep.sample_rate = sample_rate;

  std::vector<double> frame_scores, inst_scores, short_scores, long_scores;
  std::vector<int> frame_labels, inst_labels, short_labels, long_labels;

  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v].size() != probs[v].size())
      throw ShapeError("stratified_eval: video " + std::to_string(v) + " length mismatch");
    frame_scores.insert(frame_scores.end(), probs[v].begin(), probs[v].end());
    frame_labels.insert(frame_labels.end(), labels[v].begin(), labels[v].end());

    const auto instances = group_instances(labels[v], probs[v]);
    rep.instance_count += instances.size();
    for (const auto& inst : instances) {
      inst_scores.push_back(inst.mean_prob);
      inst_labels.push_back(inst.label);
      const bool is_short_error = inst.label == 1 && inst.duration() < boundary;
      const bool is_long_error = inst.label == 1 && inst.duration() >= boundary;
      if (is_short_error) rep.short_error_instances++;
      if (is_long_error) rep.long_error_instances++;
      for (std::size_t t = inst.start; t <= inst.end; ++t) {
        if (inst.label == 0) {
          short_scores.push_back(probs[v][t]);
          short_labels.push_back(0);
          long_scores.push_back(probs[v][t]);
          long_labels.push_back(0);
        } else if (is_short_error) {
          short_scores.push_back(probs[v][t]);
          short_labels.push_back(1);
        } else {
          long_scores.push_back(probs[v][t]);
          long_labels.push_back(1);
        }
      }
    }
  }

  rep.frame_count = frame_labels.size();
  for (int y : frame_labels) rep.error_frames += static_cast<std::size_t>(y);

  rep.frame_auc = try_auc(frame_scores, frame_labels);
  rep.frame_ap = try_ap(frame_scores, frame_labels);
  rep.instance_auc = try_auc(inst_scores, inst_labels);
  rep.instance_ap = try_ap(inst_scores, inst_labels);
  rep.short_auc = try_auc(short_scores, short_labels);
  rep.short_ap = try_ap(short_scores, short_labels);
  rep.long_auc = try_auc(long_scores, long_labels);
  rep.long_ap = try_ap(long_scores, long_labels);
  return rep;
}

MetricsReport stratified_eval(const std::vector<int>& labels,
                              const std::vector<double>& probs, double sample_rate) {
  return stratified_eval(std::vector<std::vector<int>>{labels},
                         std::vector<std::vector<double>>{probs}, sample_rate);
}

static void emit(std::ostringstream& os, const char* key, const std::optional<double>& v,
                 bool comma = true) {
  os << "  \"" << key << "\": ";
  if (v)
    os << *v;
  else
    os << "null";
  if (comma) os << ",\n";
}

std::string MetricsReport::to_json(int) const {
  std::ostringstream os;
  os.precision(12);
  os << "{\n";
  emit(os, "frame_auc", frame_auc);
  emit(os, "frame_ap", frame_ap);
  emit(os, "instance_auc", instance_auc);
  emit(os, "instance_ap", instance_ap);
  emit(os, "short_auc", short_auc);
  emit(os, "short_ap", short_ap);
  emit(os, "long_auc", long_auc);
  emit(os, "long_ap", long_ap);
  os << "  \"frame_count\": " << frame_count << ",\n";
  os << "  \"error_frames\": " << error_frames << ",\n";
  os << "  \"instance_count\": " << instance_count << ",\n";
  os << "  \"short_error_instances\": " << short_error_instances << ",\n";
  os << "  \"long_error_instances\": " << long_error_instances << ",\n";
  os << "  \"sample_rate\": " << sample_rate << "\n";
  os << "}\n";
  return os.str();
}

}  // namespace sed
