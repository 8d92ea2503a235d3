#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "sed/metrics.hpp"

using namespace sed;

namespace {

// Rank-free Mann-Whitney oracle: fraction of positive/negative pairs ordered
// correctly, half credit for tied scores.
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  return wins / static_cast<double>(pairs);
}

// Threshold-enumeration oracle: recompute precision and recall from scratch at
// every distinct score, descending.
double threshold_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
  const double total_pos =
      static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  double ap = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < th) continue;
      (labels[i] == 1 ? tp : fp) += 1.0;
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

std::vector<double> quantized_scores(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> lvl(0, 9);  // coarse levels force ties
  std::vector<double> s(n);
  for (auto& v : s) v = lvl(rng) / 10.0;
  return s;
}

}  // namespace

TEST_CASE("worked ranking example") {
  const std::vector<double> scores{0.8, 0.7, 0.6, 0.2};
  const std::vector<int> labels{1, 0, 1, 0};
  CHECK(std::fabs(roc_auc(scores, labels) - 0.75) < 1e-9);
  CHECK(std::fabs(average_precision(scores, labels) - 5.0 / 6.0) < 1e-9);
}

TEST_CASE("separable and degenerate rankings") {
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == doctest::Approx(0.0));
  CHECK(average_precision({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  // fully tied scores carry no ranking information
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
  CHECK(average_precision({0.5, 0.5, 0.5, 0.5}, {1, 0, 0, 0}) == doctest::Approx(0.25));
}

TEST_CASE("single-class inputs raise the undefined-metric error") {
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), UndefinedMetricError);
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {0, 0}), UndefinedMetricError);
  CHECK_THROWS_AS(average_precision({0.1, 0.2}, {0, 0}), UndefinedMetricError);
  CHECK_THROWS_AS(roc_auc({}, {}), ShapeError);  // empty is a shape problem, not a stratum
}

TEST_CASE("auc agrees with the pairwise oracle on tie-heavy data") {
  std::mt19937_64 rng(101);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 20 + rng() % 480;
    auto scores = quantized_scores(n, rng);
    std::vector<int> labels(n);
    for (auto& l : labels) l = coin(rng) ? 1 : 0;
    if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
    if (std::count(labels.begin(), labels.end(), 0) == 0) labels[1] = 0;
    CHECK(std::fabs(roc_auc(scores, labels) - pairwise_auc(scores, labels)) < 1e-9);
  }
}

TEST_CASE("average precision agrees with the threshold oracle") {
  std::mt19937_64 rng(202);
  std::bernoulli_distribution coin(0.25);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 20 + rng() % 480;
    auto scores = quantized_scores(n, rng);
    std::vector<int> labels(n);
    for (auto& l : labels) l = coin(rng) ? 1 : 0;
    if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
    CHECK(std::fabs(average_precision(scores, labels) - threshold_ap(scores, labels)) <
          1e-9);
  }
}

TEST_CASE("both metrics are invariant under strictly increasing transforms") {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> scores(200);
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 200; ++i) {
    scores[i] = uni(rng);
    labels[i] = uni(rng) < 0.4 ? 1 : 0;
  }
  labels[0] = 1;
  labels[1] = 0;
  std::vector<double> warped(200);
  for (std::size_t i = 0; i < 200; ++i) warped[i] = std::tanh(3.0 * scores[i] - 1.0);
  CHECK(std::fabs(roc_auc(scores, labels) - roc_auc(warped, labels)) < 1e-12);
  CHECK(std::fabs(average_precision(scores, labels) - average_precision(warped, labels)) <
        1e-12);
}

TEST_CASE("instance grouping finds maximal constant-label runs") {
  const std::vector<int> labels{0, 0, 1, 1, 0, 1};
  const std::vector<double> probs{0.1, 0.3, 0.8, 0.6, 0.2, 0.9};
  auto inst = group_instances(labels, probs);
  REQUIRE(inst.size() == 4);
  CHECK(inst[0].label == 0);
  CHECK(inst[0].start == 0);
  CHECK(inst[0].end == 1);
  CHECK(inst[0].mean_prob == doctest::Approx(0.2));
  CHECK(inst[1].label == 1);
  CHECK(inst[1].duration() == 2);
  CHECK(inst[1].mean_prob == doctest::Approx(0.7));
  CHECK(inst[2].duration() == 1);
  CHECK(inst[3].label == 1);
  CHECK(inst[3].start == 5);
  CHECK(inst[3].end == 5);

  auto single = group_instances({1, 1, 1}, {0.2, 0.4, 0.6});
  REQUIRE(single.size() == 1);
  CHECK(single[0].duration() == 3);
  CHECK(single[0].mean_prob == doctest::Approx(0.4));
  CHECK_THROWS_AS(group_instances({}, {}), ShapeError);
}

TEST_CASE("stratified evaluation splits error frames by duration class") {
  // 5 Hz: the short/long boundary is 15 frames
  std::vector<int> labels(100, 0);
  std::vector<double> probs(100, 0.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lo(0.0, 0.3), hi(0.6, 0.9);
  for (std::size_t t = 0; t < 100; ++t) probs[t] = lo(rng);
  for (std::size_t t = 10; t < 14; ++t) {  // short: 4 frames
    labels[t] = 1;
    probs[t] = hi(rng);
  }
  for (std::size_t t = 40; t < 60; ++t) {  // long: 20 frames
    labels[t] = 1;
    probs[t] = hi(rng);
  }
  MetricsReport rep = stratified_eval(labels, probs, 5.0);
  CHECK(rep.frame_count == 100);
  CHECK(rep.error_frames == 24);
  CHECK(rep.instance_count == 5);
  CHECK(rep.short_error_instances == 1);
  CHECK(rep.long_error_instances == 1);
  REQUIRE(rep.frame_auc.has_value());
  CHECK(*rep.frame_auc == doctest::Approx(roc_auc(probs, labels)).epsilon(1e-12));
  CHECK(*rep.frame_ap ==
        doctest::Approx(average_precision(probs, labels)).epsilon(1e-12));

  // short stratum: the 4 short error frames against the 76 normal frames
  std::vector<double> s_scores;
  std::vector<int> s_labels;
  for (std::size_t t = 0; t < 100; ++t) {
    const bool in_short = t >= 10 && t < 14;
    const bool in_long = t >= 40 && t < 60;
    if (in_long) continue;
    s_scores.push_back(probs[t]);
    s_labels.push_back(in_short ? 1 : 0);
  }
  REQUIRE(rep.short_auc.has_value());
  CHECK(*rep.short_auc == doctest::Approx(roc_auc(s_scores, s_labels)).epsilon(1e-12));
  CHECK(*rep.short_ap ==
        doctest::Approx(average_precision(s_scores, s_labels)).epsilon(1e-12));
  REQUIRE(rep.long_auc.has_value());
  // well-separated probabilities make every stratum nearly perfect
  CHECK(*rep.long_auc > 0.95);
}

TEST_CASE("frame metrics pool across videos") {
  std::vector<std::vector<int>> labels{{0, 1, 1, 0}, {0, 0, 1, 0, 0}};
  std::vector<std::vector<double>> probs{{0.1, 0.9, 0.7, 0.2}, {0.3, 0.1, 0.8, 0.2, 0.1}};
  MetricsReport rep = stratified_eval(labels, probs, 5.0);
  std::vector<int> flat_l;
  std::vector<double> flat_p;
  for (std::size_t v = 0; v < 2; ++v) {
    flat_l.insert(flat_l.end(), labels[v].begin(), labels[v].end());
    flat_p.insert(flat_p.end(), probs[v].begin(), probs[v].end());
  }
  CHECK(rep.frame_count == 9);
  CHECK(*rep.frame_auc == doctest::Approx(roc_auc(flat_p, flat_l)).epsilon(1e-12));
  CHECK(*rep.frame_ap ==
        doctest::Approx(average_precision(flat_p, flat_l)).epsilon(1e-12));
  // instances are grouped per video, never across the boundary
  CHECK(rep.instance_count == 6);
}

TEST_CASE("missing strata serialize as null instead of fabricated numbers") {
  // only a long error present, so the short stratum is undefined
  std::vector<int> labels(40, 0);
  std::vector<double> probs(40, 0.1);
  for (std::size_t t = 5; t < 25; ++t) {
    labels[t] = 1;
    probs[t] = 0.9;
  }
  MetricsReport rep = stratified_eval(labels, probs, 5.0);
  CHECK(!rep.short_auc.has_value());
  CHECK(!rep.short_ap.has_value());
  CHECK(rep.long_auc.has_value());
  const std::string json = rep.to_json();
  CHECK(json.find("null") != std::string::npos);
  CHECK(json.find("short_auc") != std::string::npos);

  // all-normal predictions leave every ranking metric undefined but still count
  std::vector<int> zeros(10, 0);
  std::vector<double> flat(10, 0.5);
  MetricsReport none = stratified_eval(zeros, flat, 5.0);
  CHECK(!none.frame_auc.has_value());
  CHECK(!none.instance_auc.has_value());
  CHECK(none.frame_count == 10);
  CHECK(none.error_frames == 0);
}
