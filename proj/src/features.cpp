/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/features.hpp"

#include <algorithm>
#include <cmath>

#include "treesel/errors.hpp"

namespace treesel {

FeatureStats FeatureStats::identity() {
  FeatureStats s;
  s.mean.fill(0.0);
  s.std.fill(1.0);
  return s;
}

double fractional_part(double v) {
  const double f = v - std::floor(v);
  if (f <= kIntegralityTol || f >= 1.0 - kIntegralityTol) return 0.0;
  return f;
}

std::array<double, 10> fractional_histogram(std::span<const double> solution,
                                            const std::vector<bool>& is_integer) {
  std::array<double, 10> hist{};
  int count = 0;
  for (std::size_t j = 0; j < solution.size() && j < is_integer.size(); ++j) {
    if (!is_integer[j]) continue;
    const int bucket = std::min(9, static_cast<int>(fractional_part(solution[j]) * 10.0));
    hist[bucket] += 1.0;
    ++count;
  }
  if (count > 0)
    for (double& h : hist) h /= count;
  return hist;
}

LpSummary summarize_lp(std::span<const double> solution,
                       const std::vector<bool>& is_integer, int lp_iterations) {
  LpSummary s;
  s.frac_hist = fractional_histogram(solution, is_integer);
  s.lp_iterations = lp_iterations;
  int count = 0, integral = 0;
  double gap_sum = 0.0;
  for (std::size_t j = 0; j < solution.size() && j < is_integer.size(); ++j) {
    if (!is_integer[j]) continue;
    const double f = fractional_part(solution[j]);
    ++count;
    if (f == 0.0) ++integral;
    gap_sum += std::min(f, 1.0 - f);
  }
  if (count > 0) {
    s.mean_integrality_gap = gap_sum / count;
    s.pct_integral = static_cast<double>(integral) / count;
  } else {
    s.pct_integral = 1.0;
  }
  return s;
}

double node_estimate(double lp_bound, std::span<const double> solution,
                     const LinearProgram& problem) {
  double est = lp_bound;
  for (int j = 0; j < problem.num_vars && j < static_cast<int>(solution.size()); ++j) {
    if (!problem.is_integer[j]) continue;
    const double f = fractional_part(solution[j]);
    est += std::min(f, 1.0 - f) * std::abs(problem.objective[j]);
  }
  return est;
}

namespace {

// Tree-wide terms shared by every node of one snapshot.
struct TreeTerms {
  double gap;
  double denom;
  double size;
  int problem_size;
};

TreeTerms tree_terms(const BnbTree& tree) {
  const LinearProgram& p = tree.problem();
  double denom = std::min(tree.primal_bound(), tree.dual_bound());
  if (std::abs(denom) < 1e-9) denom = denom < 0 ? -1e-9 : 1e-9;
  return {tree.gap(), denom, static_cast<double>(tree.size()),
          std::max(1, p.num_vars + p.num_rows())};
}

FeatureVector raw_with(const BnbNode& node, const TreeTerms& t) {
  FeatureVector f{};
  f[kCutsApplied] = 0.0;
  f[kSeparationRounds] = 0.0;
  f[kOptimalityGap] = t.gap;
  f[kLpIterations] = static_cast<double>(node.lp_summary.lp_iterations) / t.problem_size;
  f[kMeanIntegralityGap] = node.lp_summary.mean_integrality_gap;
  f[kPctIntegral] = node.lp_summary.pct_integral;
  for (int b = 0; b < 10; ++b) f[kFracHistFirst + b] = node.lp_summary.frac_hist[b];
  f[kDepth] = node.depth / t.size;
  f[kLowerBound] = node.lp_bound / t.denom;
  f[kEstimate] = node.estimate / t.denom;
  for (double& v : f) {
    if (std::isnan(v)) v = 0.0;
    v = std::clamp(v, -kFeatureClamp, kFeatureClamp);
  }
  return f;
}

}  // namespace

FeatureVector raw_features(const BnbNode& node, const BnbTree& tree) {
  return raw_with(node, tree_terms(tree));
}

FeatureVector standardize(const FeatureVector& clamped, const FeatureStats& stats) {
  FeatureVector out{};
  for (int i = 0; i < kNumFeatures; ++i)
    out[i] = (clamped[i] - stats.mean[i]) / stats.std[i];
  return out;
}

FeatureVector extract(const BnbNode& node, const BnbTree& tree,
                      const FeatureStats& stats) {
  return standardize(raw_features(node, tree), stats);
}

Eigen::MatrixXd extract_all(const BnbTree& tree, const FeatureStats& stats) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tree.size()), kNumFeatures);
  const TreeTerms terms = tree_terms(tree);
  for (const BnbNode& n : tree.nodes()) {
    const FeatureVector f = standardize(raw_with(n, terms), stats);
    for (int i = 0; i < kNumFeatures; ++i) out(n.id, i) = f[i];
  }
  return out;
}

FeatureStats fit_stats(std::span<const FeatureVector> rows) {
  if (rows.size() < 2) throw InsufficientData("fit_stats needs at least two rows");
  FeatureStatsAccumulator acc;
  for (const auto& r : rows) acc.add(r);
  return acc.finish();
}

void FeatureStatsAccumulator::add(const FeatureVector& row) {
  ++count_;
  for (int i = 0; i < kNumFeatures; ++i) {
    sum_[i] += row[i];
    sum_sq_[i] += static_cast<long double>(row[i]) * row[i];
  }
}

void FeatureStatsAccumulator::add_tree(const BnbTree& tree) {
  const TreeTerms terms = tree_terms(tree);
  for (const BnbNode& n : tree.nodes()) add(raw_with(n, terms));
}

FeatureStats FeatureStatsAccumulator::finish() const {
  if (count_ < 2) throw InsufficientData("fit_stats needs at least two rows");
  FeatureStats s;
  for (int i = 0; i < kNumFeatures; ++i) {
    const long double mean = sum_[i] / count_;
    const long double var = std::max<long double>(0.0L, sum_sq_[i] / count_ - mean * mean);
    s.mean[i] = static_cast<double>(mean);
    s.std[i] = std::max(kMinFeatureStd, static_cast<double>(std::sqrt(var)));
  }
  return s;
}

}  // namespace treesel
