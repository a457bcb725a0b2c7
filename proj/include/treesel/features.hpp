/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "treesel/bnb.hpp"

namespace treesel {

inline constexpr int kNumFeatures = 19;
inline constexpr double kFeatureClamp = 10.0;
inline constexpr double kMinFeatureStd = 1e-6;

using FeatureVector = std::array<double, kNumFeatures>;

// Layout of the per-node feature vector.
enum FeatureIndex : int {
  kCutsApplied = 0,
  kSeparationRounds = 1,
  kOptimalityGap = 2,
  kLpIterations = 3,
  kMeanIntegralityGap = 4,
  kPctIntegral = 5,
  kFracHistFirst = 6,  // ten buckets, 6..15
  kDepth = 16,
  kLowerBound = 17,
  kEstimate = 18,
};

struct FeatureStats {
  FeatureVector mean{};
  FeatureVector std{};

  // mean 0, std 1: standardization is the identity.
  static FeatureStats identity();

  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

// Fractional part in [0, 1), snapped to 0 within kIntegralityTol of an integer.
double fractional_part(double v);

// Share of integer variables per tenth of the fractional range; all zeros when
// there are no integer variables.
std::array<double, 10> fractional_histogram(std::span<const double> solution,
                                            const std::vector<bool>& is_integer);

LpSummary summarize_lp(std::span<const double> solution,
                       const std::vector<bool>& is_integer, int lp_iterations);

// lp_bound plus, for every fractional integer variable, the distance to the
// nearer integer weighted by |c_j|.
double node_estimate(double lp_bound, std::span<const double> solution,
                     const LinearProgram& problem);

// Raw feature vector clamped to [-10, 10], before standardization. NaN
// ratios (e.g. -inf / -inf before the root is solved) are mapped to 0.
FeatureVector raw_features(const BnbNode& node, const BnbTree& tree);

FeatureVector standardize(const FeatureVector& clamped, const FeatureStats& stats);

FeatureVector extract(const BnbNode& node, const BnbTree& tree,
                      const FeatureStats& stats);

// Standardized features of every node, one row per node id.
Eigen::MatrixXd extract_all(const BnbTree& tree, const FeatureStats& stats);

// Per-dimension mean and population std (floored at 1e-6). Throws
// InsufficientData with fewer than two rows.
FeatureStats fit_stats(std::span<const FeatureVector> rows);

// Streaming form of fit_stats for large warm-up rollouts.
class FeatureStatsAccumulator {
 public:
  void add(const FeatureVector& row);
  void add_tree(const BnbTree& tree);
  long count() const { return count_; }
  FeatureStats finish() const;

 private:
  long count_ = 0;
  std::array<long double, kNumFeatures> sum_{};
  std::array<long double, kNumFeatures> sum_sq_{};
};

}  // namespace treesel
