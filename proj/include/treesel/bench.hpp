/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <string>
#include <span>
#include <vector>

#include <json.hpp>

#include "treesel/bnb.hpp"
#include "treesel/features.hpp"
#include "treesel/instances.hpp"
#include "treesel/selectors.hpp"
#include "treesel/tree_policy.hpp"

namespace treesel {

// (gap_base - gap_sel) / max(gap_sel, gap_base), 0/0 := 0, clipped to [-1, 1].
double utility(double gap_sel, double gap_base);
// utility on the gap * nodes scores.
double utility_per_node(double gap_sel, long nodes_sel, double gap_base, long nodes_base);
// exp(mean(ln(x + shift))) - shift.
double shifted_geo_mean(std::span<const double> xs, double shift);

struct BenchRow {
  std::string instance;
  double gap_policy = 0.0;
  double gap_baseline = 0.0;
  long nodes_policy = 0;
  long nodes_baseline = 0;
  double reward = 0.0;
  double utility = 0.0;
  double utility_per_node = 0.0;
  // Not part of the CSV: wall clock varies between runs.
  double seconds_policy = 0.0;
  double seconds_baseline = 0.0;
  bool skipped = false;
  std::string error;
};

// Fills the metric columns from the gap and node columns.
BenchRow make_row(std::string instance, double gap_policy, double gap_baseline,
                  long nodes_policy, long nodes_baseline);

struct BenchSummary {
  int rows = 0;      // after filtering
  int filtered = 0;  // dropped for too few baseline nodes or skipped
  double mean_reward = 0.0;
  double mean_utility = 0.0;
  double mean_utility_per_node = 0.0;
  double win_rate = 0.0;  // reward >= 0
  double geo_mean_policy = 0.0;
  double geo_mean_baseline = 0.0;
  double geo_mean_seconds_policy = 0.0;
  double geo_mean_seconds_baseline = 0.0;
};

// Drops skipped rows and rows with fewer than min_baseline_nodes baseline
// nodes, then aggregates. Throws EmptyAfterFilter when nothing is left.
BenchSummary aggregate(std::span<const BenchRow> rows, double gap_shift = 1.0,
                       double time_shift = 10.0, long min_baseline_nodes = 5);

inline constexpr const char* kBenchCsvHeader =
    "instance,gap_policy,gap_baseline,nodes_policy,nodes_baseline,reward,utility,"
    "utility_per_node";
std::string rows_to_csv(std::span<const BenchRow> rows);
nlohmann::json summary_to_json(const BenchSummary& s);

struct BenchConfig {
  Budget budget{300};
  ScheduleConfig schedule;
  std::uint64_t seed = 0;
  // Argmax instead of sampling.
  bool greedy = false;
};

// Baseline (hybrid_plunge) and policy run per instance under the same
// budget. Failures become skipped rows; output order follows the input.
std::vector<BenchRow> run_bench(std::span<const NamedProgram> instances, const TreePolicy& policy,
                                const FeatureStats& stats, const BenchConfig& cfg);

// Compares two classical selectors the same way; used when no model exists.
std::vector<BenchRow> run_bench(std::span<const NamedProgram> instances, NodeSelector& policy,
                                const BenchConfig& cfg);

inline constexpr int kModelVersion = 1;

struct Model {
  TreePolicy policy;
  FeatureStats stats;
  nlohmann::json meta;  // training config echo, seeds
};

nlohmann::json model_to_json(const TreePolicy& policy, const FeatureStats& stats,
                             const nlohmann::json& meta = nlohmann::json::object());
// Throws CorruptModel on malformed content, VersionMismatch on another version.
Model model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const TreePolicy& policy, const FeatureStats& stats,
                const nlohmann::json& meta = nlohmann::json::object());
Model load_model(const std::string& path);

nlohmann::json solve_result_to_json(const SolveResult& r, bool with_trace = false);

}  // namespace treesel
