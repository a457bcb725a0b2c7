/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "treesel/bnb.hpp"
#include "treesel/lp.hpp"

namespace treesel {

struct NamedProgram {
  std::string name;
  LinearProgram program;
};

// Symmetric distance matrix, row-major n x n.
struct TspInstance {
  int n = 0;
  std::vector<double> dist;

  double at(int i, int j) const { return dist[static_cast<std::size_t>(i) * n + j]; }
  double& at(int i, int j) { return dist[static_cast<std::size_t>(i) * n + j]; }
};

// Cities uniform in the unit square, Euclidean distances. Requires n >= 4.
TspInstance gen_tsp(int n, std::mt19937_64& rng);

// Every off-diagonal entry scaled by exp(sigma * g), g ~ N(0, 1) drawn in
// row-major order, then symmetrized by averaging. Requires sigma > 0.
TspInstance mutate(const TspInstance& inst, double sigma, std::mt19937_64& rng);

// MTZ columns: x_ij (i != j) in row-major order, then u_1..u_{n-1} for the
// cities other than city 0, bounded to [2, n]. Rows: n out-degree, n
// in-degree, then u_i - u_j + (n-1) x_ij <= n-2 for every ordered pair of
// non-start cities. Requires n >= 3.
LinearProgram encode_mtz(const TspInstance& inst);
int mtz_x_index(int n, int i, int j);
int mtz_u_index(int n, int city);

// City order starting at 0 when the x part of `solution` is one Hamiltonian
// cycle, nullopt otherwise.
std::optional<std::vector<int>> decode_tour(int n, std::span<const double> solution);
double tour_length(const TspInstance& inst, std::span<const int> tour);

// Uncapacitated facility location with uniform opening costs (3000), a few
// cheap client connections (cost in {0..4}) and 3000 elsewhere. Columns are
// z_ij (facility i serves client j, index i * m + j) then x_i. Rows: one
// assignment equality per client, then sum_j z_ij - m x_i <= 0 per facility.
LinearProgram gen_uflp_kochetov(int n_facilities, int m_clients, std::mt19937_64& rng);
inline constexpr double kUflpOpenCost = 3000.0;
inline constexpr double kUflpExpensive = 3000.0;
inline constexpr int kUflpCheapDegree = 10;

nlohmann::json tsp_to_json(const TspInstance& inst);
TspInstance tsp_from_json(const nlohmann::json& j);

struct CurationConfig {
  Budget budget{300};
  int min_nodes = 30;
  int target_count = 20;
  double max_gap = 1.0;
};

struct CurationCandidate {
  int batch = 0;
  std::string name;
  double gap = 0.0;
  int nodes = 0;
  bool accepted = false;
  std::string reason;  // empty when accepted
  bool selected = false;
};

struct CurationReport {
  std::vector<CurationCandidate> candidates;
  std::vector<std::string> selected;

  std::string to_csv() const;
};

struct CurationResult {
  std::vector<NamedProgram> pool;
  CurationReport report;
};

// Empty when a candidate with this gap and node count passes the filters.
std::string rejection_reason(double gap, int nodes, const CurationConfig& cfg);
// Index of the median-gap accepted row (lower middle on ties), or -1.
int median_survivor(std::span<const CurationCandidate> rows);

// Solves every candidate with the hybrid plunge selector, filters out gap 0,
// gap > max_gap and fewer than min_nodes nodes, and takes the median-gap
// survivor (lower middle on ties) of each batch until target_count programs
// are collected. Throws PoolExhausted when the batches run out first.
CurationResult curate(std::span<const std::vector<NamedProgram>> batches,
                      const CurationConfig& cfg);

struct TspStreamConfig {
  int min_cities = 8;
  int max_cities = 10;
  int batch_size = 5;  // base instance plus batch_size - 1 mutations
  double sigma = 0.2;
  int max_batches = 400;
};

// Curation over a seeded stream of Euclidean TSP batches.
CurationResult curate_tsp(const TspStreamConfig& stream, const CurationConfig& cfg,
                          std::uint64_t seed);

// The seeded batch stream itself (first `count` batches).
std::vector<std::vector<NamedProgram>> tsp_batches(const TspStreamConfig& stream,
                                                   std::uint64_t seed, int count);

}  // namespace treesel
