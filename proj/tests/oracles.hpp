// Test-only reference implementations. Nothing here calls into the solver
// paths it is used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "treesel/lp.hpp"

namespace oracle {

inline bool row_satisfied(const treesel::Row& row, const std::vector<double>& x,
                          double tol) {
  double lhs = 0.0;
  for (const auto& e : row.coeffs) lhs += e.value * x[e.col];
  switch (row.rel) {
    case treesel::Relation::kLe:
      return lhs <= row.rhs + tol;
    case treesel::Relation::kGe:
      return lhs >= row.rhs - tol;
    case treesel::Relation::kEq:
      return std::abs(lhs - row.rhs) <= tol;
  }
  return false;
}

inline bool feasible(const treesel::LinearProgram& lp, const std::vector<double>& x,
                     double tol) {
  for (int j = 0; j < lp.num_vars; ++j) {
    if (x[j] < lp.lower[j] - tol || x[j] > lp.upper[j] + tol) return false;
  }
  for (const auto& row : lp.rows)
    if (!row_satisfied(row, x, tol)) return false;
  return true;
}

inline double objective(const treesel::LinearProgram& lp, const std::vector<double>& x) {
  double v = 0.0;
  for (int j = 0; j < lp.num_vars; ++j) v += lp.objective[j] * x[j];
  return v;
}

struct VertexResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> point;
};

// Minimum over all basic solutions: every choice of num_vars linearly
// independent active constraints (rows as equalities, finite bounds) is solved
// and kept if feasible. Only valid for bounded feasible regions.
inline VertexResult vertex_enumeration(const treesel::LinearProgram& lp) {
  const int n = lp.num_vars;
  std::vector<Eigen::VectorXd> normals;
  std::vector<double> rhs;
  for (const auto& row : lp.rows) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (const auto& e : row.coeffs) a(e.col) += e.value;
    normals.push_back(a);
    rhs.push_back(row.rhs);
  }
  for (int j = 0; j < n; ++j) {
    for (double b : {lp.lower[j], lp.upper[j]}) {
      if (!std::isfinite(b)) continue;
      Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
      a(j) = 1.0;
      normals.push_back(a);
      rhs.push_back(b);
    }
  }
  const int k = static_cast<int>(normals.size());
  VertexResult best;
  if (k < n) return best;
  std::vector<bool> pick(k, false);
  std::fill(pick.begin(), pick.begin() + n, true);
  do {
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd b(n);
    int r = 0;
    for (int i = 0; i < k; ++i) {
      if (!pick[i]) continue;
      a.row(r) = normals[i].transpose();
      b(r) = rhs[i];
      ++r;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() < n) continue;
    Eigen::VectorXd x = lu.solve(b);
    std::vector<double> xv(x.data(), x.data() + n);
    if (!feasible(lp, xv, 1e-9)) continue;
    const double obj = objective(lp, xv);
    if (!best.feasible || obj < best.objective) {
      best.feasible = true;
      best.objective = obj;
      best.point = xv;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// Exhaustive search over an all-integer program with small finite boxes.
inline VertexResult integer_enumeration(const treesel::LinearProgram& lp) {
  const int n = lp.num_vars;
  std::vector<double> x(n);
  for (int j = 0; j < n; ++j) x[j] = std::ceil(lp.lower[j]);
  VertexResult best;
  for (;;) {
    if (feasible(lp, x, 1e-9)) {
      const double obj = objective(lp, x);
      if (!best.feasible || obj < best.objective) {
        best.feasible = true;
        best.objective = obj;
        best.point = x;
      }
    }
    int j = 0;
    while (j < n) {
      x[j] += 1.0;
      if (x[j] <= std::floor(lp.upper[j])) break;
      x[j] = std::ceil(lp.lower[j]);
      ++j;
    }
    if (j == n) break;
  }
  return best;
}

// Shortest Hamiltonian cycle through all cities by fixing city 0 and
// enumerating permutations of the rest.
inline double best_tour(const std::vector<std::vector<double>>& dist) {
  const int n = static_cast<int>(dist.size());
  std::vector<int> perm(n - 1);
  std::iota(perm.begin(), perm.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    double len = dist[0][perm.front()] + dist[perm.back()][0];
    for (int i = 0; i + 1 < n - 1; ++i) len += dist[perm[i]][perm[i + 1]];
    best = std::min(best, len);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Random all-binary program with integer data: min c·x, rows a·x {<=,>=} b.
inline treesel::LinearProgram random_binary_program(std::mt19937_64& rng, int nvars,
                                                    int nrows) {
  std::uniform_int_distribution<int> coef(-6, 9);
  std::uniform_int_distribution<int> cost(-10, 10);
  std::uniform_int_distribution<int> rel(0, 3);
  auto lp = treesel::LinearProgram::with_vars(nvars);
  for (int j = 0; j < nvars; ++j) {
    lp.objective[j] = cost(rng);
    lp.upper[j] = 1.0;
    lp.is_integer[j] = true;
  }
  for (int i = 0; i < nrows; ++i) {
    std::vector<treesel::SparseEntry> coeffs;
    int sum_pos = 0;
    for (int j = 0; j < nvars; ++j) {
      const int a = coef(rng);
      if (a == 0) continue;
      coeffs.push_back({j, static_cast<double>(a)});
      if (a > 0) sum_pos += a;
    }
    const int r = rel(rng);
    if (r == 0) {
      std::uniform_int_distribution<int> rhs(0, std::max(1, sum_pos / 2));
      lp.add_row(std::move(coeffs), treesel::Relation::kGe, rhs(rng));
    } else {
      std::uniform_int_distribution<int> rhs(0, std::max(1, sum_pos));
      lp.add_row(std::move(coeffs), treesel::Relation::kLe, rhs(rng));
    }
  }
  return lp;
}

}  // namespace oracle
