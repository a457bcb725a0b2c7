/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace treesel {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Absolute primal feasibility tolerance used by the simplex and by callers that
// verify LP solutions.
inline constexpr double kFeasibilityTol = 1e-7;
// A value within this distance of an integer counts as integral.
inline constexpr double kIntegralityTol = 1e-6;
// Tableau entries below this magnitude are never used as pivots.
inline constexpr double kPivotTol = 1e-10;

enum class Relation { kLe, kGe, kEq };
enum class BoundSide { kLower, kUpper };

struct SparseEntry {
  int col = 0;
  double value = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

struct Row {
  std::vector<SparseEntry> coeffs;
  Relation rel = Relation::kLe;
  double rhs = 0.0;

  friend bool operator==(const Row&, const Row&) = default;
};

// min objective·x subject to rows and per-variable bounds. Integrality is
// carried as flags; the LP solver ignores them.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<Row> rows;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> is_integer;

  // Creates `n` continuous variables in [0, +inf) with zero cost.
  static LinearProgram with_vars(int n);

  int num_rows() const { return static_cast<int>(rows.size()); }
  int num_integer() const;

  // Throws InvalidProgram when an invariant is violated.
  void validate() const;
  // Shape, index and finiteness checks only; crossed bounds pass (they are
  // what branching produces and the solver reports them as infeasible).
  void validate_structure() const;

  void add_row(std::vector<SparseEntry> coeffs, Relation rel, double rhs);

  friend bool operator==(const LinearProgram&, const LinearProgram&) = default;
};

// Copy of `lp` with the named bound tightened: the new upper bound is
// min(upper, value), the new lower bound max(lower, value). Crossing bounds are
// kept as-is and make the program infeasible.
LinearProgram with_bound(const LinearProgram& lp, int var, BoundSide side,
                         double value);

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

enum class VarState : std::uint8_t { kBasic, kAtLower, kAtUpper, kFree };

namespace detail {
struct TableauSnapshot;
struct BasisAccess;
}  // namespace detail

// Simplex basis over the structural columns followed by one slack per row.
// Bases returned by `solve_lp` also carry the final tableau so that a solve
// of the same program with tightened bounds can restart with dual simplex
// without refactorizing.
class Basis {
 public:
  Basis() = default;
  explicit Basis(std::vector<VarState> states) : states_(std::move(states)) {}

  std::span<const VarState> states() const { return states_; }
  bool has_snapshot() const { return snapshot_ != nullptr; }

 private:
  friend struct detail::BasisAccess;
  std::vector<VarState> states_;
  std::shared_ptr<const detail::TableauSnapshot> snapshot_;
};

struct LpOutcome {
  LpStatus status = LpStatus::kInfeasible;
  // Present (non-empty) iff status is kOptimal.
  std::vector<double> solution;
  // NaN unless status is kOptimal.
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::optional<Basis> basis;
};

// Dense constraint data of a program, built once and reused across solves
// that differ only in variable bounds (the branch-and-bound access pattern).
class PreparedLp {
 public:
  explicit PreparedLp(const LinearProgram& lp);

  int num_vars() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(rhs_.size()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }
  const Eigen::VectorXd& cost() const { return cost_; }
  std::span<const double> slack_lower() const { return slack_lower_; }
  std::span<const double> slack_upper() const { return slack_upper_; }

 private:
  Eigen::MatrixXd matrix_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd cost_;
  std::vector<double> slack_lower_;
  std::vector<double> slack_upper_;
};

// Bounded-variable primal simplex (cold start) or dual simplex (warm start
// from a basis of the same program). Throws NumericalFailure when neither a
// warm nor a cold attempt produces a verified answer.
LpOutcome solve_lp(const LinearProgram& lp, const Basis* warm_start = nullptr);

LpOutcome solve_lp(const PreparedLp& lp, std::span<const double> lower,
                   std::span<const double> upper,
                   const Basis* warm_start = nullptr);

}  // namespace treesel
