/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "treesel/errors.hpp"

namespace treesel {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

// Final tableau of an optimal solve. The tableau B^-1 [A | I | Art] and the
// reduced costs depend only on the basis and the cost vector, so they stay
// valid when a later solve only changes variable bounds.
struct TableauSnapshot {
  int num_vars = 0;
  int num_rows = 0;
  std::vector<int> art_row;
  std::vector<double> art_sign;
  RowMatrix tableau;
  Eigen::VectorXd beta;  // B^-1 b
  Eigen::VectorXd reduced;
  std::vector<int> head;
  std::vector<VarState> state;
};

struct BasisAccess {
  static const TableauSnapshot* snapshot(const Basis& b) {
    return b.snapshot_.get();
  }
  static void set_snapshot(Basis& b,
                           std::shared_ptr<const TableauSnapshot> snap) {
    b.snapshot_ = std::move(snap);
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// LinearProgram
// ---------------------------------------------------------------------------

LinearProgram LinearProgram::with_vars(int n) {
  LinearProgram lp;
  lp.num_vars = n;
  lp.objective.assign(n, 0.0);
  lp.lower.assign(n, 0.0);
  lp.upper.assign(n, kInf);
  lp.is_integer.assign(n, false);
  return lp;
}

int LinearProgram::num_integer() const {
  return static_cast<int>(std::count(is_integer.begin(), is_integer.end(), true));
}

void LinearProgram::add_row(std::vector<SparseEntry> coeffs, Relation rel,
                            double rhs) {
  rows.push_back(Row{std::move(coeffs), rel, rhs});
}

void LinearProgram::validate() const {
  validate_structure();
  for (int j = 0; j < num_vars; ++j) {
    if (std::isfinite(lower[j]) && std::isfinite(upper[j]) && lower[j] > upper[j])
      throw InvalidProgram("lower bound exceeds upper bound for variable " +
                           std::to_string(j));
  }
}

void LinearProgram::validate_structure() const {
  const auto n = static_cast<std::size_t>(num_vars);
  if (num_vars < 0) throw InvalidProgram("negative variable count");
  if (objective.size() != n) throw InvalidProgram("objective length != num_vars");
  if (lower.size() != n || upper.size() != n)
    throw InvalidProgram("bound arrays must have num_vars entries");
  if (is_integer.size() != n)
    throw InvalidProgram("integrality flags must have num_vars entries");
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || std::isnan(objective[j]))
      throw InvalidProgram("NaN in bounds or objective");
    if (lower[j] == kInf || upper[j] == -kInf)
      throw InvalidProgram("bound at the wrong infinity for variable " +
                           std::to_string(j));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!std::isfinite(rows[i].rhs))
      throw InvalidProgram("non-finite rhs in row " + std::to_string(i));
    for (const auto& e : rows[i].coeffs) {
      if (e.col < 0 || e.col >= num_vars)
        throw InvalidProgram("column index out of range in row " +
                             std::to_string(i));
      if (!std::isfinite(e.value))
        throw InvalidProgram("non-finite coefficient in row " + std::to_string(i));
    }
  }
}

LinearProgram with_bound(const LinearProgram& lp, int var, BoundSide side,
                         double value) {
  if (var < 0 || var >= lp.num_vars) throw InvalidProgram("variable out of range");
  LinearProgram out = lp;
  if (side == BoundSide::kUpper) {
    out.upper[var] = std::min(out.upper[var], value);
  } else {
    out.lower[var] = std::max(out.lower[var], value);
  }
  return out;
}

PreparedLp::PreparedLp(const LinearProgram& lp) {
  lp.validate_structure();
  const int n = lp.num_vars;
  const int m = lp.num_rows();
  matrix_ = Eigen::MatrixXd::Zero(m, n);
  rhs_.resize(m);
  cost_ = Eigen::Map<const Eigen::VectorXd>(lp.objective.data(), n);
  slack_lower_.resize(m);
  slack_upper_.resize(m);
  for (int i = 0; i < m; ++i) {
    const Row& row = lp.rows[i];
    for (const auto& e : row.coeffs) matrix_(i, e.col) += e.value;
    rhs_(i) = row.rhs;
    // a·x + s = b
    switch (row.rel) {
      case Relation::kLe:
        slack_lower_[i] = 0.0;
        slack_upper_[i] = kInf;
        break;
      case Relation::kGe:
        slack_lower_[i] = -kInf;
        slack_upper_[i] = 0.0;
        break;
      case Relation::kEq:
        slack_lower_[i] = 0.0;
        slack_upper_[i] = 0.0;
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Simplex
// ---------------------------------------------------------------------------

namespace {

constexpr double kDualTol = 1e-9;
constexpr double kHarrisTol = 1e-9;
constexpr double kDegenerateStep = 1e-12;
constexpr int kDegenerateRunBeforeBland = 50;
constexpr int kMaxCleanupRounds = 4;

enum class Phase { kOne, kTwo };
enum class LoopResult { kOptimal, kInfeasible, kUnbounded };

// Raised inside a warm-started solve to request a cold restart.
struct WarmStartRejected {};

class Simplex {
 public:
  Simplex(const PreparedLp& lp, std::span<const double> lower,
          std::span<const double> upper)
      : lp_(lp), n_(lp.num_vars()), m_(lp.num_rows()) {
    struct_lower_.assign(lower.begin(), lower.end());
    struct_upper_.assign(upper.begin(), upper.end());
    max_iterations_ = 50 * (n_ + 2 * m_) + 1000;
  }

  LpOutcome solve_cold();
  LpOutcome solve_warm(const Basis& basis);

  int iterations() const { return iterations_; }

 private:
  int ncols() const { return n_ + m_ + static_cast<int>(art_row_.size()); }
  bool is_art(int j) const { return j >= n_ + m_; }

  double col_lower(int j) const {
    if (j < n_) return struct_lower_[j];
    if (j < n_ + m_) return lp_.slack_lower()[j - n_];
    return art_lower_[j - n_ - m_];
  }
  double col_upper(int j) const {
    if (j < n_) return struct_upper_[j];
    if (j < n_ + m_) return lp_.slack_upper()[j - n_];
    return art_upper_[j - n_ - m_];
  }
  // Column j of [A | I | Art] scattered into `out` (length m).
  void original_column(int j, Eigen::Ref<Eigen::VectorXd> out) const {
    if (j < n_) {
      out = lp_.matrix().col(j);
    } else if (j < n_ + m_) {
      out.setZero();
      out(j - n_) = 1.0;
    } else {
      out.setZero();
      const int a = j - n_ - m_;
      out(art_row_[a]) = art_sign_[a];
    }
  }

  void set_nonbasic_at_bound(int j);
  void compute_reduced_costs();
  LoopResult primal_loop(Phase phase);
  LoopResult dual_loop();
  void pivot(int r, int q);
  void count_iteration(double step);
  bool primal_feasible(double tol) const;
  bool dual_feasible(double tol) const;
  bool refactor_and_verify();
  LoopResult cleanup(LoopResult first);
  void setup_cold();
  void setup_from_snapshot(const detail::TableauSnapshot& snap);
  void setup_from_states(std::span<const VarState> states);
  void normalize_nonbasic_states();
  void recompute_basic_values_from_tableau(const Eigen::VectorXd& beta);
  LpOutcome make_outcome(LoopResult r);

  const PreparedLp& lp_;
  int n_;
  int m_;
  std::vector<double> struct_lower_;
  std::vector<double> struct_upper_;
  std::vector<int> art_row_;
  std::vector<double> art_sign_;
  std::vector<double> art_lower_;
  std::vector<double> art_upper_;

  RowMatrix tableau_;
  Eigen::VectorXd x_;
  Eigen::VectorXd cost_;
  Eigen::VectorXd reduced_;
  Eigen::VectorXd beta_;
  std::vector<int> head_;
  std::vector<VarState> state_;

  int iterations_ = 0;
  int max_iterations_ = 0;
  int degenerate_run_ = 0;
  bool bland_ = false;
};

void Simplex::set_nonbasic_at_bound(int j) {
  const double lo = col_lower(j);
  const double up = col_upper(j);
  if (std::isfinite(lo)) {
    state_[j] = VarState::kAtLower;
    x_(j) = lo;
  } else if (std::isfinite(up)) {
    state_[j] = VarState::kAtUpper;
    x_(j) = up;
  } else {
    state_[j] = VarState::kFree;
    x_(j) = 0.0;
  }
}

void Simplex::compute_reduced_costs() {
  Eigen::VectorXd cb(m_);
  for (int i = 0; i < m_; ++i) cb(i) = cost_(head_[i]);
  reduced_ = cost_;
  if (m_ > 0) reduced_.noalias() -= tableau_.transpose() * cb;
  for (int i = 0; i < m_; ++i) reduced_(head_[i]) = 0.0;
}

void Simplex::count_iteration(double step) {
  ++iterations_;
  if (iterations_ > max_iterations_)
    throw NumericalFailure("simplex iteration limit reached");
  if (step <= kDegenerateStep) {
    if (++degenerate_run_ > kDegenerateRunBeforeBland) bland_ = true;
  } else {
    degenerate_run_ = 0;
    bland_ = false;
  }
}

void Simplex::pivot(int r, int q) {
  const double p = tableau_(r, q);
  if (std::abs(p) < kPivotTol) throw NumericalFailure("pivot below tolerance");
  tableau_.row(r) /= p;
  const Eigen::RowVectorXd prow = tableau_.row(r);
  for (int i = 0; i < m_; ++i) {
    if (i == r) continue;
    const double f = tableau_(i, q);
    if (f != 0.0) tableau_.row(i) -= f * prow;
    tableau_(i, q) = 0.0;
  }
  tableau_(r, q) = 1.0;
  const double dq = reduced_(q);
  if (dq != 0.0) reduced_ -= dq * prow.transpose();
  reduced_(q) = 0.0;
}

bool Simplex::primal_feasible(double tol) const {
  for (int i = 0; i < m_; ++i) {
    const int b = head_[i];
    if (x_(b) < col_lower(b) - tol || x_(b) > col_upper(b) + tol) return false;
  }
  return true;
}

bool Simplex::dual_feasible(double tol) const {
  for (int j = 0; j < ncols(); ++j) {
    if (col_lower(j) == col_upper(j)) continue;
    switch (state_[j]) {
      case VarState::kBasic:
        break;
      case VarState::kAtLower:
        if (reduced_(j) < -tol) return false;
        break;
      case VarState::kAtUpper:
        if (reduced_(j) > tol) return false;
        break;
      case VarState::kFree:
        if (std::abs(reduced_(j)) > tol) return false;
        break;
    }
  }
  return true;
}

// Bounded primal simplex: Dantzig pricing with lowest-index ties, Harris
// two-pass ratio test; switches to Bland's rule on long degenerate runs.
LoopResult Simplex::primal_loop(Phase phase) {
  for (;;) {
    int q = -1;
    double best = 0.0;
    for (int j = 0; j < ncols(); ++j) {
      if (state_[j] == VarState::kBasic) continue;
      const double lo = col_lower(j);
      const double up = col_upper(j);
      if (lo == up) continue;
      const double d = reduced_(j);
      double score = 0.0;
      if (state_[j] == VarState::kAtLower && d < -kDualTol) score = -d;
      else if (state_[j] == VarState::kAtUpper && d > kDualTol) score = d;
      else if (state_[j] == VarState::kFree && std::abs(d) > kDualTol)
        score = std::abs(d);
      if (score <= 0.0) continue;
      if (bland_) {
        q = j;
        break;
      }
      if (score > best) {
        best = score;
        q = j;
      }
    }
    if (q < 0) return LoopResult::kOptimal;

    const double dir = reduced_(q) < 0.0 ? 1.0 : -1.0;
    // Basic variable i moves at rate delta_i = -dir * T(i, q).
    double tmax = kInf;
    if (!bland_) {
      for (int i = 0; i < m_; ++i) {
        const double a = tableau_(i, q);
        if (std::abs(a) <= kPivotTol) continue;
        const double delta = -dir * a;
        const int b = head_[i];
        double lim = kInf;
        if (delta < 0.0 && std::isfinite(col_lower(b)))
          lim = (x_(b) - col_lower(b) + kHarrisTol) / -delta;
        else if (delta > 0.0 && std::isfinite(col_upper(b)))
          lim = (col_upper(b) - x_(b) + kHarrisTol) / delta;
        tmax = std::min(tmax, lim);
      }
    }
    int r = -1;
    double step = kInf;
    double rpiv = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double a = tableau_(i, q);
      if (std::abs(a) <= kPivotTol) continue;
      const double delta = -dir * a;
      const int b = head_[i];
      double lim = kInf;
      if (delta < 0.0 && std::isfinite(col_lower(b)))
        lim = std::max(0.0, (x_(b) - col_lower(b)) / -delta);
      else if (delta > 0.0 && std::isfinite(col_upper(b)))
        lim = std::max(0.0, (col_upper(b) - x_(b)) / delta);
      if (!std::isfinite(lim)) continue;
      if (bland_) {
        if (lim < step || (lim == step && r >= 0 && b < head_[r])) {
          step = lim;
          r = i;
        }
      } else if (lim <= tmax && std::abs(a) > rpiv) {
        rpiv = std::abs(a);
        step = lim;
        r = i;
      }
    }
    const double flip = col_upper(q) - col_lower(q);
    const bool do_flip = std::isfinite(flip) && (r < 0 || flip <= step);
    if (do_flip) step = flip;
    if (r < 0 && !do_flip) {
      if (phase == Phase::kOne)
        throw NumericalFailure("unbounded phase-1 direction");
      return LoopResult::kUnbounded;
    }

    x_(q) += dir * step;
    for (int i = 0; i < m_; ++i) x_(head_[i]) -= dir * step * tableau_(i, q);
    count_iteration(step);
    if (do_flip) {
      state_[q] = state_[q] == VarState::kAtLower ? VarState::kAtUpper
                                                   : VarState::kAtLower;
      x_(q) = state_[q] == VarState::kAtLower ? col_lower(q) : col_upper(q);
      continue;
    }
    const int leaving = head_[r];
    const double delta = -dir * tableau_(r, q);
    if (delta < 0.0) {
      state_[leaving] = VarState::kAtLower;
      x_(leaving) = col_lower(leaving);
    } else {
      state_[leaving] = VarState::kAtUpper;
      x_(leaving) = col_upper(leaving);
    }
    pivot(r, q);
    head_[r] = q;
    state_[q] = VarState::kBasic;
  }
}

// Bounded dual simplex from a dual-feasible basis.
LoopResult Simplex::dual_loop() {
  for (;;) {
    int r = -1;
    double worst = kFeasibilityTol;
    for (int i = 0; i < m_; ++i) {
      const int b = head_[i];
      const double viol = std::max(col_lower(b) - x_(b), x_(b) - col_upper(b));
      if (viol <= kFeasibilityTol) continue;
      if (bland_) {
        if (r < 0 || b < head_[r]) r = i;
      } else if (viol > worst) {
        worst = viol;
        r = i;
      }
    }
    if (r < 0) return LoopResult::kOptimal;

    const int leaving = head_[r];
    const bool to_lower = x_(leaving) < col_lower(leaving);
    const double target = to_lower ? col_lower(leaving) : col_upper(leaving);
    // s = +1 when the leaving variable must increase.
    const double s = to_lower ? 1.0 : -1.0;

    auto eligible = [&](int j, double a) {
      if (state_[j] == VarState::kBasic) return false;
      if (col_lower(j) == col_upper(j)) return false;
      if (std::abs(a) <= kPivotTol) return false;
      switch (state_[j]) {
        case VarState::kAtLower:
          return a * s < 0.0;
        case VarState::kAtUpper:
          return a * s > 0.0;
        case VarState::kFree:
          return true;
        default:
          return false;
      }
    };

    double tmax = kInf;
    if (!bland_) {
      for (int j = 0; j < ncols(); ++j) {
        const double a = tableau_(r, j);
        if (!eligible(j, a)) continue;
        tmax = std::min(tmax, (std::abs(reduced_(j)) + kDualTol) / std::abs(a));
      }
    }
    int q = -1;
    double ratio_q = kInf;
    double qpiv = 0.0;
    for (int j = 0; j < ncols(); ++j) {
      const double a = tableau_(r, j);
      if (!eligible(j, a)) continue;
      const double ratio = std::abs(reduced_(j)) / std::abs(a);
      if (bland_) {
        if (ratio < ratio_q) {
          ratio_q = ratio;
          q = j;
        }
      } else if (ratio <= tmax && std::abs(a) > qpiv) {
        qpiv = std::abs(a);
        ratio_q = ratio;
        q = j;
      }
    }
    if (q < 0) return LoopResult::kInfeasible;

    const double alpha = tableau_(r, q);
    const double theta = (x_(leaving) - target) / alpha;
    x_(q) += theta;
    for (int i = 0; i < m_; ++i) x_(head_[i]) -= tableau_(i, q) * theta;
    x_(leaving) = target;
    state_[leaving] = to_lower ? VarState::kAtLower : VarState::kAtUpper;
    count_iteration(ratio_q);
    pivot(r, q);
    head_[r] = q;
    state_[q] = VarState::kBasic;
  }
}

// Rebuilds basic values, tableau and reduced costs from an LU factorization
// of the current basis. Returns true when the refreshed point is primal and
// dual feasible within tolerance.
bool Simplex::refactor_and_verify() {
  const int nc = ncols();
  if (m_ == 0) {
    compute_reduced_costs();
    beta_.resize(0);
    return dual_feasible(kFeasibilityTol);
  }
  Eigen::MatrixXd basis_matrix(m_, m_);
  for (int i = 0; i < m_; ++i) original_column(head_[i], basis_matrix.col(i));
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
  if (!(lu.rcond() > 1e-14)) throw NumericalFailure("singular basis");

  Eigen::MatrixXd full(m_, nc);
  for (int j = 0; j < nc; ++j) original_column(j, full.col(j));
  tableau_ = lu.solve(full);
  for (int i = 0; i < m_; ++i) {
    tableau_.col(head_[i]).setZero();
    tableau_(i, head_[i]) = 1.0;
  }
  beta_ = lu.solve(lp_.rhs());

  Eigen::VectorXd rhs = lp_.rhs();
  for (int j = 0; j < nc; ++j) {
    if (state_[j] == VarState::kBasic || x_(j) == 0.0) continue;
    rhs -= full.col(j) * x_(j);
  }
  const Eigen::VectorXd xb = lu.solve(rhs);
  for (int i = 0; i < m_; ++i) x_(head_[i]) = xb(i);
  compute_reduced_costs();
  return primal_feasible(kFeasibilityTol) && dual_feasible(kFeasibilityTol);
}

LoopResult Simplex::cleanup(LoopResult first) {
  LoopResult result = first;
  for (int round = 0; round < kMaxCleanupRounds; ++round) {
    if (result == LoopResult::kUnbounded) return result;
    if (result == LoopResult::kOptimal && refactor_and_verify())
      return LoopResult::kOptimal;
    if (result == LoopResult::kInfeasible) {
      // Confirm on a fresh factorization before reporting infeasibility.
      refactor_and_verify();
      if (!dual_feasible(kFeasibilityTol))
        throw NumericalFailure("dual infeasible basis after refactorization");
      result = dual_loop();
      if (result == LoopResult::kInfeasible) return result;
      continue;
    }
    if (primal_feasible(kFeasibilityTol)) {
      result = primal_loop(Phase::kTwo);
    } else if (dual_feasible(kFeasibilityTol)) {
      result = dual_loop();
    } else {
      throw NumericalFailure("lost feasibility after refactorization");
    }
  }
  throw NumericalFailure("simplex did not converge to a verified optimum");
}

void Simplex::setup_cold() {
  art_row_.clear();
  art_sign_.clear();
  const int nstruct_slack = n_ + m_;
  x_ = Eigen::VectorXd::Zero(nstruct_slack);
  state_.assign(nstruct_slack, VarState::kAtLower);
  for (int j = 0; j < n_; ++j) set_nonbasic_at_bound(j);

  Eigen::VectorXd xn = x_.head(n_);
  Eigen::VectorXd residual = lp_.rhs();
  if (n_ > 0 && m_ > 0) residual.noalias() -= lp_.matrix() * xn;

  head_.assign(m_, -1);
  std::vector<double> art_value;
  std::vector<int> row_art(m_, -1);
  for (int i = 0; i < m_; ++i) {
    const int s = n_ + i;
    const double lo = lp_.slack_lower()[i];
    const double up = lp_.slack_upper()[i];
    const double r = residual(i);
    if (r >= lo && r <= up) {
      head_[i] = s;
      state_[s] = VarState::kBasic;
      x_(s) = r;
      continue;
    }
    const double v = std::clamp(r, lo, up);
    state_[s] = v == lo ? VarState::kAtLower : VarState::kAtUpper;
    x_(s) = v;
    row_art[i] = static_cast<int>(art_row_.size());
    art_row_.push_back(i);
    art_sign_.push_back(r > v ? 1.0 : -1.0);
    art_value.push_back(std::abs(r - v));
  }
  const int nart = static_cast<int>(art_row_.size());
  art_lower_.assign(nart, 0.0);
  art_upper_.assign(nart, kInf);
  const int nc = ncols();
  x_.conservativeResize(nc);
  state_.resize(nc, VarState::kBasic);
  for (int a = 0; a < nart; ++a) {
    const int j = n_ + m_ + a;
    head_[art_row_[a]] = j;
    x_(j) = art_value[a];
  }

  // B is diagonal with entries 1 (slack) or art_sign (artificial), so
  // B^-1 [A | I | Art] is a row-scaled copy of the original columns.
  tableau_ = RowMatrix::Zero(m_, nc);
  if (n_ > 0) tableau_.leftCols(n_) = lp_.matrix();
  for (int i = 0; i < m_; ++i) tableau_(i, n_ + i) = 1.0;
  for (int a = 0; a < nart; ++a) {
    const int i = art_row_[a];
    tableau_(i, n_ + m_ + a) = art_sign_[a];
    tableau_.row(i) *= art_sign_[a];
  }
}

void Simplex::normalize_nonbasic_states() {
  for (int j = 0; j < ncols(); ++j) {
    if (state_[j] == VarState::kBasic) continue;
    const double lo = col_lower(j);
    const double up = col_upper(j);
    VarState s = state_[j];
    if (s == VarState::kAtLower && !std::isfinite(lo)) s = VarState::kAtUpper;
    if (s == VarState::kAtUpper && !std::isfinite(up))
      s = std::isfinite(lo) ? VarState::kAtLower : VarState::kFree;
    if (s == VarState::kAtUpper && !std::isfinite(up)) s = VarState::kFree;
    if (s == VarState::kFree && std::isfinite(lo)) s = VarState::kAtLower;
    if (s == VarState::kFree && std::isfinite(up)) s = VarState::kAtUpper;
    // Crossed bounds (lo > up) would make the nonbasic point meaningless;
    // a bound-flip is not defined there.
    if (std::isfinite(lo) && std::isfinite(up) && lo > up) throw WarmStartRejected{};
    state_[j] = s;
    x_(j) = s == VarState::kAtLower ? lo : s == VarState::kAtUpper ? up : 0.0;
  }
  // Boxed nonbasic columns sit at whichever bound keeps them dual feasible.
  for (int j = 0; j < ncols(); ++j) {
    if (state_[j] == VarState::kBasic) continue;
    const double lo = col_lower(j);
    const double up = col_upper(j);
    if (!std::isfinite(lo) || !std::isfinite(up) || lo == up) continue;
    if (state_[j] == VarState::kAtLower && reduced_(j) < -kDualTol) {
      state_[j] = VarState::kAtUpper;
      x_(j) = up;
    } else if (state_[j] == VarState::kAtUpper && reduced_(j) > kDualTol) {
      state_[j] = VarState::kAtLower;
      x_(j) = lo;
    }
  }
}

void Simplex::recompute_basic_values_from_tableau(const Eigen::VectorXd& beta) {
  Eigen::VectorXd xb = beta;
  for (int j = 0; j < ncols(); ++j) {
    if (state_[j] == VarState::kBasic || x_(j) == 0.0) continue;
    xb -= tableau_.col(j) * x_(j);
  }
  for (int i = 0; i < m_; ++i) x_(head_[i]) = xb(i);
}

void Simplex::setup_from_snapshot(const detail::TableauSnapshot& snap) {
  art_row_ = snap.art_row;
  art_sign_ = snap.art_sign;
  art_lower_.assign(art_row_.size(), 0.0);
  art_upper_.assign(art_row_.size(), 0.0);
  tableau_ = snap.tableau;
  head_ = snap.head;
  state_ = snap.state;
  reduced_ = snap.reduced;
  cost_ = Eigen::VectorXd::Zero(ncols());
  cost_.head(n_) = lp_.cost();
  x_ = Eigen::VectorXd::Zero(ncols());
  normalize_nonbasic_states();
  recompute_basic_values_from_tableau(snap.beta);
}

void Simplex::setup_from_states(std::span<const VarState> states) {
  if (static_cast<int>(states.size()) != n_ + m_) throw WarmStartRejected{};
  art_row_.clear();
  art_sign_.clear();
  art_lower_.clear();
  art_upper_.clear();
  state_.assign(states.begin(), states.end());
  head_.clear();
  for (int j = 0; j < n_ + m_; ++j)
    if (state_[j] == VarState::kBasic) head_.push_back(j);
  if (static_cast<int>(head_.size()) != m_) throw WarmStartRejected{};
  cost_ = Eigen::VectorXd::Zero(ncols());
  cost_.head(n_) = lp_.cost();
  x_ = Eigen::VectorXd::Zero(ncols());
  reduced_ = Eigen::VectorXd::Zero(ncols());
  for (int j = 0; j < ncols(); ++j) {
    if (state_[j] != VarState::kBasic) set_nonbasic_at_bound(j);
  }
  try {
    refactor_and_verify();
  } catch (const NumericalFailure&) {
    throw WarmStartRejected{};
  }
  normalize_nonbasic_states();
  recompute_basic_values_from_tableau(beta_);
}

LpOutcome Simplex::make_outcome(LoopResult r) {
  LpOutcome out;
  out.iterations = iterations_;
  if (r == LoopResult::kInfeasible) {
    out.status = LpStatus::kInfeasible;
    return out;
  }
  if (r == LoopResult::kUnbounded) {
    out.status = LpStatus::kUnbounded;
    return out;
  }
  out.status = LpStatus::kOptimal;
  out.solution.resize(n_);
  double obj = 0.0;
  for (int j = 0; j < n_; ++j) {
    const double v = std::clamp(x_(j), struct_lower_[j], struct_upper_[j]);
    out.solution[j] = v;
    obj += lp_.cost()(j) * v;
  }
  out.objective_value = obj;

  std::vector<VarState> public_states(state_.begin(), state_.begin() + n_ + m_);
  Basis basis(std::move(public_states));
  auto snap = std::make_shared<detail::TableauSnapshot>();
  snap->num_vars = n_;
  snap->num_rows = m_;
  snap->art_row = art_row_;
  snap->art_sign = art_sign_;
  snap->tableau = tableau_;
  snap->beta = beta_;
  snap->reduced = reduced_;
  snap->head = head_;
  snap->state = state_;
  detail::BasisAccess::set_snapshot(basis, std::move(snap));
  out.basis = std::move(basis);
  return out;
}

LpOutcome Simplex::solve_warm(const Basis& basis) {
  iterations_ = 0;
  degenerate_run_ = 0;
  bland_ = false;
  const auto* snap = detail::BasisAccess::snapshot(basis);
  if (snap != nullptr && snap->num_vars == n_ && snap->num_rows == m_) {
    setup_from_snapshot(*snap);
  } else {
    setup_from_states(basis.states());
  }
  if (!dual_feasible(kFeasibilityTol)) throw WarmStartRejected{};
  return make_outcome(cleanup(dual_loop()));
}

LpOutcome Simplex::solve_cold() {
  iterations_ = 0;
  degenerate_run_ = 0;
  bland_ = false;
  setup_cold();
  const int nart = static_cast<int>(art_row_.size());
  if (nart > 0) {
    cost_ = Eigen::VectorXd::Zero(ncols());
    cost_.tail(nart).setOnes();
    compute_reduced_costs();
    primal_loop(Phase::kOne);
    double infeasibility = 0.0;
    for (int a = 0; a < nart; ++a) infeasibility += x_(n_ + m_ + a);
    const double scale = 1.0 + (m_ > 0 ? lp_.rhs().cwiseAbs().maxCoeff() : 0.0);
    if (infeasibility > kFeasibilityTol * scale) {
      LpOutcome out;
      out.status = LpStatus::kInfeasible;
      out.iterations = iterations_;
      return out;
    }
    // Artificials are pinned to zero for phase two. Basic ones are pivoted
    // out where a structural or slack column offers a usable pivot.
    for (int a = 0; a < nart; ++a) {
      art_upper_[a] = 0.0;
      const int j = n_ + m_ + a;
      if (state_[j] != VarState::kBasic) {
        state_[j] = VarState::kAtLower;
        x_(j) = 0.0;
      }
    }
    for (int i = 0; i < m_; ++i) {
      if (!is_art(head_[i])) continue;
      int best = -1;
      double best_abs = 1e-7;
      for (int j = 0; j < n_ + m_; ++j) {
        if (state_[j] == VarState::kBasic) continue;
        const double a = std::abs(tableau_(i, j));
        if (a > best_abs) {
          best_abs = a;
          best = j;
        }
      }
      if (best < 0) continue;
      const int art = head_[i];
      const double theta = x_(art) / tableau_(i, best);
      x_(best) += theta;
      for (int k = 0; k < m_; ++k) x_(head_[k]) -= tableau_(k, best) * theta;
      x_(art) = 0.0;
      state_[art] = VarState::kAtLower;
      pivot(i, best);
      head_[i] = best;
      state_[best] = VarState::kBasic;
    }
  }
  cost_ = Eigen::VectorXd::Zero(ncols());
  cost_.head(n_) = lp_.cost();
  compute_reduced_costs();
  degenerate_run_ = 0;
  bland_ = false;
  return make_outcome(cleanup(primal_loop(Phase::kTwo)));
}

}  // namespace

LpOutcome solve_lp(const PreparedLp& lp, std::span<const double> lower,
                   std::span<const double> upper, const Basis* warm_start) {
  if (static_cast<int>(lower.size()) != lp.num_vars() ||
      static_cast<int>(upper.size()) != lp.num_vars())
    throw InvalidProgram("bound arrays must have num_vars entries");
  for (std::size_t j = 0; j < lower.size(); ++j) {
    // Crossing bounds: the box is empty.
    if (lower[j] > upper[j]) {
      LpOutcome out;
      out.status = LpStatus::kInfeasible;
      return out;
    }
  }
  int spent = 0;
  if (warm_start != nullptr) {
    Simplex warm(lp, lower, upper);
    try {
      return warm.solve_warm(*warm_start);
    } catch (const WarmStartRejected&) {
    } catch (const NumericalFailure&) {
    }
    spent = warm.iterations();
  }
  Simplex cold(lp, lower, upper);
  LpOutcome out = cold.solve_cold();
  out.iterations += spent;
  return out;
}

LpOutcome solve_lp(const LinearProgram& lp, const Basis* warm_start) {
  PreparedLp prepared(lp);
  return solve_lp(prepared, lp.lower, lp.upper, warm_start);
}

}  // namespace treesel
