/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "treesel/errors.hpp"
#include "treesel/features.hpp"
#include "treesel/selectors.hpp"

namespace treesel {

namespace {

// Cached simplex tableaus are large for big programs; beyond this many bytes
// in flight the oldest ones are dropped to plain state vectors.
constexpr double kSnapshotBudgetBytes = 256.0 * 1024 * 1024;

}  // namespace

const char* to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::kOpen: return "open";
    case NodeStatus::kBranched: return "branched";
    case NodeStatus::kPrunedByBound: return "pruned";
    case NodeStatus::kInfeasible: return "infeasible";
    case NodeStatus::kIntegral: return "integral";
    case NodeStatus::kDiscarded: return "discarded";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kOptimal: return "optimal";
    case Termination::kInfeasible: return "infeasible";
    case Termination::kNodeBudget: return "node_budget";
    case Termination::kTimeBudget: return "time_budget";
  }
  return "?";
}

double compute_gap(double primal, double dual) {
  if (std::isinf(primal) && primal > 0) return kInf;
  if (primal == dual) return 0.0;
  if (std::isinf(dual)) return kInf;
  const double denom = std::max({std::abs(primal), std::abs(dual), 1e-9});
  return std::max(0.0, (primal - dual) / denom);
}

LinearProgram relax(const LinearProgram& p) {
  LinearProgram out = p;
  std::fill(out.is_integer.begin(), out.is_integer.end(), false);
  return out;
}

std::optional<int> select_branch_variable(std::span<const double> solution,
                                          const std::vector<bool>& is_integer) {
  std::optional<int> best;
  double best_dist = kInf;
  for (std::size_t j = 0; j < solution.size() && j < is_integer.size(); ++j) {
    if (!is_integer[j]) continue;
    const double f = solution[j] - std::floor(solution[j]);
    if (f <= kIntegralityTol || f >= 1.0 - kIntegralityTol) continue;
    const double d = std::abs(f - 0.5);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

BnbTree::BnbTree(LinearProgram problem)
    : problem_(std::move(problem)), prepared_(problem_) {
  problem_.validate();
  BnbNode root;
  root.id = 0;
  nodes_.push_back(root);
  warm_.emplace_back();
  open_.insert(0);
  const double per_snapshot =
      8.0 * (prepared_.num_rows() + 1.0) *
      (prepared_.num_vars() + prepared_.num_rows() + 1.0);
  max_snapshots_ = std::max<std::size_t>(
      4, static_cast<std::size_t>(kSnapshotBudgetBytes / per_snapshot));
}

double BnbTree::dual_bound() const {
  if (open_.empty()) return primal_bound();
  double best = kInf;
  for (NodeId id : open_) best = std::min(best, nodes_[id].lp_bound);
  return std::min(best, primal_bound());
}

void BnbTree::node_bounds(NodeId node, std::vector<double>& lower,
                          std::vector<double>& upper) const {
  lower = problem_.lower;
  upper = problem_.upper;
  for (NodeId id = node; id != kNoNode; id = nodes_[id].parent) {
    const auto& change = nodes_[id].local_bound;
    if (!change) continue;
    if (change->side == BoundSide::kUpper)
      upper[change->var] = std::min(upper[change->var], change->value);
    else
      lower[change->var] = std::max(lower[change->var], change->value);
  }
}

std::pair<NodeId, NodeId> BnbTree::branch(NodeId node, int var, double value) {
  BnbNode& parent = nodes_.at(node);
  if (parent.status != NodeStatus::kOpen)
    throw std::logic_error("branch: node is not open");
  if (var < 0 || var >= problem_.num_vars)
    throw std::out_of_range("branch: variable index out of range");
  const double f = value - std::floor(value);
  if (f <= kIntegralityTol || f >= 1.0 - kIntegralityTol)
    throw std::invalid_argument("branch: value is integral");

  const NodeId left = static_cast<NodeId>(nodes_.size());
  const NodeId right = left + 1;
  for (int k = 0; k < 2; ++k) {
    BnbNode child;
    child.id = left + k;
    child.parent = node;
    child.depth = nodes_[node].depth + 1;
    child.local_bound = BoundChange{
        var, k == 0 ? BoundSide::kUpper : BoundSide::kLower,
        k == 0 ? std::floor(value) : std::ceil(value)};
    child.lp_bound = nodes_[node].lp_bound;
    child.estimate = nodes_[node].estimate;
    child.lp_summary = nodes_[node].lp_summary;
    nodes_.push_back(std::move(child));
    warm_.push_back(warm_[node]);
    open_.insert(left + k);
  }
  BnbNode& p = nodes_[node];
  p.children = {left, right};
  p.status = NodeStatus::kBranched;
  open_.erase(node);
  warm_[node].reset();
  return {left, right};
}

bool BnbTree::prunable(double bound) const {
  if (!incumbent_) return false;
  const double z = incumbent_->objective;
  return bound >= z - 1e-9 * std::max(1.0, std::abs(z));
}

void BnbTree::close(NodeId id, NodeStatus status) {
  nodes_[id].status = status;
  open_.erase(id);
  warm_[id].reset();
}

void BnbTree::prune_open_leaves() {
  std::vector<NodeId> doomed;
  for (NodeId id : open_)
    if (prunable(nodes_[id].lp_bound)) doomed.push_back(id);
  for (NodeId id : doomed) close(id, NodeStatus::kPrunedByBound);
}

void BnbTree::share_basis(NodeId parent, Basis basis) {
  auto shared = std::make_shared<const Basis>(std::move(basis));
  for (NodeId c : nodes_[parent].children) warm_[c] = shared;
  if (!shared->has_snapshot()) return;
  snapshot_owners_.push_back(parent);
  while (snapshot_owners_.size() > max_snapshots_) {
    const NodeId old = snapshot_owners_.front();
    snapshot_owners_.pop_front();
    std::shared_ptr<const Basis> slim;
    for (NodeId c : nodes_[old].children) {
      if (!warm_[c]) continue;
      if (!slim)
        slim = std::make_shared<const Basis>(std::vector<VarState>(
            warm_[c]->states().begin(), warm_[c]->states().end()));
      warm_[c] = slim;
    }
  }
}

NodeStatus BnbTree::process_node(NodeId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size() ||
      nodes_[id].status != NodeStatus::kOpen)
    throw NotACandidate("process_node: node " + std::to_string(id) +
                        " is not open");
  ++selections_;
  last_processed_ = id;

  std::vector<double> lower, upper;
  node_bounds(id, lower, upper);
  LpOutcome out;
  try {
    out = solve_lp(prepared_, lower, upper, warm_[id].get());
  } catch (const NumericalFailure&) {
    ++discarded_;
    close(id, NodeStatus::kDiscarded);
    return NodeStatus::kDiscarded;
  }
  warm_[id].reset();

  BnbNode& node = nodes_[id];
  node.lp_solved = true;
  if (out.status == LpStatus::kUnbounded)
    throw UnboundedProblem("node relaxation is unbounded");
  if (out.status == LpStatus::kInfeasible) {
    node.lp_summary = LpSummary{};
    node.lp_summary.lp_iterations = out.iterations;
    close(id, NodeStatus::kInfeasible);
    return NodeStatus::kInfeasible;
  }

  node.lp_bound = std::max(out.objective_value, node.lp_bound);
  node.lp_summary = summarize_lp(out.solution, problem_.is_integer, out.iterations);
  node.estimate = node_estimate(node.lp_bound, out.solution, problem_);

  if (prunable(node.lp_bound)) {
    close(id, NodeStatus::kPrunedByBound);
    return NodeStatus::kPrunedByBound;
  }

  const auto var = select_branch_variable(out.solution, problem_.is_integer);
  if (!var) {
    close(id, NodeStatus::kIntegral);
    if (!incumbent_ || out.objective_value < incumbent_->objective) {
      incumbent_ = Incumbent{std::move(out.solution), out.objective_value};
      prune_open_leaves();
    }
    return NodeStatus::kIntegral;
  }

  branch(id, *var, out.solution[*var]);
  if (out.basis) share_basis(id, std::move(*out.basis));
  return NodeStatus::kBranched;
}

SolveResult solve(const LinearProgram& p, NodeSelector& selector, const Budget& budget,
                  const std::function<void(const BnbTree&)>& on_finish) {
  if (budget.max_nodes <= 0 || !(budget.max_seconds > 0))
    throw std::invalid_argument("solve: budget must be positive");
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  BnbTree tree(p);
  SolveResult res;
  res.terminated_by = Termination::kOptimal;
  while (!tree.open_leaves().empty()) {
    if (res.nodes_processed >= budget.max_nodes) {
      res.terminated_by = Termination::kNodeBudget;
      break;
    }
    if (std::isfinite(budget.max_seconds)) {
      const double elapsed =
          std::chrono::duration<double>(Clock::now() - start).count();
      if (elapsed >= budget.max_seconds) {
        res.terminated_by = Termination::kTimeBudget;
        break;
      }
    }
    TraceRecord rec;
    rec.candidates = static_cast<int>(tree.open_leaves().size());
    rec.selected = selector.select(tree);
    if (!tree.open_leaves().contains(rec.selected))
      throw NotACandidate("selector " + selector.name() +
                          " returned a node outside the open set");
    rec.discarded = tree.process_node(rec.selected) == NodeStatus::kDiscarded;
    ++res.nodes_processed;
    rec.gap_after = tree.gap();
    res.trace.push_back(rec);
  }
  if (res.terminated_by == Termination::kOptimal && !tree.incumbent())
    res.terminated_by = Termination::kInfeasible;

  res.final_gap = tree.gap();
  res.tree_size = static_cast<int>(tree.size());
  res.discarded_nodes = tree.discarded();
  res.primal_bound = tree.primal_bound();
  res.dual_bound = tree.dual_bound();
  res.incumbent = tree.incumbent();
  if (on_finish) on_finish(tree);
  return res;
}

}  // namespace treesel
