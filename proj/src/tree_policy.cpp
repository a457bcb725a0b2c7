/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/tree_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "treesel/errors.hpp"

namespace treesel {

namespace {

using nn::Matrix;
using nn::SparseMatrix;
using nn::Tape;
using nn::Var;

bool sends_message(NodeStatus s) {
  return s != NodeStatus::kPrunedByBound && s != NodeStatus::kInfeasible &&
         s != NodeStatus::kDiscarded;
}

// 0.5 on (parent, child) for each message-carrying child.
SparseMatrix child_mean_matrix(const TreeShape& shape) {
  std::vector<Eigen::Triplet<double>> t;
  for (int n = 0; n < shape.size(); ++n)
    for (NodeId c : shape.children[n])
      if (c != kNoNode) t.emplace_back(n, c, 0.5);
  SparseMatrix a(shape.size(), shape.size());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

SparseMatrix own_node_matrix(const TreeShape& shape, std::span<const NodeId> candidates) {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    t.emplace_back(static_cast<int>(i), candidates[i], 1.0 / (shape.depth[candidates[i]] + 1));
  SparseMatrix s(static_cast<Eigen::Index>(candidates.size()), shape.size());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

}  // namespace

TreeShape TreeShape::from_tree(const BnbTree& tree, std::vector<NodeId>* kept) {
  TreeShape s;
  const auto nodes = tree.nodes();
  std::vector<NodeId> remap(nodes.size());
  if (kept) {
    kept->clear();
    for (const BnbNode& n : nodes) {
      remap[n.id] = sends_message(n.status) ? static_cast<NodeId>(kept->size()) : kNoNode;
      if (remap[n.id] != kNoNode) kept->push_back(n.id);
    }
  } else {
    std::iota(remap.begin(), remap.end(), 0);
  }
  for (const BnbNode& n : nodes) {
    if (remap[n.id] == kNoNode) continue;
    s.parent.push_back(n.parent == kNoNode ? kNoNode : remap[n.parent]);
    s.depth.push_back(n.depth);
    std::array<NodeId, 2> kids{kNoNode, kNoNode};
    for (int k = 0; k < 2; ++k) {
      const NodeId c = n.children[k];
      if (c != kNoNode && sends_message(nodes[c].status)) kids[k] = remap[c];
    }
    s.children.push_back(kids);
  }
  return s;
}

NodeId TreeShape::add_node(NodeId parent_id) {
  const NodeId id = size();
  parent.push_back(parent_id);
  depth.push_back(parent_id == kNoNode ? 0 : depth.at(parent_id) + 1);
  children.push_back({kNoNode, kNoNode});
  if (parent_id != kNoNode) {
    auto& slot = children[parent_id];
    if (slot[0] == kNoNode)
      slot[0] = id;
    else if (slot[1] == kNoNode)
      slot[1] = id;
    else
      throw std::invalid_argument("node already has two children");
  }
  return id;
}

Distribution policy_distribution(const Eigen::VectorXd& path_weights,
                                 std::vector<NodeId> nodes, double temperature) {
  if (nodes.empty()) throw EmptyCandidates("empty candidate set");
  if (static_cast<Eigen::Index>(nodes.size()) != path_weights.size())
    throw ShapeMismatch("path weights do not match candidates");
  if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
  Distribution d;
  d.nodes = std::move(nodes);
  const Eigen::VectorXd z = path_weights / temperature;
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  d.log_probs = z.array() - lse;
  d.probs = d.log_probs.array().exp();
  return d;
}

NodeId sample_action(const Distribution& dist, std::mt19937_64& rng) {
  if (dist.nodes.empty()) throw EmptyCandidates("empty distribution");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng) * dist.probs.sum();
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.nodes.size(); ++i) {
    acc += dist.probs(static_cast<Eigen::Index>(i));
    if (r < acc) return dist.nodes[i];
  }
  // Rounding left r at the very top: take the last candidate with mass.
  for (std::size_t i = dist.nodes.size(); i-- > 0;)
    if (dist.probs(static_cast<Eigen::Index>(i)) > 0) return dist.nodes[i];
  return dist.nodes.back();
}

double log_prob(const Distribution& dist, NodeId node) {
  const auto it = std::find(dist.nodes.begin(), dist.nodes.end(), node);
  if (it == dist.nodes.end())
    throw NotACandidate("node " + std::to_string(node) + " is not a candidate");
  return dist.log_probs(it - dist.nodes.begin());
}

SparseMatrix path_mean_matrix(const TreeShape& shape, std::span<const NodeId> candidates) {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const NodeId c = candidates[i];
    if (c < 0 || c >= shape.size()) throw NotACandidate("candidate outside the tree");
    const double w = 1.0 / (shape.depth[c] + 1);
    for (NodeId u = c; u != kNoNode; u = shape.parent[u])
      t.emplace_back(static_cast<int>(i), u, w);
  }
  SparseMatrix p(static_cast<Eigen::Index>(candidates.size()), shape.size());
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

TreePolicy TreePolicy::init(const PolicyConfig& cfg, std::uint64_t seed) {
  if (cfg.d_model < 2) throw std::invalid_argument("d_model must be at least 2");
  if (cfg.k_steps < 0) throw std::invalid_argument("k_steps must be non-negative");
  std::mt19937_64 rng(seed);
  const int d = cfg.d_model;
  nn::ParameterSet ps;
  ps.add("embed.w0", nn::glorot(kNumFeatures, d, rng));
  ps.add("embed.b0", Matrix::Zero(1, d), true, false);
  ps.add("embed.w1", nn::glorot(d, d, rng));
  ps.add("embed.b1", Matrix::Zero(1, d), true, false);
  ps.add("embed.w2", nn::glorot(d, d, rng));
  ps.add("embed.b2", Matrix::Zero(1, d), true, false);
  ps.add("gnn.w", nn::glorot(d, d, rng));
  ps.add("gnn.b", Matrix::Zero(1, d), true, false);
  ps.add("gnn.alpha", Matrix::Zero(1, 1), true, false);
  Matrix head = Matrix::Zero(d, 1);
  if (cfg.head_init_scale > 0) {
    std::normal_distribution<double> g(0.0, cfg.head_init_scale);
    for (Eigen::Index k = 0; k < head.size(); ++k)
      head(k) = std::clamp(g(rng), -10 * cfg.head_init_scale, 10 * cfg.head_init_scale);
  }
  ps.add("head.w", head);
  ps.add("head.b", Matrix::Zero(1, 1), true, false);
  ps.add("value.w", nn::glorot(d, 1, rng));
  ps.add("value.b", Matrix::Zero(1, 1), true, false);
  return TreePolicy(cfg, std::move(ps));
}

TreePolicy::TreePolicy(PolicyConfig cfg, nn::ParameterSet params)
    : cfg_(cfg), params_(std::move(params)) {
  const int d = cfg_.d_model;
  const std::pair<const char*, std::pair<int, int>> shapes[] = {
      {"embed.w0", {kNumFeatures, d}}, {"embed.b0", {1, d}}, {"embed.w1", {d, d}},
      {"embed.b1", {1, d}},            {"embed.w2", {d, d}}, {"embed.b2", {1, d}},
      {"gnn.w", {d, d}},               {"gnn.b", {1, d}},    {"gnn.alpha", {1, 1}},
      {"head.w", {d, 1}},              {"head.b", {1, 1}},   {"value.w", {d, 1}},
      {"value.b", {1, 1}},
  };
  for (const auto& [name, shape] : shapes) {
    const int i = params_.index(name);
    if (i < 0) throw ShapeMismatch(std::string("missing parameter ") + name);
    const Matrix& m = params_.entry(i).value;
    if (m.rows() != shape.first || m.cols() != shape.second)
      throw ShapeMismatch(std::string("parameter ") + name + " has the wrong shape");
  }
  if (!(cfg_.temperature > 0)) throw std::invalid_argument("temperature must be positive");
  if (cfg_.k_steps < 0) throw std::invalid_argument("k_steps must be non-negative");
}

Var TreePolicy::embed(Tape& t, Var x) const {
  if (t.value(x).cols() != kNumFeatures)
    throw ShapeMismatch("features must have " + std::to_string(kNumFeatures) + " columns");
  Var h = t.leaky_relu(t.add_row_bias(t.matmul(x, t.param("embed.w0")), t.param("embed.b0")));
  for (const char* layer : {"1", "2"}) {
    const std::string w = std::string("embed.w") + layer;
    const std::string b = std::string("embed.b") + layer;
    h = t.add(h, t.leaky_relu(t.add_row_bias(t.matmul(h, t.param(w)), t.param(b))));
  }
  return t.layernorm_rows(h);
}

Var TreePolicy::propagate(Tape& t, Var h, const TreeShape& shape) const {
  if (cfg_.k_steps == 0) return h;
  const SparseMatrix a = child_mean_matrix(shape);
  for (int step = 0; step < cfg_.k_steps; ++step) {
    const Var msg = t.sparse_left(a, h);
    const Var upd = t.leaky_relu(t.add_row_bias(t.matmul(msg, t.param("gnn.w")), t.param("gnn.b")));
    h = t.add(h, t.scale_by(upd, t.param("gnn.alpha")));
  }
  return h;
}

TreePolicy::Graph TreePolicy::forward(Tape& t, const Eigen::MatrixXd& features,
                                      const TreeShape& shape,
                                      std::span<const NodeId> candidates) const {
  if (candidates.empty()) throw EmptyCandidates("empty candidate set");
  if (features.rows() != shape.size())
    throw ShapeMismatch("feature rows do not match tree size");
  Graph g;
  g.h0 = embed(t, t.constant(features));
  g.hk = propagate(t, g.h0, shape);
  g.node_weight =
      t.add_row_bias(t.matmul(g.hk, t.param("head.w")), t.param("head.b"));
  const SparseMatrix p = path_mean_matrix(shape, candidates);
  g.path_weight = t.sparse_left(p, g.node_weight);
  g.log_probs = t.log_softmax(t.scale(g.path_weight, 1.0 / cfg_.temperature));
  g.node_value = t.add_row_bias(t.matmul(t.stop_gradient(g.hk), t.param("value.w")),
                                t.param("value.b"));
  g.q = cfg_.value_mode == ValueMode::kPathMean
            ? t.sparse_left(p, g.node_value)
            : t.sparse_left(own_node_matrix(shape, candidates), g.node_value);
  g.value = t.max_all(g.q);
  return g;
}

TreePolicy::Evaluation TreePolicy::evaluate(const Eigen::MatrixXd& features,
                                            const TreeShape& shape,
                                            std::span<const NodeId> candidates) const {
  Tape t(&params_);
  const Graph g = forward(t, features, shape, candidates);
  Evaluation e;
  e.path_weight = t.value(g.path_weight);
  e.dist.nodes.assign(candidates.begin(), candidates.end());
  e.dist.log_probs = t.value(g.log_probs);
  e.dist.probs = e.dist.log_probs.array().exp();
  e.q = t.value(g.q);
  e.value = t.scalar(g.value);
  return e;
}

Eigen::MatrixXd TreePolicy::embed_nodes(const Eigen::MatrixXd& features) const {
  Tape t(&params_);
  return t.value(embed(t, t.constant(features)));
}

Eigen::MatrixXd TreePolicy::message_pass(const Eigen::MatrixXd& h0,
                                         const TreeShape& shape) const {
  if (h0.rows() != shape.size() || h0.cols() != cfg_.d_model)
    throw ShapeMismatch("embedding does not match the tree");
  Tape t(&params_);
  return t.value(propagate(t, t.constant(h0), shape));
}

NodeId PolicySelector::select(const BnbTree& tree) {
  const auto& open = tree.open_leaves();
  if (open.empty()) throw EmptyCandidates("no open leaves");
  std::vector<NodeId> kept;
  TreeShape shape = TreeShape::from_tree(tree, &kept);
  const Eigen::MatrixXd all = extract_all(tree, stats_);
  Eigen::MatrixXd features(static_cast<Eigen::Index>(kept.size()), kNumFeatures);
  std::vector<NodeId> candidates;
  candidates.reserve(open.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    features.row(static_cast<Eigen::Index>(i)) = all.row(kept[i]);
    if (tree.node(kept[i]).status == NodeStatus::kOpen)
      candidates.push_back(static_cast<NodeId>(i));
  }
  const auto eval = policy_.evaluate(features, shape, candidates);

  int action = 0;
  if (greedy_) {
    eval.dist.probs.maxCoeff(&action);
  } else {
    const NodeId pick = sample_action(eval.dist, rng_);
    action = static_cast<int>(std::find(candidates.begin(), candidates.end(), pick) -
                              candidates.begin());
  }
  const NodeId chosen = kept[candidates[action]];
  if (recorder_) {
    PolicyStep step;
    step.features = std::move(features);
    step.shape = std::move(shape);
    step.candidates = std::move(candidates);
    step.action = action;
    step.log_prob = eval.dist.log_probs(action);
    step.value = eval.value;
    recorder_(std::move(step));
  }
  return chosen;
}

}  // namespace treesel
