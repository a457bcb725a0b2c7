/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace treesel::nn {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kLayerNormEps = 1e-5;

// Named dense arrays. Shapes are fixed once added.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    bool trainable = true;
    // Decoupled weight decay applies only when set (off for biases and
    // scalar gates).
    bool decay = true;
  };

  // Returns the index of the new array; throws std::invalid_argument on a
  // duplicate name.
  int add(std::string name, Matrix value, bool trainable = true, bool decay = true);

  std::size_t size() const { return entries_.size(); }
  Entry& entry(int i) { return entries_.at(i); }
  const Entry& entry(int i) const { return entries_.at(i); }
  // -1 when absent.
  int index(const std::string& name) const;
  Matrix& operator[](const std::string& name);
  const Matrix& operator[](const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t num_scalars() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

// One gradient array per parameter entry, same shapes.
using Gradients = std::vector<Matrix>;

Gradients zero_gradients(const ParameterSet& params);
double global_norm(const Gradients& g);
void scale_gradients(Gradients& g, double s);

struct Var {
  int id = -1;
};

// Reverse-mode recording of one forward computation. Parameters enter as
// leaves bound to a ParameterSet; backward() accumulates their gradients.
class Tape {
 public:
  explicit Tape(const ParameterSet* params = nullptr) : params_(params) {}

  Var constant(Matrix value);
  Var param(int index);
  Var param(const std::string& name);
  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var add_scalar(Var a, double c);
  Var scale(Var a, double s);
  // a * s for a 1x1 variable s.
  Var scale_by(Var a, Var s);
  // Adds a 1 x cols row to every row of x.
  Var add_row_bias(Var x, Var bias);
  Var leaky_relu(Var x, double slope = kLeakySlope);
  // Per-row zero mean, unit (population) variance; no affine part.
  Var layernorm_rows(Var x, double eps = kLayerNormEps);
  // s * x for a constant sparse matrix s.
  Var sparse_left(const SparseMatrix& s, Var x);
  // Identity forward, zero gradient.
  Var stop_gradient(Var x);
  // Over all entries of x.
  Var log_softmax(Var x);
  Var softmax(Var x);
  Var exp(Var x);
  Var square(Var x);
  Var clip(Var x, double lo, double hi);
  Var min(Var a, Var b);  // elementwise
  Var max_all(Var x);     // 1x1
  Var sum(Var x);         // 1x1
  Var mean(Var x);        // 1x1
  Var entry(Var x, int row, int col = 0);  // 1x1

  // Gradients of a 1x1 loss added into `grads` (aligned with the bound
  // ParameterSet).
  void backward(Var loss, Gradients& grads);

  // stop_gradient values recorded in order; replaying them makes the
  // detached paths constants, which finite differences need.
  void record_detached(std::vector<Matrix>* sink) { record_ = sink; }
  void replay_detached(const std::vector<Matrix>* source) { replay_ = source; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, int)> back;
    int param_index = -1;
  };

  Var push(Matrix value, std::function<void(Tape&, int)> back);
  Matrix& grad_of(int id);
  void check_same_shape(Var a, Var b, const char* op) const;

  const ParameterSet* params_;
  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
  std::vector<Matrix>* record_ = nullptr;
  const std::vector<Matrix>* replay_ = nullptr;
  std::size_t replay_pos_ = 0;
};

// Plain (non-recording) forward helpers.
Matrix leaky_relu(const Matrix& x, double slope = kLeakySlope);
Matrix layernorm_rows(const Matrix& x, double eps = kLayerNormEps);
Eigen::VectorXd softmax(const Eigen::VectorXd& x);

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}
  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  int steps() const { return t_; }
  void step(ParameterSet& params, const Gradients& grads);

 private:
  AdamWConfig cfg_;
  int t_ = 0;
  Gradients m_, v_;
};

struct GradCheckEntry {
  std::string name;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  // |a - n| / max(|a|, |n|), or the absolute difference when both norms are
  // below 1e-10.
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_error = 0.0;
  std::string worst_name;
  bool passed = false;
  Gradients analytic;
};

using LossFn = std::function<Var(Tape&)>;

// Central differences with step `h` on every entry of every trainable array.
GradCheckReport grad_check(ParameterSet& params, const LossFn& loss,
                           double tolerance = 1e-4, double h = 1e-5);

// Glorot-uniform matrix.
Matrix glorot(int rows, int cols, std::mt19937_64& rng);

}  // namespace treesel::nn
