/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "treesel/errors.hpp"

namespace treesel::nn {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

int ParameterSet::add(std::string name, Matrix value, bool trainable, bool decay) {
  if (by_name_.contains(name))
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  const int idx = static_cast<int>(entries_.size());
  by_name_.emplace(name, idx);
  entries_.push_back({std::move(name), std::move(value), trainable, decay});
  return idx;
}

int ParameterSet::index(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

Matrix& ParameterSet::operator[](const std::string& name) {
  const int i = index(name);
  if (i < 0) throw std::out_of_range("no parameter '" + name + "'");
  return entries_[i].value;
}

const Matrix& ParameterSet::operator[](const std::string& name) const {
  const int i = index(name);
  if (i < 0) throw std::out_of_range("no parameter '" + name + "'");
  return entries_[i].value;
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

Gradients zero_gradients(const ParameterSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& e : params.entries())
    g.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
  return g;
}

double global_norm(const Gradients& g) {
  double s = 0.0;
  for (const auto& m : g) s += m.squaredNorm();
  return std::sqrt(s);
}

void scale_gradients(Gradients& g, double s) {
  for (auto& m : g) m *= s;
}

Matrix leaky_relu(const Matrix& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
}

Matrix layernorm_rows(const Matrix& x, double eps) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    y.row(r) = (x.row(r).array() - mu) / std::sqrt(var + eps);
  }
  return y;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  Eigen::VectorXd e = (x.array() - m).exp();
  return e / e.sum();
}

Var Tape::push(Matrix value, std::function<void(Tape&, int)> back) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(back), -1});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() != 0)
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::check_same_shape(Var a, Var b, const char* op) const {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw ShapeMismatch(std::string(op) + ": " + shape_str(x) + " vs " + shape_str(y));
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw ShapeMismatch("scalar: got " + shape_str(m));
  return m(0, 0);
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::param(int index) {
  if (!params_) throw std::logic_error("tape has no parameter set");
  if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return Var{it->second};
  Var v = push(params_->entry(index).value, nullptr);
  nodes_[v.id].param_index = index;
  param_nodes_.emplace(index, v.id);
  return v;
}

Var Tape::param(const std::string& name) {
  if (!params_) throw std::logic_error("tape has no parameter set");
  const int i = params_->index(name);
  if (i < 0) throw std::out_of_range("no parameter '" + name + "'");
  return param(i);
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows())
    throw ShapeMismatch("matmul: " + shape_str(value(a)) + " * " + shape_str(value(b)));
  Matrix out = value(a) * value(b);
  return push(std::move(out), [a, b](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    t.grad_of(a.id).noalias() += g * t.value(b).transpose();
    t.grad_of(b.id).noalias() += t.value(a).transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  return push(value(a) + value(b), [a, b](Tape& t, int id) {
    t.grad_of(a.id) += t.nodes_[id].grad;
    t.grad_of(b.id) += t.nodes_[id].grad;
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  return push(value(a) - value(b), [a, b](Tape& t, int id) {
    t.grad_of(a.id) += t.nodes_[id].grad;
    t.grad_of(b.id) -= t.nodes_[id].grad;
  });
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    t.grad_of(a.id) += g.cwiseProduct(t.value(b));
    t.grad_of(b.id) += g.cwiseProduct(t.value(a));
  });
}

Var Tape::add_scalar(Var a, double c) {
  return push(value(a).array() + c, [a](Tape& t, int id) {
    t.grad_of(a.id) += t.nodes_[id].grad;
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, [a, s](Tape& t, int id) {
    t.grad_of(a.id) += s * t.nodes_[id].grad;
  });
}

Var Tape::scale_by(Var a, Var s) {
  if (value(s).size() != 1) throw ShapeMismatch("scale_by: scale must be 1x1");
  return push(value(a) * value(s)(0, 0), [a, s](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    t.grad_of(a.id) += t.value(s)(0, 0) * g;
    t.grad_of(s.id)(0, 0) += g.cwiseProduct(t.value(a)).sum();
  });
}

Var Tape::add_row_bias(Var x, Var bias) {
  const Matrix& b = value(bias);
  if (b.rows() != 1 || b.cols() != value(x).cols())
    throw ShapeMismatch("add_row_bias: " + shape_str(value(x)) + " + " + shape_str(b));
  Matrix out = value(x).rowwise() + b.row(0);
  return push(std::move(out), [x, bias](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    t.grad_of(x.id) += g;
    t.grad_of(bias.id) += g.colwise().sum();
  });
}

Var Tape::leaky_relu(Var x, double slope) {
  return push(nn::leaky_relu(value(x), slope), [x, slope](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix& in = t.value(x);
    t.grad_of(x.id) += g.binaryExpr(in, [slope](double gv, double v) {
      return v > 0 ? gv : slope * gv;
    });
  });
}

Var Tape::layernorm_rows(Var x, double eps) {
  const Matrix& in = value(x);
  Eigen::VectorXd inv_sigma(in.rows());
  Matrix y(in.rows(), in.cols());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mu = in.row(r).mean();
    const double var = (in.row(r).array() - mu).square().mean();
    inv_sigma(r) = 1.0 / std::sqrt(var + eps);
    y.row(r) = (in.row(r).array() - mu) * inv_sigma(r);
  }
  return push(std::move(y), [x, inv_sigma](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix& y = t.nodes_[id].value;
    Matrix& gx = t.grad_of(x.id);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double mg = g.row(r).mean();
      const double mgy = g.row(r).cwiseProduct(y.row(r)).mean();
      gx.row(r).array() +=
          inv_sigma(r) * (g.row(r).array() - mg - y.row(r).array() * mgy);
    }
  });
}

Var Tape::sparse_left(const SparseMatrix& s, Var x) {
  if (s.cols() != value(x).rows())
    throw ShapeMismatch("sparse_left: " + std::to_string(s.rows()) + "x" +
                        std::to_string(s.cols()) + " * " + shape_str(value(x)));
  Matrix out = s * value(x);
  return push(std::move(out), [s, x](Tape& t, int id) {
    t.grad_of(x.id).noalias() += s.transpose() * t.nodes_[id].grad;
  });
}

Var Tape::stop_gradient(Var x) {
  Matrix v = value(x);
  if (replay_) {
    if (replay_pos_ >= replay_->size())
      throw std::logic_error("stop_gradient replay exhausted");
    v = (*replay_)[replay_pos_++];
  } else if (record_) {
    record_->push_back(v);
  }
  return push(std::move(v), nullptr);
}

Var Tape::log_softmax(Var x) {
  const Matrix& in = value(x);
  const double m = in.maxCoeff();
  const double lse = m + std::log((in.array() - m).exp().sum());
  Matrix out = in.array() - lse;
  return push(std::move(out), [x](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix p = t.nodes_[id].value.array().exp();
    t.grad_of(x.id) += g - p * g.sum();
  });
}

Var Tape::softmax(Var x) {
  const Matrix& in = value(x);
  const double m = in.maxCoeff();
  Matrix e = (in.array() - m).exp();
  e /= e.sum();
  return push(std::move(e), [x](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix& p = t.nodes_[id].value;
    const double dot = g.cwiseProduct(p).sum();
    t.grad_of(x.id) += p.cwiseProduct((g.array() - dot).matrix());
  });
}

Var Tape::exp(Var x) {
  return push(value(x).array().exp(), [x](Tape& t, int id) {
    t.grad_of(x.id) += t.nodes_[id].grad.cwiseProduct(t.nodes_[id].value);
  });
}

Var Tape::square(Var x) {
  return push(value(x).array().square(), [x](Tape& t, int id) {
    t.grad_of(x.id) += 2.0 * t.nodes_[id].grad.cwiseProduct(t.value(x));
  });
}

Var Tape::clip(Var x, double lo, double hi) {
  return push(value(x).cwiseMax(lo).cwiseMin(hi), [x, lo, hi](Tape& t, int id) {
    t.grad_of(x.id) += t.nodes_[id].grad.binaryExpr(
        t.value(x), [lo, hi](double g, double v) { return v >= lo && v <= hi ? g : 0.0; });
  });
}

Var Tape::min(Var a, Var b) {
  check_same_shape(a, b, "min");
  return push(value(a).cwiseMin(value(b)), [a, b](Tape& t, int id) {
    const Matrix& g = t.nodes_[id].grad;
    const Matrix& va = t.value(a);
    const Matrix& vb = t.value(b);
    Matrix& ga = t.grad_of(a.id);
    Matrix& gb = t.grad_of(b.id);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (va(i) <= vb(i))
        ga(i) += g(i);
      else
        gb(i) += g(i);
    }
  });
}

Var Tape::max_all(Var x) {
  const Matrix& in = value(x);
  if (in.size() == 0) throw ShapeMismatch("max_all of an empty array");
  Eigen::Index r = 0, c = 0;
  const double m = in.maxCoeff(&r, &c);
  return push(Matrix::Constant(1, 1, m), [x, r, c](Tape& t, int id) {
    t.grad_of(x.id)(r, c) += t.nodes_[id].grad(0, 0);
  });
}

Var Tape::sum(Var x) {
  return push(Matrix::Constant(1, 1, value(x).sum()), [x](Tape& t, int id) {
    t.grad_of(x.id).array() += t.nodes_[id].grad(0, 0);
  });
}

Var Tape::mean(Var x) {
  const double n = static_cast<double>(value(x).size());
  if (n == 0) throw ShapeMismatch("mean of an empty array");
  return push(Matrix::Constant(1, 1, value(x).sum() / n), [x, n](Tape& t, int id) {
    t.grad_of(x.id).array() += t.nodes_[id].grad(0, 0) / n;
  });
}

Var Tape::entry(Var x, int row, int col) {
  const Matrix& in = value(x);
  if (row < 0 || col < 0 || row >= in.rows() || col >= in.cols())
    throw ShapeMismatch("entry (" + std::to_string(row) + "," + std::to_string(col) +
                        ") outside " + shape_str(in));
  return push(Matrix::Constant(1, 1, in(row, col)), [x, row, col](Tape& t, int id) {
    t.grad_of(x.id)(row, col) += t.nodes_[id].grad(0, 0);
  });
}

void Tape::backward(Var loss, Gradients& grads) {
  if (value(loss).size() != 1) throw ShapeMismatch("backward needs a 1x1 loss");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_of(loss.id)(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this, id);
    if (n.param_index >= 0) {
      Matrix& dst = grads.at(n.param_index);
      if (dst.rows() != n.grad.rows() || dst.cols() != n.grad.cols())
        throw ShapeMismatch("gradient shape for parameter " + std::to_string(n.param_index));
      dst += nodes_[id].grad;
    }
  }
}

void AdamW::step(ParameterSet& params, const Gradients& grads) {
  if (grads.size() != params.size()) throw ShapeMismatch("AdamW: gradient count");
  if (m_.empty()) {
    m_ = zero_gradients(params);
    v_ = zero_gradients(params);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(static_cast<int>(i));
    if (!e.trainable) continue;
    const Matrix& g = grads[i];
    if (g.rows() != e.value.rows() || g.cols() != e.value.cols())
      throw ShapeMismatch("AdamW: gradient shape for " + e.name);
    if (e.decay && cfg_.weight_decay != 0.0) e.value *= 1.0 - cfg_.lr * cfg_.weight_decay;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    e.value.array() -= cfg_.lr * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

GradCheckReport grad_check(ParameterSet& params, const LossFn& loss, double tolerance,
                           double h) {
  GradCheckReport report;
  report.analytic = zero_gradients(params);
  std::vector<Matrix> detached;
  {
    Tape tape(&params);
    tape.record_detached(&detached);
    const Var l = loss(tape);
    tape.backward(l, report.analytic);
  }
  auto eval = [&]() {
    Tape tape(&params);
    tape.replay_detached(&detached);
    return tape.scalar(loss(tape));
  };
  report.passed = true;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(static_cast<int>(i));
    if (!e.trainable) continue;
    Matrix numeric(e.value.rows(), e.value.cols());
    for (Eigen::Index k = 0; k < e.value.size(); ++k) {
      const double orig = e.value(k);
      e.value(k) = orig + h;
      const double up = eval();
      e.value(k) = orig - h;
      const double down = eval();
      e.value(k) = orig;
      numeric(k) = (up - down) / (2.0 * h);
    }
    GradCheckEntry entry;
    entry.name = e.name;
    entry.analytic_norm = report.analytic[i].norm();
    entry.numeric_norm = numeric.norm();
    const double diff = (report.analytic[i] - numeric).norm();
    const double scale = std::max(entry.analytic_norm, entry.numeric_norm);
    entry.rel_error = scale < 1e-10 ? diff : diff / scale;
    if (report.worst_name.empty() || entry.rel_error > report.worst_error) {
      report.worst_error = entry.rel_error;
      report.worst_name = entry.name;
    }
    if (!(entry.rel_error < tolerance)) report.passed = false;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = u(rng);
  return m;
}

}  // namespace treesel::nn
