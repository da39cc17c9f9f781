#pragma once

// Stateless layer kernels. Each forward returns its output; the matching
// backward receives whatever the forward needs (inputs or outputs) and
// accumulates parameter gradients into Param::grad.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cropnet/kernels/tensor.hpp"

namespace cropnet::kernels {

// ---------------------------------------------------------------------------
// Activations

inline Tensor2 sigmoid(const Tensor2& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }
// Through the vectorised exp; libm's scalar tanh dominated training time.
inline Tensor2 tanh(const Tensor2& x) {
  const Array2 t = (-2.0 * x.array().abs()).exp();
  const Array2 r = (1.0 - t) / (1.0 + t);
  return (x.array() < 0.0).select(-r, r).matrix();
}
inline Tensor2 relu(const Tensor2& x) { return x.array().max(0.0).matrix(); }

// Backward passes expressed through the forward output y.
inline Tensor2 sigmoid_backward(const Tensor2& y, const Tensor2& dy) {
  return (dy.array() * y.array() * (1.0 - y.array())).matrix();
}
inline Tensor2 tanh_backward(const Tensor2& y, const Tensor2& dy) {
  return (dy.array() * (1.0 - y.array().square())).matrix();
}
inline Tensor2 relu_backward(const Tensor2& y, const Tensor2& dy) {
  return (y.array() > 0.0).select(dy.array(), 0.0).matrix();
}

// Row-wise softmax, max-shifted.
inline Tensor2 softmax(const Tensor2& x) {
  Tensor2 out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

inline Tensor2 softmax_backward(const Tensor2& y, const Tensor2& dy) {
  Tensor2 dx(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double dot = y.row(r).dot(dy.row(r));
    dx.row(r) = (y.row(r).array() * (dy.row(r).array() - dot)).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Concatenation along columns

inline Tensor2 concat(std::span<const Tensor2* const> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  const Eigen::Index rows = parts.front()->rows();
  Eigen::Index cols = 0;
  for (const auto* p : parts) {
    if (p->rows() != rows) throw ShapeError("concat: " + shape_str(*parts.front()) + " vs " + shape_str(*p));
    cols += p->cols();
  }
  Tensor2 out(rows, cols);
  Eigen::Index c = 0;
  for (const auto* p : parts) {
    out.middleCols(c, p->cols()) = *p;
    c += p->cols();
  }
  return out;
}

inline Tensor2 concat(const Tensor2& a, const Tensor2& b) {
  const Tensor2* parts[] = {&a, &b};
  return concat(parts);
}

// Splits a gradient back into column blocks of the given widths.
inline std::vector<Tensor2> split_cols(const Tensor2& x, std::span<const Eigen::Index> widths) {
  std::vector<Tensor2> out;
  Eigen::Index c = 0;
  for (auto w : widths) {
    out.push_back(x.middleCols(c, w));
    c += w;
  }
  if (c != x.cols()) throw ShapeError("split widths do not cover " + shape_str(x));
  return out;
}

// ---------------------------------------------------------------------------
// Fully connected layer: y = x W^T + b, W is out x in.

struct Linear {
  Param* weight = nullptr;
  Param* bias = nullptr;

  static Linear create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out) {
    return {store.add(name + ".weight", out, in), store.add(name + ".bias", 1, out)};
  }

  Eigen::Index in_dim() const { return weight->value.cols(); }
  Eigen::Index out_dim() const { return weight->value.rows(); }

  void init(Rng& rng) const {
    init_uniform(*weight, in_dim(), rng);
    init_uniform(*bias, in_dim(), rng);
  }

  Tensor2 forward(const Tensor2& x) const {
    if (x.cols() != in_dim())
      throw ShapeError("linear " + weight->name + ": input " + shape_str(x) + " vs weight " + shape_str(weight->value));
    Tensor2 y = x * weight->value.transpose();
    y.rowwise() += bias->value.row(0);
    return y;
  }

  Tensor2 backward(const Tensor2& x, const Tensor2& dy) const {
    if (dy.cols() != out_dim() || dy.rows() != x.rows())
      throw ShapeError("linear " + weight->name + " backward: " + shape_str(dy) + " vs input " + shape_str(x));
    weight->grad.noalias() += dy.transpose() * x;
    bias->grad.row(0) += dy.colwise().sum();
    return dy * weight->value;
  }
};

// ---------------------------------------------------------------------------
// Embedding table: row i is the vector of token i.

struct Embedding {
  Param* table = nullptr;

  static Embedding create(ParamStore& store, const std::string& name, Eigen::Index tokens, Eigen::Index dim) {
    return {store.add(name + ".table", tokens, dim)};
  }

  Eigen::Index tokens() const { return table->value.rows(); }
  Eigen::Index dim() const { return table->value.cols(); }

  void init(Rng& rng) const {
    for (Eigen::Index i = 0; i < table->value.size(); ++i) table->value.data()[i] = rng.uniform(-1.0, 1.0);
  }

  Tensor2 forward(std::span<const int> ids) const {
    Tensor2 out(static_cast<Eigen::Index>(ids.size()), dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= tokens())
        throw ShapeError("embedding " + table->name + ": token " + std::to_string(ids[i]) + " outside (" +
                         std::to_string(tokens()) + ")");
      out.row(static_cast<Eigen::Index>(i)) = table->value.row(ids[i]);
    }
    return out;
  }

  void backward(std::span<const int> ids, const Tensor2& dy) const {
    for (std::size_t i = 0; i < ids.size(); ++i) table->grad.row(ids[i]) += dy.row(static_cast<Eigen::Index>(i));
  }
};

// ---------------------------------------------------------------------------
// Loss

struct LossResult {
  double loss = 0;  // mean over the batch
  Tensor2 grad;     // d loss / d logits
};

inline LossResult cross_entropy(const Tensor2& logits, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets vs logits " + shape_str(logits));
  LossResult r;
  r.grad = softmax(logits);
  const double inv_b = 1.0 / static_cast<double>(std::max<Eigen::Index>(logits.rows(), 1));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) throw ShapeError("cross_entropy: target " + std::to_string(t) + " out of range");
    // log-sum-exp form stays finite for large logits
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    r.loss += (lse - logits(i, t)) * inv_b;
    r.grad(i, t) -= 1.0;
  }
  r.grad *= inv_b;
  return r;
}

inline std::vector<int> argmax_rows(const Tensor2& x) {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index c = 0;
    x.row(r).maxCoeff(&c);
    out[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }
  return out;
}

}  // namespace cropnet::kernels
