#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cropnet/error.hpp"
#include "cropnet/rng.hpp"

namespace cropnet::kernels {

// Row-major dense matrix; a batch of B vectors of width d is a B x d tensor.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Element-wise scratch with the same layout, so mixed expressions stay contiguous.
using Array2 = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_str(const Tensor2& t) {
  return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

inline void require_shape(const Tensor2& t, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (t.rows() != rows || t.cols() != cols)
    throw ShapeError(std::string(what) + ": got " + shape_str(t) + ", want (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + ")");
}

inline void require_cols(const Tensor2& t, Eigen::Index cols, const char* what) {
  if (t.cols() != cols)
    throw ShapeError(std::string(what) + ": got " + shape_str(t) + ", want " + std::to_string(cols) + " columns");
}

inline void require_same(const Tensor2& a, const Tensor2& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
}

// A trainable array with its accumulated gradient.
struct Param {
  std::string name;
  Tensor2 value;
  Tensor2 grad;

  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Tensor2::Zero(rows, cols)), grad(Tensor2::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
};

// Owns every parameter of a model; addresses stay stable for the store's
// lifetime so layers can hold plain pointers.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Param* add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    for (const auto& p : params_)
      if (p->name == name) throw Error("duplicate parameter name " + name);
    params_.push_back(std::make_unique<Param>(std::move(name), rows, cols));
    return params_.back().get();
  }

  std::size_t size() const noexcept { return params_.size(); }
  Param& operator[](std::size_t i) { return *params_[i]; }
  const Param& operator[](std::size_t i) const { return *params_[i]; }

  Param* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

  std::vector<Tensor2> snapshot() const {
    std::vector<Tensor2> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Tensor2>& values) {
    if (values.size() != params_.size()) throw ShapeError("snapshot holds a different number of arrays");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      require_same(params_[i]->value, values[i], params_[i]->name.c_str());
      params_[i]->value = values[i];
    }
  }

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
inline void init_uniform(Param& p, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-bound, bound);
}

inline void require_finite(const Tensor2& t, const char* what) {
  if (!t.allFinite()) throw NumericError(std::string("non-finite activation in ") + what);
}

}  // namespace cropnet::kernels
