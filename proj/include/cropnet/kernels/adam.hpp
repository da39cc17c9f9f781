#pragma once

#include <cmath>
#include <vector>

#include "cropnet/kernels/tensor.hpp"

namespace cropnet::kernels {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over every array of a ParamStore.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const noexcept { return cfg_; }
  long long steps() const noexcept { return step_; }

  void step(ParamStore& store) {
    if (first_.empty()) {
      for (std::size_t i = 0; i < store.size(); ++i) {
        first_.push_back(Tensor2::Zero(store[i].value.rows(), store[i].value.cols()));
        second_.push_back(first_.back());
      }
    }
    if (first_.size() != store.size()) throw ShapeError("optimizer state does not match parameter store");
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < store.size(); ++i) {
      Param& p = store[i];
      require_same(p.grad, first_[i], p.name.c_str());
      first_[i] = cfg_.beta1 * first_[i] + (1.0 - cfg_.beta1) * p.grad;
      second_[i] = (cfg_.beta2 * second_[i].array() + (1.0 - cfg_.beta2) * p.grad.array().square()).matrix();
      p.value.array() -=
          cfg_.lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + cfg_.eps);
    }
  }

  void reset() {
    first_.clear();
    second_.clear();
    step_ = 0;
  }

 private:
  AdamConfig cfg_;
  std::vector<Tensor2> first_, second_;
  long long step_ = 0;
};

}  // namespace cropnet::kernels
