#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "blindsr/core/error.hpp"
#include "blindsr/nn/tensor.hpp"

namespace blindsr::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t warmup_steps = 1000;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw InvalidArgument("Adam betas must be in [0, 1)");
    }
    if (!(eps > 0.0)) throw InvalidArgument("Adam eps must be positive");
    if (warmup_steps < 0) throw InvalidArgument("warmup_steps must be >= 0");
  }
};

template <class T>
double global_grad_norm(const ParamStore<T>& store) {
  double ss = 0.0;
  for (const auto& [_, e] : store.entries()) {
    for (T g : e.grad.data) ss += static_cast<double>(g) * g;
  }
  return std::sqrt(ss);
}

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <class T>
double clip_grad_norm(ParamStore<T>& store, double max_norm) {
  const double norm = global_grad_norm(store);
  if (max_norm > 0.0 && norm > max_norm) {
    const T k = static_cast<T>(max_norm / norm);
    for (auto& [_, e] : store.entries()) {
      for (T& g : e.grad.data) g *= k;
    }
  }
  return norm;
}

template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const AdamConfig& config() const noexcept { return cfg_; }
  std::int64_t step_count() const noexcept { return step_; }

  /// Learning rate for the update that step() would apply next.
  double current_lr() const {
    if (cfg_.warmup_steps == 0) return cfg_.learning_rate;
    const double ramp = static_cast<double>(step_ + 1) / static_cast<double>(cfg_.warmup_steps);
    return cfg_.learning_rate * std::min(1.0, ramp);
  }

  void step(ParamStore<T>& store) {
    const double lr = current_lr();
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (auto& [name, e] : store.entries()) {
      auto& m = moment(m_, name, e.value);
      auto& v = moment(v_, name, e.value);
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        const double g = e.grad.data[i];
        m.data[i] = static_cast<T>(cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g);
        v.data[i] = static_cast<T>(cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g * g);
        const double mh = m.data[i] / bc1;
        const double vh = v.data[i] / bc2;
        e.value.data[i] = static_cast<T>(e.value.data[i] - lr * mh / (std::sqrt(vh) + cfg_.eps));
      }
    }
  }

  std::map<std::string, Tensor<T>>& first_moments() noexcept { return m_; }
  std::map<std::string, Tensor<T>>& second_moments() noexcept { return v_; }
  const std::map<std::string, Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::map<std::string, Tensor<T>>& second_moments() const noexcept { return v_; }
  void set_step_count(std::int64_t s) { step_ = s; }

 private:
  static Tensor<T>& moment(std::map<std::string, Tensor<T>>& store, const std::string& name, const Tensor<T>& like) {
    auto it = store.find(name);
    if (it == store.end()) it = store.emplace(name, Tensor<T>(like.shape)).first;
    return it->second;
  }

  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::map<std::string, Tensor<T>> m_, v_;
};

}  // namespace blindsr::nn
