#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "blindsr/core/error.hpp"
#include "blindsr/core/prng.hpp"

namespace blindsr::nn {

/// Dense row-major tensor. Activations use NCHW, embeddings (N, D).
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) { data.assign(numel(shape), fill); }
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel(shape)) throw InvalidArgument("tensor data does not match shape");
  }

  static std::size_t numel(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }
  int rank() const noexcept { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  T& operator[](std::size_t i) { return data[i]; }
  T operator[](std::size_t i) const { return data[i]; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

/// Named parameters with matching gradient buffers. Iteration order is the
/// lexicographic order of names, which fixes checkpoint layout and optimizer
/// traversal.
template <class T>
class ParamStore {
 public:
  struct Entry {
    Tensor<T> value;
    Tensor<T> grad;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> init) {
    if (entries_.count(name) != 0) throw InvalidArgument("duplicate parameter '" + name + "'");
    Entry e;
    e.grad = Tensor<T>(init.shape);
    e.value = std::move(init);
    return entries_.emplace(name, std::move(e)).first->second.value;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Entry>& entries() noexcept { return entries_; }
  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, e] : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), T(0));
  }

  bool all_finite() const {
    for (const auto& [_, e] : entries_) {
      for (T v : e.value.data) {
        if (!std::isfinite(static_cast<double>(v))) return false;
      }
    }
    return true;
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, e] : entries_) out.add(name, e.value.template cast<U>());
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.value.shape != ib->second.value.shape ||
          ia->second.value.data != ib->second.value.data) {
        return false;
      }
    }
    return true;
  }

 private:
  std::map<std::string, Entry> entries_;
};

/// Normal(0, std^2) initializer drawn from the project Prng.
template <class T>
Tensor<T> random_normal(Prng& prng, std::vector<int> shape, double std) {
  Tensor<T> t(std::move(shape));
  for (T& v : t.data) v = static_cast<T>(std * prng.normal());
  return t;
}

}  // namespace blindsr::nn
