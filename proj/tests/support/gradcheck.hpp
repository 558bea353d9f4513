#pragma once

// Central finite-difference checks for Graph<double> ops.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "blindsr/core/prng.hpp"
#include "blindsr/nn/graph.hpp"
#include "blindsr/nn/tensor.hpp"

namespace blindsr::testing {

using G = nn::Graph<double>;
using Store = nn::ParamStore<double>;
using Builder = std::function<G::Var(G&, Store&)>;

struct ProbeResult {
  std::string param;
  std::size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradCheck {
  std::vector<ProbeResult> probes;
  double max_rel_error() const {
    double m = 0;
    for (const auto& p : probes) m = std::max(m, p.rel_error);
    return m;
  }
};

inline double rel_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

/// Loss = mse(f(params), fixed random target). Probes `per_param` random
/// coordinates of every parameter tensor.
inline GradCheck check_gradients(Store& store, const Builder& f, std::size_t per_param, std::uint64_t seed,
                                 double h = 1e-5) {
  Prng prng(seed, 0x6772);
  nn::Tensor<double> target;
  {
    G g(G::Mode::inference);
    const nn::Tensor<double>& out = g.value(f(g, store));
    target = nn::Tensor<double>(out.shape);
    for (double& v : target.data) v = prng.normal();
  }
  auto loss = [&]() {
    G g(G::Mode::inference);
    return g.value(g.mse(f(g, store), target)).data[0];
  };

  store.zero_grad();
  {
    G g;
    g.backward(g.mse(f(g, store), target));
  }

  GradCheck res;
  for (auto& [name, e] : store.entries()) {
    const std::size_t n = e.value.size();
    for (std::size_t k = 0; k < std::min(per_param, n); ++k) {
      const std::size_t i = per_param >= n ? k : static_cast<std::size_t>(prng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
      const double orig = e.value.data[i];
      e.value.data[i] = orig + h;
      const double lp = loss();
      e.value.data[i] = orig - h;
      const double lm = loss();
      e.value.data[i] = orig;
      const double num = (lp - lm) / (2 * h);
      const double ana = e.grad.data[i];
      res.probes.push_back({name, i, ana, num, rel_error(ana, num)});
    }
  }
  return res;
}

inline nn::Tensor<double> random_tensor(Prng& prng, std::vector<int> shape, double scale = 1.0) {
  return nn::random_normal<double>(prng, std::move(shape), scale);
}

/// One named builder per op type, each over its own small parameter store.
struct OpCase {
  std::string name;
  Store store;
  Builder f;
};

inline std::vector<OpCase> op_cases(std::uint64_t seed) {
  Prng p(seed, 0x6f70);
  std::vector<OpCase> cases;
  auto add_case = [&](std::string name, std::vector<std::pair<std::string, std::vector<int>>> params, Builder f) {
    OpCase c{std::move(name), {}, std::move(f)};
    for (auto& [pn, shape] : params) c.store.add(pn, random_tensor(p, shape, 0.7));
    cases.push_back(std::move(c));
  };
  add_case("conv2d_s1", {{"x", {2, 3, 5, 6}}, {"w", {4, 3, 3, 3}}, {"b", {4}}},
           [](G& g, Store& s) { return g.conv2d(g.param(s, "x"), g.param(s, "w"), g.param(s, "b"), 1, 1); });
  add_case("conv2d_s2", {{"x", {2, 2, 6, 6}}, {"w", {3, 2, 3, 3}}, {"b", {3}}},
           [](G& g, Store& s) { return g.conv2d(g.param(s, "x"), g.param(s, "w"), g.param(s, "b"), 2, 1); });
  add_case("conv2d_1x1", {{"x", {1, 3, 4, 4}}, {"w", {2, 3, 1, 1}}, {"b", {2}}},
           [](G& g, Store& s) { return g.conv2d(g.param(s, "x"), g.param(s, "w"), g.param(s, "b"), 1, 0); });
  add_case("group_norm", {{"x", {2, 4, 3, 3}}, {"gamma", {4}}, {"beta", {4}}}, [](G& g, Store& s) {
    return g.group_norm(g.param(s, "x"), g.param(s, "gamma"), g.param(s, "beta"), 2);
  });
  add_case("silu", {{"x", {2, 3, 4}}}, [](G& g, Store& s) { return g.silu(g.param(s, "x")); });
  add_case("add", {{"a", {2, 5}}, {"b", {2, 5}}},
           [](G& g, Store& s) { return g.add(g.param(s, "a"), g.param(s, "b")); });
  add_case("scale", {{"x", {4, 6}}}, [](G& g, Store& s) { return g.scale(g.param(s, "x"), 1.7); });
  add_case("add_channel_bias", {{"x", {2, 3, 2, 2}}, {"e", {2, 3}}},
           [](G& g, Store& s) { return g.add_channel_bias(g.param(s, "x"), g.param(s, "e")); });
  add_case("linear", {{"x", {3, 5}}, {"w", {4, 5}}, {"b", {4}}},
           [](G& g, Store& s) { return g.linear(g.param(s, "x"), g.param(s, "w"), g.param(s, "b")); });
  add_case("concat_channels", {{"a", {2, 2, 3, 3}}, {"b", {2, 3, 3, 3}}},
           [](G& g, Store& s) { return g.concat_channels(g.param(s, "a"), g.param(s, "b")); });
  add_case("mul_channel_scale", {{"x", {2, 3, 2, 2}}, {"s", {2, 3}}},
           [](G& g, Store& s) { return g.mul_channel_scale(g.param(s, "x"), g.param(s, "s")); });
  add_case("slice_channels", {{"x", {2, 4, 2, 3}}},
           [](G& g, Store& s) { return g.slice_channels(g.param(s, "x"), 1, 2); });
  add_case("upsample2", {{"x", {2, 2, 3, 2}}}, [](G& g, Store& s) { return g.upsample2(g.param(s, "x")); });
  return cases;
}

}  // namespace blindsr::testing
