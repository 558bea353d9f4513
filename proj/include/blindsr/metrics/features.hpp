#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/nn/graph.hpp"
#include "blindsr/nn/tensor.hpp"

namespace blindsr::metrics {

enum class FeatureKind { fixed_random_conv, external };

/// Frozen, seeded feature network: three 3x3 stride-2 convolutions with SiLU
/// between them, then global average pooling to feature_dim values.
struct FeatureExtractor {
  FeatureKind kind = FeatureKind::fixed_random_conv;
  std::uint64_t seed = 0x5eed;
  int feature_dim = 64;
  int hidden = 32;
};

inline void to_json(nlohmann::json& j, const FeatureExtractor& f) {
  j = {{"kind", f.kind == FeatureKind::fixed_random_conv ? "fixed_random_conv" : "external"},
       {"seed", f.seed},
       {"feature_dim", f.feature_dim},
       {"hidden", f.hidden}};
}

inline void from_json(const nlohmann::json& j, FeatureExtractor& f) {
  FeatureExtractor d;
  const std::string kind = j.value("kind", std::string("fixed_random_conv"));
  if (kind != "fixed_random_conv") throw InvalidArgument("unsupported feature extractor '" + kind + "'");
  f.kind = FeatureKind::fixed_random_conv;
  f.seed = j.value("seed", d.seed);
  f.feature_dim = j.value("feature_dim", d.feature_dim);
  f.hidden = j.value("hidden", d.hidden);
}

namespace detail {

inline nn::ParamStore<float> feature_weights(const FeatureExtractor& ex, int channels) {
  Prng prng(ex.seed, 0x66656174ULL);
  nn::ParamStore<float> p;
  const int widths[4] = {channels, ex.hidden, 2 * ex.hidden, ex.feature_dim};
  for (int l = 0; l < 3; ++l) {
    const int ci = widths[l], co = widths[l + 1];
    p.add("l" + std::to_string(l) + ".weight",
          nn::random_normal<float>(prng, {co, ci, 3, 3}, 1.0 / std::sqrt(9.0 * ci)));
    p.add("l" + std::to_string(l) + ".bias", nn::Tensor<float>({co}));
  }
  return p;
}

}  // namespace detail

/// Feature matrix (n x feature_dim). All images must share one shape.
inline Eigen::MatrixXd extract_features(std::span<const ImageTensor> images, const FeatureExtractor& ex,
                                        std::size_t chunk = 32) {
  if (ex.kind != FeatureKind::fixed_random_conv) {
    throw InvalidArgument("external feature extractors are not built in");
  }
  if (ex.feature_dim <= 0 || ex.hidden <= 0) throw InvalidArgument("feature dims must be positive");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), ex.feature_dim);
  if (images.empty()) return out;
  const int C = images[0].channels(), H = images[0].height(), W = images[0].width();
  const nn::ParamStore<float> weights = detail::feature_weights(ex, C);
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const std::size_t n = std::min(chunk, images.size() - start);
    nn::Tensor<float> x({static_cast<int>(n), C, H, W});
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    for (std::size_t i = 0; i < n; ++i) {
      const ImageTensor& img = images[start + i];
      if (img.height() != H || img.width() != W || img.channels() != C) {
        throw InvalidArgument("extract_features: images must share one shape");
      }
      auto v = img.values();
      for (int c = 0; c < C; ++c) {
        for (std::size_t k = 0; k < hw; ++k) x.data[(i * C + c) * hw + k] = 2.0f * v[k * C + c] - 1.0f;
      }
    }
    nn::Graph<float> g(nn::Graph<float>::Mode::inference);
    auto h = g.constant(std::move(x));
    for (int l = 0; l < 3; ++l) {
      const std::string name = "l" + std::to_string(l);
      h = g.conv2d(h, g.param(weights, name + ".weight"), g.param(weights, name + ".bias"), 2, 1);
      h = g.silu(h);
    }
    const nn::Tensor<float>& f = g.value(h);
    const std::size_t plane = static_cast<std::size_t>(f.dim(2)) * f.dim(3);
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < ex.feature_dim; ++d) {
        double s = 0.0;
        const float* src = &f.data[(i * ex.feature_dim + d) * plane];
        for (std::size_t k = 0; k < plane; ++k) s += src[k];
        out(static_cast<Eigen::Index>(start + i), d) = s / static_cast<double>(plane);
      }
    }
  }
  return out;
}

}  // namespace blindsr::metrics
