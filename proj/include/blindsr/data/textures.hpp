#pragma once

// Procedural test corpus: layered gratings, checkerboards, discs, stripes and
// smooth gradients with sharp edges at many scales, so that blur and
// compression visibly remove information a super-resolver has to restore.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/prng.hpp"

namespace blindsr::data {

namespace detail {

using Color = std::array<double, 3>;

inline Color random_color(Prng& prng) { return {prng.uniform(), prng.uniform(), prng.uniform()}; }

inline void blend(ImageTensor& img, int y, int x, const Color& c, double a) {
  for (int k = 0; k < img.channels(); ++k) {
    float& v = img.at(y, x, k);
    v = static_cast<float>((1.0 - a) * v + a * c[static_cast<std::size_t>(k)]);
  }
}

// Coverage of a soft edge at signed distance d (pixels); 1 px transition.
inline double edge(double d) { return std::clamp(0.5 - d, 0.0, 1.0); }

}  // namespace detail

enum class Primitive { grating, checker, disc, stripes, blob };

/// One synthetic RGB (or gray) texture image in the unit domain.
inline ImageTensor synth_texture(Prng& prng, int height, int width, int channels = 3) {
  if (channels != 1 && channels != 3) throw InvalidArgument("synth_texture: channels must be 1 or 3");
  ImageTensor img(height, width, channels, Domain::unit);
  const detail::Color c0 = detail::random_color(prng), c1 = detail::random_color(prng);
  const double ga = prng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = ((x - width / 2.0) * std::cos(ga) + (y - height / 2.0) * std::sin(ga)) / std::max(height, width) + 0.5;
      const double s = std::clamp(u, 0.0, 1.0);
      for (int k = 0; k < channels; ++k) {
        img.at(y, x, k) = static_cast<float>((1 - s) * c0[static_cast<std::size_t>(k)] + s * c1[static_cast<std::size_t>(k)]);
      }
    }
  }

  const int layers = static_cast<int>(prng.uniform_int(3, 6));
  const double scale = std::max(height, width);
  for (int l = 0; l < layers; ++l) {
    const auto kind = static_cast<Primitive>(prng.uniform_int(0, 4));
    const detail::Color col = detail::random_color(prng);
    const double alpha = prng.uniform(0.5, 1.0);
    const double theta = prng.uniform(0.0, std::numbers::pi);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double period = prng.uniform(2.5, 0.25 * scale);
    const double phase = prng.uniform(0.0, 2.0 * std::numbers::pi);
    const double cy = prng.uniform(0.0, height), cx = prng.uniform(0.0, width);
    const double radius = prng.uniform(0.08, 0.45) * scale;
    // Region mask for partial layers: half-plane through the centre.
    const bool masked = kind != Primitive::disc && prng.bernoulli(0.5);
    const double mt = prng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double along = dx * ct + dy * st;
        const double across = -dx * st + dy * ct;
        double a = 0.0;
        switch (kind) {
          case Primitive::grating:
            a = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * along / period + phase);
            break;
          case Primitive::checker: {
            const double p = std::floor(along / period) + std::floor(across / period);
            a = std::fmod(std::abs(p), 2.0) < 1.0 ? 1.0 : 0.0;
            break;
          }
          case Primitive::disc:
            a = detail::edge(std::hypot(dx, dy) - radius);
            break;
          case Primitive::stripes: {
            const double f = along / period - std::floor(along / period);
            a = f < 0.5 ? 1.0 : 0.0;
            break;
          }
          case Primitive::blob:
            a = std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
            break;
        }
        if (masked) a *= detail::edge(-(dx * std::cos(mt) + dy * std::sin(mt)));
        if (a > 0.0) detail::blend(img, y, x, col, alpha * a);
      }
    }
  }
  return img;
}

}  // namespace blindsr::data
