#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/degrade/filter.hpp"

namespace blindsr::degrade {

enum class ResizeMode { area, bilinear, bicubic };

inline const char* to_string(ResizeMode m) {
  switch (m) {
    case ResizeMode::area: return "area";
    case ResizeMode::bilinear: return "bilinear";
    case ResizeMode::bicubic: return "bicubic";
  }
  return "?";
}

inline ResizeMode resize_mode_from_string(const std::string& s) {
  if (s == "area") return ResizeMode::area;
  if (s == "bilinear") return ResizeMode::bilinear;
  if (s == "bicubic") return ResizeMode::bicubic;
  throw InvalidArgument("unknown resize mode '" + s + "'");
}

/// Keys cubic convolution kernel with a = -0.5.
inline double keys_cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

struct Tap {
  int src;
  double weight;
};

// Per-output-index taps for one axis. Interpolating modes use half-pixel
// centres and replicate the edge sample; area mode integrates the exact
// (possibly fractional) source interval covered by each output cell.
inline std::vector<std::vector<Tap>> axis_taps(int in, int out, ResizeMode mode) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(out) / in;
  auto clampi = [in](int i) { return std::clamp(i, 0, in - 1); };
  for (int o = 0; o < out; ++o) {
    auto& t = taps[static_cast<std::size_t>(o)];
    if (mode == ResizeMode::area) {
      const double lo = static_cast<double>(o) * in / out;
      const double hi = static_cast<double>(o + 1) * in / out;
      for (int k = static_cast<int>(std::floor(lo)); k < static_cast<int>(std::ceil(hi)); ++k) {
        const double overlap = std::min(hi, k + 1.0) - std::max(lo, static_cast<double>(k));
        if (overlap > 0) t.push_back({clampi(k), overlap});
      }
    } else {
      const double src = (o + 0.5) / scale - 0.5;
      const int i0 = static_cast<int>(std::floor(src));
      const double f = src - i0;
      if (mode == ResizeMode::bilinear) {
        t.push_back({clampi(i0), 1.0 - f});
        t.push_back({clampi(i0 + 1), f});
      } else {
        for (int k = -1; k <= 2; ++k) t.push_back({clampi(i0 + k), keys_cubic(f - k)});
      }
    }
    double total = 0.0;
    for (const Tap& tp : t) total += tp.weight;
    for (Tap& tp : t) tp.weight /= total;
  }
  return taps;
}

}  // namespace detail

/// Resizes to exactly (out_h, out_w).
inline ImageTensor resize_to(const ImageTensor& img, int out_h, int out_w, ResizeMode mode,
                             Clamp clamp = Clamp::yes) {
  if (out_h <= 0 || out_w <= 0) throw InvalidArgument("resize: output dims must be >= 1");
  const int h = img.height(), w = img.width(), ch = img.channels();
  const auto tx = detail::axis_taps(w, out_w, mode);
  const auto ty = detail::axis_taps(h, out_h, mode);

  // Horizontal pass into a double buffer, then vertical pass.
  std::vector<double> mid(static_cast<std::size_t>(h) * out_w * ch, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double* dst = &mid[(static_cast<std::size_t>(y) * out_w + x) * ch];
      for (const auto& tp : tx[static_cast<std::size_t>(x)]) {
        for (int c = 0; c < ch; ++c) dst[c] += tp.weight * img.at(y, tp.src, c);
      }
    }
  }
  ImageTensor out(out_h, out_w, ch, clamp == Clamp::yes ? Domain::unit : Domain::latent);
  std::vector<double> acc(static_cast<std::size_t>(ch));
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& tp : ty[static_cast<std::size_t>(y)]) {
        const double* src = &mid[(static_cast<std::size_t>(tp.src) * out_w + x) * ch];
        for (int c = 0; c < ch; ++c) acc[static_cast<std::size_t>(c)] += tp.weight * src[c];
      }
      for (int c = 0; c < ch; ++c) {
        float v = static_cast<float>(acc[static_cast<std::size_t>(c)]);
        if (clamp == Clamp::yes) v = std::clamp(v, 0.0f, 1.0f);
        out.at(y, x, c) = v;
      }
    }
  }
  return out;
}

/// Output dims round(scale * dims).
inline int scaled_dim(int dim, double scale) {
  if (!(scale > 0)) throw InvalidArgument("resize: scale must be positive");
  const long v = std::lround(scale * dim);
  if (v < 1) throw InvalidArgument("resize: scale " + std::to_string(scale) + " collapses a dimension to 0");
  return static_cast<int>(v);
}

inline ImageTensor resize(const ImageTensor& img, double scale, ResizeMode mode, Clamp clamp = Clamp::yes) {
  return resize_to(img, scaled_dim(img.height(), scale), scaled_dim(img.width(), scale), mode, clamp);
}

}  // namespace blindsr::degrade
