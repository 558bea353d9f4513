#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"

namespace blindsr::metrics {

inline constexpr double kPsnrCap = 99.0;

inline double mse(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw InvalidArgument("mse: image dims differ");
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    s += d * d;
  }
  return s / static_cast<double>(av.size());
}

/// 10 log10(1 / MSE) for unit-domain images, capped at 99 dB (the value
/// reported for identical images).
inline double psnr(const ImageTensor& a, const ImageTensor& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Normalised 1-D gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    w[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Mean SSIM over all valid window positions, averaged over channels.
inline double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& p = {}) {
  if (!a.same_shape(b)) throw InvalidArgument("ssim: image dims differ");
  if (a.height() < p.window || a.width() < p.window) {
    throw InvalidArgument("ssim: image smaller than the " + std::to_string(p.window) + "x" +
                          std::to_string(p.window) + " window");
  }
  const int h = a.height(), w = a.width(), ch = a.channels(), n = p.window;
  const int oh = h - n + 1, ow = w - n + 1;
  const std::vector<double> g = gaussian_window(n, p.sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

  // Separable filtering of x, y, x^2, y^2, xy: rows first into (h, ow).
  std::array<std::vector<double>, 5> rows;
  for (auto& r : rows) r.resize(static_cast<std::size_t>(h) * ow);
  double total = 0.0;
  for (int c = 0; c < ch; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < ow; ++x) {
        double s[5] = {0, 0, 0, 0, 0};
        for (int k = 0; k < n; ++k) {
          const double wk = g[static_cast<std::size_t>(k)];
          const double va = a.at(y, x + k, c), vb = b.at(y, x + k, c);
          s[0] += wk * va;
          s[1] += wk * vb;
          s[2] += wk * va * va;
          s[3] += wk * vb * vb;
          s[4] += wk * va * vb;
        }
        for (int q = 0; q < 5; ++q) rows[static_cast<std::size_t>(q)][static_cast<std::size_t>(y) * ow + x] = s[q];
      }
    }
    double acc = 0.0;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double s[5] = {0, 0, 0, 0, 0};
        for (int k = 0; k < n; ++k) {
          const double wk = g[static_cast<std::size_t>(k)];
          for (int q = 0; q < 5; ++q) s[q] += wk * rows[static_cast<std::size_t>(q)][static_cast<std::size_t>(y + k) * ow + x];
        }
        const double mu_a = s[0], mu_b = s[1];
        const double var_a = s[2] - mu_a * mu_a;
        const double var_b = s[3] - mu_b * mu_b;
        const double cov = s[4] - mu_a * mu_b;
        acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      }
    }
    total += acc / (static_cast<double>(oh) * ow);
  }
  return total / ch;
}

}  // namespace blindsr::metrics
