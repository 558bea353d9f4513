#pragma once

#include <algorithm>
#include <vector>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/degrade/kernels.hpp"

namespace blindsr::degrade {

enum class Clamp { yes, no };

/// Mirror index into [0, n) without repeating the edge sample (… 2 1 | 0 1 2 … n-1 | n-2 …).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace detail {

// Correlation with repeated mirror folding, so any kernel size is accepted.
inline ImageTensor convolve_reflect(const ImageTensor& img, const Kernel2D& kernel, Clamp clamp) {
  const int h = img.height(), w = img.width(), ch = img.channels();
  const int r = kernel.radius;
  std::vector<int> ry(static_cast<std::size_t>(h + 2 * r)), rx(static_cast<std::size_t>(w + 2 * r));
  for (int i = 0; i < h + 2 * r; ++i) ry[static_cast<std::size_t>(i)] = reflect_index(i - r, h);
  for (int i = 0; i < w + 2 * r; ++i) rx[static_cast<std::size_t>(i)] = reflect_index(i - r, w);

  ImageTensor out(h, w, ch, clamp == Clamp::yes ? Domain::unit : Domain::latent);
  const int n = kernel.size();
  std::vector<double> acc(static_cast<std::size_t>(ch));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int ky = 0; ky < n; ++ky) {
        const int sy = ry[static_cast<std::size_t>(y + ky)];
        for (int kx = 0; kx < n; ++kx) {
          const double kw = kernel.weights[static_cast<std::size_t>(ky * n + kx)];
          const int sx = rx[static_cast<std::size_t>(x + kx)];
          for (int c = 0; c < ch; ++c) acc[static_cast<std::size_t>(c)] += kw * img.at(sy, sx, c);
        }
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

}  // namespace detail

/// 2-D correlation with reflect padding; output has the input's dims.
/// Kernels may be at most 2 min(H, W) + 1 wide.
inline ImageTensor convolve(const ImageTensor& img, const Kernel2D& kernel, Clamp clamp = Clamp::yes) {
  if (kernel.size() > 2 * std::min(img.height(), img.width()) + 1) {
    throw InvalidArgument("convolve: kernel of size " + std::to_string(kernel.size()) + " too large for " +
                          std::to_string(img.height()) + "x" + std::to_string(img.width()) + " image");
  }
  return detail::convolve_reflect(img, kernel, clamp);
}

}  // namespace blindsr::degrade
