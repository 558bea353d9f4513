#pragma once

// Lossy JPEG round trip without entropy coding: colour conversion, optional
// 4:2:0 chroma subsampling, 8x8 DCT, quantisation with IJG-scaled Annex K
// tables, and the inverse path. Entropy coding is lossless, so the decoded
// pixels match a real baseline codec up to its upsampling/IDCT variant.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"

namespace blindsr::degrade {

inline constexpr std::array<int, 64> kLumaQuant = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr std::array<int, 64> kChromaQuant = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99};

/// IJG quality scaling: 5000/q below 50, else 200 - 2q; entries clamped to [1, 255].
inline std::array<int, 64> scaled_quant_table(const std::array<int, 64>& base, int quality) {
  if (quality < 1 || quality > 100) throw InvalidArgument("JPEG quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out{};
  for (std::size_t i = 0; i < 64; ++i) out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return out;
}

/// Largest DC quantisation step. A flat block reconstructs within step/16 of
/// its level, so 16 keeps constant images within one level at every quality.
inline constexpr int kMaxDcStep = 16;

struct JpegOptions {
  bool chroma_subsampling = true;  // 4:2:0 for 3-channel input
};

namespace detail {

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline const std::array<double, 64>& dct_basis() {
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(0.5) : 1.0;
      for (int x = 0; x < 8; ++x) {
        b[static_cast<std::size_t>(u * 8 + x)] = 0.5 * cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
    return b;
  }();
  return basis;
}

// Edge-replicating pad to multiples of `m`.
inline Plane pad_plane(const Plane& p, int m) {
  Plane out;
  out.h = (p.h + m - 1) / m * m;
  out.w = (p.w + m - 1) / m * m;
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) out.at(y, x) = p.at(std::min(y, p.h - 1), std::min(x, p.w - 1));
  }
  return out;
}

inline void quantize_blocks(Plane& p, const std::array<int, 64>& q) {
  const auto& b = dct_basis();
  std::array<double, 64> blk{}, tmp{}, coef{};
  for (int by = 0; by < p.h; by += 8) {
    for (int bx = 0; bx < p.w; bx += 8) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) blk[static_cast<std::size_t>(y * 8 + x)] = p.at(by + y, bx + x) - 128.0;
      }
      // Forward DCT, rows then columns.
      for (int y = 0; y < 8; ++y) {
        for (int u = 0; u < 8; ++u) {
          double s = 0;
          for (int x = 0; x < 8; ++x) s += b[static_cast<std::size_t>(u * 8 + x)] * blk[static_cast<std::size_t>(y * 8 + x)];
          tmp[static_cast<std::size_t>(y * 8 + u)] = s;
        }
      }
      for (int v = 0; v < 8; ++v) {
        for (int u = 0; u < 8; ++u) {
          double s = 0;
          for (int y = 0; y < 8; ++y) s += b[static_cast<std::size_t>(v * 8 + y)] * tmp[static_cast<std::size_t>(y * 8 + u)];
          const std::size_t k = static_cast<std::size_t>(v * 8 + u);
          coef[k] = std::round(s / q[k]) * q[k];
        }
      }
      // Inverse DCT.
      for (int v = 0; v < 8; ++v) {
        for (int x = 0; x < 8; ++x) {
          double s = 0;
          for (int u = 0; u < 8; ++u) s += b[static_cast<std::size_t>(u * 8 + x)] * coef[static_cast<std::size_t>(v * 8 + u)];
          tmp[static_cast<std::size_t>(v * 8 + x)] = s;
        }
      }
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          double s = 0;
          for (int v = 0; v < 8; ++v) s += b[static_cast<std::size_t>(v * 8 + y)] * tmp[static_cast<std::size_t>(v * 8 + x)];
          p.at(by + y, bx + x) = std::clamp(std::round(s + 128.0), 0.0, 255.0);
        }
      }
    }
  }
}

inline Plane downsample2(const Plane& p) {
  Plane out;
  out.h = p.h / 2;
  out.w = p.w / 2;
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      out.at(y, x) = std::round(0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                                        p.at(2 * y + 1, 2 * x + 1)));
    }
  }
  return out;
}

// Triangular ("fancy") 2x upsampling: each output sample takes 3/4 of the
// nearer and 1/4 of the farther input sample along each axis.
inline Plane upsample2(const Plane& p) {
  Plane rows;
  rows.h = p.h * 2;
  rows.w = p.w;
  rows.v.resize(static_cast<std::size_t>(rows.h) * rows.w);
  for (int y = 0; y < rows.h; ++y) {
    const int near = y / 2;
    const int far = std::clamp(y % 2 == 0 ? near - 1 : near + 1, 0, p.h - 1);
    for (int x = 0; x < p.w; ++x) rows.at(y, x) = 0.75 * p.at(near, x) + 0.25 * p.at(far, x);
  }
  Plane out;
  out.h = rows.h;
  out.w = p.w * 2;
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      const int near = x / 2;
      const int far = std::clamp(x % 2 == 0 ? near - 1 : near + 1, 0, p.w - 1);
      out.at(y, x) = 0.75 * rows.at(y, near) + 0.25 * rows.at(y, far);
    }
  }
  return out;
}

}  // namespace detail

/// Simulates JPEG compression at the given quality; output is unit domain.
inline ImageTensor jpeg_artifacts(const ImageTensor& img, int quality, const JpegOptions& opts = {}) {
  if (quality < 1 || quality > 100) throw InvalidArgument("JPEG quality must be in [1, 100]");
  const int ch = img.channels();
  if (ch != 1 && ch != 3) throw InvalidArgument("JPEG simulation needs 1 or 3 channels");
  const int h = img.height(), w = img.width();
  auto luma_q = scaled_quant_table(kLumaQuant, quality);
  auto chroma_q = scaled_quant_table(kChromaQuant, quality);
  luma_q[0] = std::min(luma_q[0], kMaxDcStep);
  chroma_q[0] = std::min(chroma_q[0], kMaxDcStep);
  auto level = [](float v) { return std::round(static_cast<double>(std::clamp(v, 0.0f, 1.0f)) * 255.0); };

  ImageTensor out(h, w, ch, Domain::unit);
  if (ch == 1) {
    detail::Plane y{h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) y.at(r, c) = level(img.at(r, c, 0));
    }
    detail::Plane yp = detail::pad_plane(y, 8);
    detail::quantize_blocks(yp, luma_q);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) out.at(r, c, 0) = static_cast<float>(yp.at(r, c) / 255.0);
    }
    return out;
  }

  detail::Plane Y{h, w, {}}, Cb{h, w, {}}, Cr{h, w, {}};
  for (auto* p : {&Y, &Cb, &Cr}) p->v.resize(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double R = level(img.at(r, c, 0)), G = level(img.at(r, c, 1)), B = level(img.at(r, c, 2));
      Y.at(r, c) = std::clamp(std::round(0.299 * R + 0.587 * G + 0.114 * B), 0.0, 255.0);
      Cb.at(r, c) = std::clamp(std::round(-0.168736 * R - 0.331264 * G + 0.5 * B + 128.0), 0.0, 255.0);
      Cr.at(r, c) = std::clamp(std::round(0.5 * R - 0.418688 * G - 0.081312 * B + 128.0), 0.0, 255.0);
    }
  }
  const int mcu = opts.chroma_subsampling ? 16 : 8;
  detail::Plane yp = detail::pad_plane(Y, mcu);
  detail::Plane cbp = detail::pad_plane(Cb, mcu);
  detail::Plane crp = detail::pad_plane(Cr, mcu);
  detail::quantize_blocks(yp, luma_q);
  if (opts.chroma_subsampling) {
    detail::Plane cbs = detail::downsample2(cbp), crs = detail::downsample2(crp);
    detail::quantize_blocks(cbs, chroma_q);
    detail::quantize_blocks(crs, chroma_q);
    cbp = detail::upsample2(cbs);
    crp = detail::upsample2(crs);
  } else {
    detail::quantize_blocks(cbp, chroma_q);
    detail::quantize_blocks(crp, chroma_q);
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double y = yp.at(r, c), cb = cbp.at(r, c) - 128.0, cr = crp.at(r, c) - 128.0;
      const double R = y + 1.402 * cr;
      const double G = y - 0.344136 * cb - 0.714136 * cr;
      const double B = y + 1.772 * cb;
      out.at(r, c, 0) = static_cast<float>(std::clamp(std::round(R), 0.0, 255.0) / 255.0);
      out.at(r, c, 1) = static_cast<float>(std::clamp(std::round(G), 0.0, 255.0) / 255.0);
      out.at(r, c, 2) = static_cast<float>(std::clamp(std::round(B), 0.0, 255.0) / 255.0);
    }
  }
  return out;
}

}  // namespace blindsr::degrade
