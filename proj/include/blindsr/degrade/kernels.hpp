#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/prng.hpp"

namespace blindsr::degrade {

enum class BlurFamily { gaussian, generalized_gaussian, plateau, sinc };

inline const char* to_string(BlurFamily f) {
  switch (f) {
    case BlurFamily::gaussian: return "gaussian";
    case BlurFamily::generalized_gaussian: return "generalized_gaussian";
    case BlurFamily::plateau: return "plateau";
    case BlurFamily::sinc: return "sinc";
  }
  return "?";
}

inline BlurFamily blur_family_from_string(const std::string& s) {
  if (s == "gaussian") return BlurFamily::gaussian;
  if (s == "generalized_gaussian") return BlurFamily::generalized_gaussian;
  if (s == "plateau") return BlurFamily::plateau;
  if (s == "sinc") return BlurFamily::sinc;
  throw InvalidArgument("unknown blur family '" + s + "'");
}

/// Sampling ranges for blur kernels. Stage 2 narrows sigma to [0.2, 1.5].
struct BlurSampling {
  std::array<double, 4> family_probs{0.63, 0.135, 0.135, 0.1};
  double gaussian_iso_prob = 9.0 / 14.0;   // gaussian and generalized gaussian
  double plateau_iso_prob = 0.8;
  double sigma_min = 0.2;
  double sigma_max = 3.0;
  double gen_beta_min = 0.5, gen_beta_max = 4.0;
  double plateau_beta_min = 1.0, plateau_beta_max = 2.0;
  std::array<int, 5> radii{3, 5, 7, 9, 11};

  static BlurSampling stage(int stage) {
    if (stage != 1 && stage != 2) throw InvalidArgument("blur stage must be 1 or 2");
    BlurSampling s;
    if (stage == 2) s.sigma_max = 1.5;
    return s;
  }
};

/// Parameters of one blur kernel. The rendered kernel is (2r+1) x (2r+1).
struct BlurKernelSpec {
  BlurFamily family = BlurFamily::gaussian;
  bool isotropic = true;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double rotation = 0.0;  // radians in (-pi, pi]
  double beta = 1.0;
  int radius = 3;
  double cutoff = std::numbers::pi;  // sinc only, radians per pixel

  int size() const noexcept { return 2 * radius + 1; }

  static BlurKernelSpec gaussian(double sigma, int radius) {
    BlurKernelSpec s;
    s.sigma_x = s.sigma_y = sigma;
    s.radius = radius;
    return s;
  }

  static BlurKernelSpec sinc_kernel(double cutoff, int radius) {
    BlurKernelSpec s;
    s.family = BlurFamily::sinc;
    s.cutoff = cutoff;
    s.radius = radius;
    s.sigma_x = s.sigma_y = 0.0;
    return s;
  }
};

inline double sinc_cutoff_min(int radius) {
  return radius < 6 ? std::numbers::pi / 3.0 : std::numbers::pi / 5.0;
}

/// Samples a blur kernel spec: family by the configured probabilities, odd
/// radius uniformly from {3, ..., 11}, then the family's own parameters.
inline BlurKernelSpec sample_blur_spec(Prng& prng, const BlurSampling& cfg) {
  BlurKernelSpec spec;
  const double u = prng.uniform();
  double acc = 0.0;
  int fam = 3;
  for (int i = 0; i < 4; ++i) {
    acc += cfg.family_probs[static_cast<std::size_t>(i)];
    if (u < acc) {
      fam = i;
      break;
    }
  }
  spec.family = static_cast<BlurFamily>(fam);
  spec.radius = cfg.radii[static_cast<std::size_t>(prng.uniform_int(0, cfg.radii.size() - 1))];

  if (spec.family == BlurFamily::sinc) {
    spec.isotropic = true;
    spec.sigma_x = spec.sigma_y = 0.0;
    spec.cutoff = prng.uniform(sinc_cutoff_min(spec.radius), std::numbers::pi);
    return spec;
  }

  const double iso_prob = spec.family == BlurFamily::plateau ? cfg.plateau_iso_prob : cfg.gaussian_iso_prob;
  spec.isotropic = prng.bernoulli(iso_prob);
  if (spec.isotropic) {
    spec.sigma_x = spec.sigma_y = prng.uniform(cfg.sigma_min, cfg.sigma_max);
    spec.rotation = 0.0;
  } else {
    spec.sigma_x = prng.uniform(cfg.sigma_min, cfg.sigma_max);
    spec.sigma_y = prng.uniform(cfg.sigma_min, cfg.sigma_max);
    // (-pi, pi]: mirror the half-open uniform draw.
    spec.rotation = std::numbers::pi - 2.0 * std::numbers::pi * prng.uniform();
  }
  if (spec.family == BlurFamily::generalized_gaussian) {
    spec.beta = prng.uniform(cfg.gen_beta_min, cfg.gen_beta_max);
  } else if (spec.family == BlurFamily::plateau) {
    spec.beta = prng.uniform(cfg.plateau_beta_min, cfg.plateau_beta_max);
  }
  return spec;
}

inline BlurKernelSpec sample_blur_spec(Prng& prng, int stage) {
  return sample_blur_spec(prng, BlurSampling::stage(stage));
}

/// Square kernel with odd side `size()`, row-major, weights summing to 1.
struct Kernel2D {
  int radius = 0;
  std::vector<double> weights;

  int size() const noexcept { return 2 * radius + 1; }
  double at(int dy, int dx) const {
    return weights[static_cast<std::size_t>((dy + radius) * size() + (dx + radius))];
  }

  static Kernel2D delta() { return Kernel2D{0, {1.0}}; }

  static Kernel2D box(int radius) {
    const int n = 2 * radius + 1;
    return Kernel2D{radius, std::vector<double>(static_cast<std::size_t>(n * n), 1.0 / (n * n))};
  }
};

/// Circular low-pass impulse response w J1(w rho) / (2 pi rho) with its
/// rho -> 0 limit w^2 / (4 pi).
inline double circular_lowpass(double cutoff, double rho) {
  if (rho < 1e-12) return cutoff * cutoff / (4.0 * std::numbers::pi);
  return cutoff * std::cyl_bessel_j(1.0, cutoff * rho) / (2.0 * std::numbers::pi * rho);
}

/// Renders a spec. With d^2 the Mahalanobis distance under
/// Sigma = R diag(sx^2, sy^2) R^T the profiles are
///   gaussian             exp(-d^2 / 2)
///   generalized gaussian exp(-(d^2 / 2)^(beta / 2))   (beta = 2 is the gaussian)
///   plateau              1 / (1 + (d^2 / 2)^beta)
/// and sinc is the circular low-pass above. Result is normalized to sum 1.
inline Kernel2D render_kernel(const BlurKernelSpec& spec) {
  if (spec.radius < 0) throw InvalidArgument("kernel radius must be non-negative");
  Kernel2D k;
  k.radius = spec.radius;
  const int n = spec.size();
  k.weights.resize(static_cast<std::size_t>(n) * n);

  double inv00 = 0, inv01 = 0, inv11 = 0;
  if (spec.family != BlurFamily::sinc) {
    if (!(spec.sigma_x > 0 && spec.sigma_y > 0)) throw InvalidArgument("kernel sigma must be positive");
    const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
    const double vx = spec.sigma_x * spec.sigma_x, vy = spec.sigma_y * spec.sigma_y;
    // Sigma = R diag(vx, vy) R^T; its inverse is R diag(1/vx, 1/vy) R^T.
    inv00 = c * c / vx + s * s / vy;
    inv01 = c * s / vx - c * s / vy;
    inv11 = s * s / vx + c * c / vy;
  }

  double total = 0.0;
  for (int i = -spec.radius; i <= spec.radius; ++i) {      // row offset (y)
    for (int j = -spec.radius; j <= spec.radius; ++j) {    // column offset (x)
      double w = 0.0;
      const double x = j, y = i;
      if (spec.family == BlurFamily::sinc) {
        w = circular_lowpass(spec.cutoff, std::sqrt(x * x + y * y));
      } else {
        const double half_d2 = 0.5 * (inv00 * x * x + 2.0 * inv01 * x * y + inv11 * y * y);
        switch (spec.family) {
          case BlurFamily::gaussian: w = std::exp(-half_d2); break;
          case BlurFamily::generalized_gaussian: w = std::exp(-std::pow(half_d2, 0.5 * spec.beta)); break;
          case BlurFamily::plateau: w = 1.0 / (1.0 + std::pow(half_d2, spec.beta)); break;
          case BlurFamily::sinc: break;
        }
      }
      k.weights[static_cast<std::size_t>((i + spec.radius) * n + (j + spec.radius))] = w;
      total += w;
    }
  }
  for (double& w : k.weights) w /= total;
  return k;
}

inline void to_json(nlohmann::json& j, const BlurKernelSpec& s) {
  j = {{"family", to_string(s.family)}, {"isotropic", s.isotropic}, {"sigma_x", s.sigma_x},
       {"sigma_y", s.sigma_y},          {"rotation", s.rotation},   {"beta", s.beta},
       {"radius", s.radius},            {"cutoff", s.cutoff}};
}

inline void from_json(const nlohmann::json& j, BlurKernelSpec& s) {
  s.family = blur_family_from_string(j.at("family").get<std::string>());
  s.isotropic = j.at("isotropic").get<bool>();
  s.sigma_x = j.at("sigma_x").get<double>();
  s.sigma_y = j.at("sigma_y").get<double>();
  s.rotation = j.at("rotation").get<double>();
  s.beta = j.at("beta").get<double>();
  s.radius = j.at("radius").get<int>();
  s.cutoff = j.at("cutoff").get<double>();
}

}  // namespace blindsr::degrade
