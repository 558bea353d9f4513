#pragma once

#include <cmath>
#include <utility>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/diffusion/schedule.hpp"

namespace blindsr::diffusion {

/// z_t = sqrt(alpha_t) x + sqrt(1 - alpha_t) eps.
inline ImageTensor forward_sample(const ImageTensor& x, double t, const ImageTensor& eps,
                                  const NoiseSchedule& sched) {
  if (!x.same_shape(eps)) throw InvalidArgument("forward_sample: x and eps shapes differ");
  const ScheduleCoeffs c = sched.coeffs(t);
  ImageTensor z(x.height(), x.width(), x.channels(), Domain::latent);
  auto xv = x.values();
  auto ev = eps.values();
  auto zv = z.values();
  for (std::size_t i = 0; i < zv.size(); ++i) {
    zv[i] = static_cast<float>(c.sqrt_alpha * xv[i] + c.sqrt_one_minus_alpha * ev[i]);
  }
  return z;
}

/// Inverts the forward process for a noise estimate:
/// x_hat = (z_t - sqrt(1 - alpha_t) eps_hat) / sqrt(alpha_t).
inline ImageTensor predict_x(const ImageTensor& z, const ImageTensor& eps_hat, double t,
                             const NoiseSchedule& sched) {
  if (!z.same_shape(eps_hat)) throw InvalidArgument("predict_x: z and eps_hat shapes differ");
  const ScheduleCoeffs c = sched.coeffs(t);
  if (!(c.sqrt_alpha > 0.0)) throw SingularScheduleError("sqrt(alpha_t) is zero; widen the log-SNR clamp");
  ImageTensor x(z.height(), z.width(), z.channels(), Domain::latent);
  auto zv = z.values();
  auto ev = eps_hat.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    xv[i] = static_cast<float>((zv[i] - c.sqrt_one_minus_alpha * ev[i]) / c.sqrt_alpha);
  }
  return x;
}

/// Moments of q(z_s | z_t, x) for s < t:
///   mean = coef_z * z_t + coef_x * x,   variance = var (isotropic).
struct PosteriorCoeffs {
  double coef_z;
  double coef_x;
  double variance;
};

inline PosteriorCoeffs posterior_coeffs(double s, double t, const NoiseSchedule& sched) {
  if (!(s < t)) throw InvalidArgument("posterior requires s < t");
  const ScheduleCoeffs cs = sched.coeffs(s);
  const ScheduleCoeffs ct = sched.coeffs(t);
  // alpha_{t|s} = alpha_t / alpha_s, computed in log space so that s -> t
  // gives an exact zero rather than a cancellation residue.
  const double log_ratio = ct.log_alpha - cs.log_alpha;
  const double alpha_ts = std::exp(log_ratio);
  const double one_minus_alpha_ts = -std::expm1(log_ratio);
  PosteriorCoeffs p{};
  p.coef_z = std::sqrt(alpha_ts) * cs.one_minus_alpha / ct.one_minus_alpha;
  p.coef_x = cs.sqrt_alpha * one_minus_alpha_ts / ct.one_minus_alpha;
  p.variance = one_minus_alpha_ts * cs.one_minus_alpha / ct.one_minus_alpha;
  return p;
}

/// Draws z_s ~ q(z_s | z_t, x_hat).
inline ImageTensor posterior_sample(const ImageTensor& z_t, const ImageTensor& x_hat, double s, double t,
                                    Prng& prng, const NoiseSchedule& sched) {
  if (!z_t.same_shape(x_hat)) throw InvalidArgument("posterior_sample: shape mismatch");
  const PosteriorCoeffs p = posterior_coeffs(s, t, sched);
  const double sd = std::sqrt(std::max(p.variance, 0.0));
  ImageTensor out(z_t.height(), z_t.width(), z_t.channels(), Domain::latent);
  auto zv = z_t.values();
  auto xv = x_hat.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    ov[i] = static_cast<float>(p.coef_z * zv[i] + p.coef_x * xv[i] + sd * prng.normal());
  }
  return out;
}

/// Noise-conditioning augmentation: c_tau ~ q(z_tau | c), reusing the forward
/// marginal. The level tau must be fed to the denoiser alongside c_tau.
inline ImageTensor noise_augment(const ImageTensor& c, double tau, Prng& prng, const NoiseSchedule& sched,
                                 double tau_max = 1.0) {
  if (!(tau >= 0.0 && tau <= tau_max)) {
    throw InvalidArgument("noise_augment: tau " + std::to_string(tau) + " outside [0, tau_max]");
  }
  const ImageTensor eps = sample_standard_normal_like(prng, c);
  return forward_sample(c, tau, eps, sched);
}

}  // namespace blindsr::diffusion
