#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/diffusion/process.hpp"
#include "blindsr/diffusion/schedule.hpp"

namespace blindsr::diffusion {

/// One batched call of the noise-prediction network eps_theta(z_t, t, c_tau, tau).
/// `ids` identifies each chain (e.g. its eval-pair index) for oracle denoisers;
/// learned denoisers ignore it.
struct DenoiseRequest {
  std::span<const ImageTensor> z;
  double t;
  std::span<const ImageTensor> cond;
  double tau;
  std::span<const std::size_t> ids;
};

using Denoiser = std::function<std::vector<ImageTensor>(const DenoiseRequest&)>;

struct SamplerOptions {
  /// Clamp intermediate x_hat estimates to [0, 1] before the posterior step.
  bool clip_prediction = false;
};

struct LossItem {
  ImageTensor x;      // clean target, unit domain
  ImageTensor cond;   // conditioning, already noise-augmented
  double t;
  double tau;
};

/// Monte-Carlo estimate of E ||eps_theta(z_t, t, c) - eps||^2 per element for a
/// batch: draws eps, forms z_t, queries the denoiser once for the whole batch.
inline double eps_loss(const Denoiser& denoiser, std::span<const LossItem> batch, const NoiseSchedule& sched,
                       Prng& prng, std::int64_t step = 0) {
  if (batch.empty()) throw InvalidArgument("eps_loss: empty batch");
  std::vector<ImageTensor> eps, z, cond;
  std::vector<std::size_t> ids(batch.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  double total = 0.0;
  std::size_t count = 0;
  // Items may carry different t, so the denoiser is called per item.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LossItem& it = batch[i];
    ImageTensor e = sample_standard_normal_like(prng, it.x);
    ImageTensor zt = forward_sample(it.x, it.t, e, sched);
    DenoiseRequest req{std::span<const ImageTensor>(&zt, 1), it.t, std::span<const ImageTensor>(&it.cond, 1),
                       it.tau, std::span<const std::size_t>(&ids[i], 1)};
    const std::vector<ImageTensor> pred = denoiser(req);
    if (pred.size() != 1 || !pred[0].same_shape(e)) throw InvalidArgument("eps_loss: denoiser output shape");
    for (std::size_t k = 0; k < e.size(); ++k) {
      const double d = static_cast<double>(pred[0].values()[k]) - e.values()[k];
      total += d * d;
    }
    count += e.size();
  }
  const double loss = total / static_cast<double>(count);
  if (!std::isfinite(loss)) throw DivergenceError(step, "non-finite eps loss");
  return loss;
}

/// Ancestral (DDPM) sampling for a batch of independent chains.
///
/// Each chain i owns `prngs[i]`: z_1 ~ N(0, I) and every posterior draw come
/// from it, so a chain's output does not depend on how chains are batched.
/// Steps walk the plan's grid; at the final step (s = 0) no noise is added and
/// the clamped x_hat is returned.
inline std::vector<ImageTensor> ancestral_sample_batch(const Denoiser& denoiser, std::span<const ImageTensor> c_aug,
                                                       double tau, const DiffusionStepPlan& plan,
                                                       std::span<Prng> prngs, const NoiseSchedule& sched,
                                                       std::span<const std::size_t> ids = {},
                                                       const SamplerOptions& opts = {}) {
  const std::size_t n = c_aug.size();
  if (prngs.size() != n) throw InvalidArgument("ancestral_sample: one Prng per chain required");
  std::vector<std::size_t> default_ids;
  if (ids.empty()) {
    default_ids.resize(n);
    std::iota(default_ids.begin(), default_ids.end(), std::size_t{0});
    ids = default_ids;
  }
  std::vector<ImageTensor> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = sample_standard_normal_like(prngs[i], c_aug[i]);

  const std::vector<double> ts = plan.timesteps();
  std::vector<ImageTensor> result(n);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double t = ts[k];
    const double s = ts[k + 1];
    DenoiseRequest req{z, t, c_aug, tau, ids};
    std::vector<ImageTensor> eps_hat = denoiser(req);
    if (eps_hat.size() != n) throw InvalidArgument("denoiser returned wrong batch size");
    const auto step = static_cast<std::int64_t>(k);
    for (std::size_t i = 0; i < n; ++i) {
      if (!eps_hat[i].same_shape(z[i])) throw InvalidArgument("denoiser output shape mismatch");
      if (!eps_hat[i].all_finite()) {
        throw DivergenceError(step, "denoiser produced non-finite output for chain " + std::to_string(ids[i]));
      }
      ImageTensor x_hat = predict_x(z[i], eps_hat[i], t, sched);
      if (s == 0.0) {
        result[i] = x_hat.clamped();
        continue;
      }
      if (opts.clip_prediction) x_hat = x_hat.clamped();
      z[i] = posterior_sample(z[i], x_hat, s, t, prngs[i], sched);
      if (!z[i].all_finite()) throw DivergenceError(step, "sampling diverged on chain " + std::to_string(ids[i]));
    }
  }
  return result;
}

/// Single-chain convenience wrapper.
inline ImageTensor ancestral_sample(const Denoiser& denoiser, const ImageTensor& c_aug, double tau,
                                    const DiffusionStepPlan& plan, Prng& prng, const NoiseSchedule& sched,
                                    const SamplerOptions& opts = {}) {
  std::vector<Prng> prngs{prng};
  std::vector<ImageTensor> out =
      ancestral_sample_batch(denoiser, std::span<const ImageTensor>(&c_aug, 1), tau, plan, prngs, sched, {}, opts);
  prng = prngs[0];
  return std::move(out[0]);
}

}  // namespace blindsr::diffusion
