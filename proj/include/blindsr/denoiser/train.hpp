#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/denoiser/unet.hpp"
#include "blindsr/diffusion/process.hpp"
#include "blindsr/diffusion/schedule.hpp"
#include "blindsr/nn/graph.hpp"
#include "blindsr/nn/optim.hpp"

namespace blindsr::denoiser {

struct TrainConfig {
  int batch_size = 16;
  std::int64_t steps = 50000;
  double learning_rate = 1e-4;
  std::int64_t warmup_steps = 1000;
  double grad_clip_norm = 1.0;
  double tau_max = 0.5;
  bool use_nca = true;
  double loss_ema = 0.99;

  void validate() const {
    if (batch_size <= 0 || steps <= 0) throw InvalidArgument("batch_size and steps must be positive");
    if (!(learning_rate > 0.0) || !(grad_clip_norm > 0.0)) {
      throw InvalidArgument("learning_rate and grad_clip_norm must be positive");
    }
    if (warmup_steps < 0) throw InvalidArgument("warmup_steps must be >= 0");
    if (!(tau_max > 0.0 && tau_max <= 1.0)) throw InvalidArgument("tau_max must be in (0, 1]");
    if (!(loss_ema >= 0.0 && loss_ema < 1.0)) throw InvalidArgument("loss_ema must be in [0, 1)");
  }

  nn::AdamConfig adam() const {
    nn::AdamConfig a;
    a.learning_rate = learning_rate;
    a.warmup_steps = warmup_steps;
    return a;
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},     {"steps", c.steps},
       {"learning_rate", c.learning_rate}, {"warmup_steps", c.warmup_steps},
       {"grad_clip_norm", c.grad_clip_norm}, {"tau_max", c.tau_max},
       {"use_nca", c.use_nca},           {"loss_ema", c.loss_ema}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.steps = j.value("steps", d.steps);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.warmup_steps = j.value("warmup_steps", d.warmup_steps);
  c.grad_clip_norm = j.value("grad_clip_norm", d.grad_clip_norm);
  c.tau_max = j.value("tau_max", d.tau_max);
  c.use_nca = j.value("use_nca", d.use_nca);
  c.loss_ema = j.value("loss_ema", d.loss_ema);
  c.validate();
}

/// Clean target x and bicubic-upsampled conditioning c, both unit domain and
/// of equal size.
struct TrainPair {
  ImageTensor x;
  ImageTensor c;
};

/// Supplies the batch for a given step. Must be a pure function of
/// (step, prng state) for training to be reproducible.
using BatchSource = std::function<std::vector<TrainPair>(std::int64_t step, int batch_size, Prng& prng)>;

/// Uniform sampling with replacement from a fixed pool.
inline BatchSource pool_source(std::vector<TrainPair> pool) {
  if (pool.empty()) throw EmptyCorpusError("training pool is empty");
  return [pool = std::move(pool)](std::int64_t, int batch_size, Prng& prng) {
    std::vector<TrainPair> out;
    out.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
      out.push_back(pool[static_cast<std::size_t>(prng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);
    }
    return out;
  };
}

struct TrainState {
  nn::ParamStore<float> params;
  nn::Adam<float> optimizer;
  std::int64_t step = 0;
};

struct LossCurve {
  std::vector<double> raw;
  std::vector<double> smoothed;
};

struct StepStats {
  double loss = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
};

/// One optimisation step. Per item: t ~ U(0, 1); with NCA, tau ~ U(0, tau_max)
/// and c is replaced by c_tau ~ q(z_tau | c); otherwise tau = 0 and c is used
/// as is. The loss is the mean squared error between predicted and true eps.
inline StepStats train_step(TrainState& st, const UNetConfig& ucfg, const TrainConfig& cfg,
                            const std::vector<TrainPair>& batch, const diffusion::NoiseSchedule& sched, Prng& prng) {
  const std::size_t n = batch.size();
  std::vector<double> ts(n), taus(n);
  std::vector<ImageTensor> z(n), c(n), eps(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = prng.uniform();
    if (cfg.use_nca) {
      taus[i] = prng.uniform(0.0, cfg.tau_max);
      c[i] = diffusion::noise_augment(batch[i].c, taus[i], prng, sched, cfg.tau_max);
    } else {
      taus[i] = 0.0;
      c[i] = batch[i].c;
    }
    eps[i] = sample_standard_normal_like(prng, batch[i].x);
    z[i] = diffusion::forward_sample(batch[i].x, ts[i], eps[i], sched);
  }

  nn::Graph<float> g;
  auto in = g.constant(pack_inputs<float>(z, c));
  auto out = unet_forward<float>(g, st.params, ucfg, in, ts, taus);
  auto loss = g.mse(out, pack_images<float>(eps));
  StepStats stats;
  stats.loss = g.value(loss).data[0];
  if (!std::isfinite(stats.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss; t = [";
    for (std::size_t i = 0; i < n; ++i) msg << (i ? ", " : "") << ts[i];
    msg << "], tau = [";
    for (std::size_t i = 0; i < n; ++i) msg << (i ? ", " : "") << taus[i];
    msg << "]";
    throw DivergenceError(st.step, msg.str());
  }
  st.params.zero_grad();
  g.backward(loss);
  stats.grad_norm = nn::clip_grad_norm(st.params, cfg.grad_clip_norm);
  if (!std::isfinite(stats.grad_norm)) throw DivergenceError(st.step, "non-finite gradient norm");
  stats.lr = st.optimizer.current_lr();
  st.optimizer.step(st.params);
  if (!st.params.all_finite()) throw DivergenceError(st.step, "non-finite parameters after update");
  ++st.step;
  return stats;
}

/// Runs steps [st.step, cfg.steps). Step k draws all of its randomness from
/// Prng(seed).split(k), so a resumed run continues the same sequence.
inline LossCurve train(TrainState& st, const UNetConfig& ucfg, const TrainConfig& cfg, const BatchSource& source,
                       const diffusion::NoiseSchedule& sched, std::uint64_t seed,
                       const std::function<void(const TrainState&, const StepStats&)>& on_step = {}) {
  cfg.validate();
  ucfg.validate();
  LossCurve curve;
  const Prng root(seed, 0x7472616eULL);
  double ema = 0.0;
  bool first = true;
  while (st.step < cfg.steps) {
    Prng prng = root.split(static_cast<std::uint64_t>(st.step));
    Prng data_prng = prng.split(0);
    Prng noise_prng = prng.split(1);
    const std::vector<TrainPair> batch = source(st.step, cfg.batch_size, data_prng);
    const StepStats stats = train_step(st, ucfg, cfg, batch, sched, noise_prng);
    curve.raw.push_back(stats.loss);
    ema = first ? stats.loss : cfg.loss_ema * ema + (1.0 - cfg.loss_ema) * stats.loss;
    first = false;
    curve.smoothed.push_back(ema);
    if (on_step) on_step(st, stats);
  }
  return curve;
}

/// Means of consecutive non-overlapping windows (a trailing partial window is
/// dropped).
inline std::vector<double> window_means(const std::vector<double>& xs, std::size_t window) {
  if (window == 0) throw InvalidArgument("window must be positive");
  std::vector<double> out;
  for (std::size_t i = 0; i + window <= xs.size(); i += window) {
    double s = 0.0;
    for (std::size_t k = i; k < i + window; ++k) s += xs[k];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

}  // namespace blindsr::denoiser
