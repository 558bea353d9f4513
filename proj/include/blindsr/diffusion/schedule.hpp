#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindsr/core/error.hpp"

namespace blindsr::diffusion {

struct ScheduleCoeffs {
  double logsnr;
  double alpha;                 // signal variance alpha_t
  double one_minus_alpha;       // noise variance 1 - alpha_t
  double sqrt_alpha;
  double sqrt_one_minus_alpha;
  double log_alpha;             // log(alpha_t), kept for cancellation-free ratios
};

/// Cosine log-SNR schedule: lambda(t) = -2 log tan(pi t / 2), clamped to
/// [logsnr_min, logsnr_max]; alpha_t = sigmoid(lambda(t)).
///
/// The unclamped form gives sqrt(alpha) = cos(pi t / 2) exactly. The clamp
/// keeps alpha_1 > 0 so the clean image stays recoverable from z_1.
struct NoiseSchedule {
  double logsnr_min = -20.0;
  double logsnr_max = 20.0;

  double logsnr(double t) const {
    check_t(t);
    double lambda;
    if (t <= 0.0) {
      lambda = logsnr_max;
    } else {
      lambda = -2.0 * std::log(std::tan(0.5 * std::numbers::pi * t));
    }
    return std::clamp(lambda, logsnr_min, logsnr_max);
  }

  ScheduleCoeffs coeffs(double t) const {
    const double lambda = logsnr(t);
    ScheduleCoeffs c{};
    c.logsnr = lambda;
    c.alpha = sigmoid(lambda);
    c.one_minus_alpha = sigmoid(-lambda);
    c.sqrt_alpha = std::sqrt(c.alpha);
    c.sqrt_one_minus_alpha = std::sqrt(c.one_minus_alpha);
    c.log_alpha = -softplus(-lambda);
    return c;
  }

  static double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }

  static double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

  static void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("diffusion time must lie in [0, 1]");
  }

  void validate() const {
    if (!(logsnr_min < logsnr_max)) throw InvalidArgument("schedule clamp must satisfy min < max");
  }
};

/// (sqrt(alpha_t), sqrt(1 - alpha_t)).
inline std::pair<double, double> schedule_coeffs(const NoiseSchedule& sched, double t) {
  const ScheduleCoeffs c = sched.coeffs(t);
  return {c.sqrt_alpha, c.sqrt_one_minus_alpha};
}

/// Noise-conditioning augmentation levels: tau ~ U(0, tau_max) in training,
/// a fixed t_eval at test time.
struct NcaConfig {
  double tau_max = 0.5;
  double t_eval = 0.1;

  void validate() const {
    if (!(0.0 <= t_eval && t_eval <= tau_max && tau_max <= 1.0)) {
      throw InvalidArgument("NCA config needs 0 <= t_eval <= tau_max <= 1");
    }
  }
};

/// Uniform sampling grid t_k = k / T for k = T .. 0.
struct DiffusionStepPlan {
  int num_steps = 256;

  std::vector<double> timesteps() const {
    if (num_steps < 1) throw InvalidArgument("sampler needs at least one step");
    std::vector<double> ts(static_cast<std::size_t>(num_steps) + 1);
    for (int k = num_steps; k >= 0; --k) {
      ts[static_cast<std::size_t>(num_steps - k)] = static_cast<double>(k) / num_steps;
    }
    return ts;
  }
};

inline void to_json(nlohmann::json& j, const NoiseSchedule& s) {
  j = {{"kind", "cosine_logsnr"}, {"clamp", {s.logsnr_min, s.logsnr_max}}};
}

inline void from_json(const nlohmann::json& j, NoiseSchedule& s) {
  if (j.value("kind", "cosine_logsnr") != "cosine_logsnr") {
    throw InvalidArgument("unsupported schedule kind " + j["kind"].dump());
  }
  if (j.contains("clamp")) {
    const auto c = j.at("clamp").get<std::vector<double>>();
    if (c.size() != 2) throw InvalidArgument("schedule clamp must be [min, max]");
    s.logsnr_min = c[0];
    s.logsnr_max = c[1];
  }
  s.validate();
}

inline void to_json(nlohmann::json& j, const DiffusionStepPlan& p) { j = {{"steps", p.num_steps}}; }

inline void from_json(const nlohmann::json& j, DiffusionStepPlan& p) {
  p.num_steps = j.value("steps", p.num_steps);
  if (p.num_steps < 1) throw InvalidArgument("sampler.steps must be >= 1");
}

inline void to_json(nlohmann::json& j, const NcaConfig& n) { j = {{"tau_max", n.tau_max}, {"t_eval", n.t_eval}}; }

inline void from_json(const nlohmann::json& j, NcaConfig& n) {
  n.tau_max = j.value("tau_max", n.tau_max);
  n.t_eval = j.value("t_eval", n.t_eval);
  n.validate();
}

}  // namespace blindsr::diffusion
