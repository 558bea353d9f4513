#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/parallel.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/diffusion/process.hpp"
#include "blindsr/diffusion/sampler.hpp"
#include "blindsr/diffusion/schedule.hpp"
#include "blindsr/metrics/features.hpp"
#include "blindsr/metrics/frechet.hpp"
#include "blindsr/metrics/quality.hpp"

namespace blindsr::metrics {

/// A batch of super-resolution requests: augmented conditioning images, their
/// noise level, and one Prng per output.
struct SampleRequest {
  std::span<const ImageTensor> cond;
  double tau;
  std::span<Prng> prngs;
  std::span<const std::size_t> ids;
};

/// Anything that maps conditioning to high-resolution outputs: a diffusion
/// sampler, or a fixed oracle in tests.
using SuperResolver = std::function<std::vector<ImageTensor>(const SampleRequest&)>;

inline SuperResolver diffusion_resolver(diffusion::Denoiser denoiser, diffusion::DiffusionStepPlan plan,
                                        diffusion::NoiseSchedule sched, diffusion::SamplerOptions opts = {}) {
  return [=](const SampleRequest& req) {
    return diffusion::ancestral_sample_batch(denoiser, req.cond, req.tau, plan, req.prngs, sched, req.ids, opts);
  };
}

struct EvalOptions {
  double t_eval = 0.1;
  diffusion::NoiseSchedule sched;
  FeatureExtractor features;
  std::uint64_t seed = 0;
  std::size_t chunk = 64;
};

struct MetricsReport {
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  double frechet = 0.0;
  std::size_t n_pairs = 0;
  double t_eval = 0.0;
  std::vector<double> psnr;
  std::vector<double> ssim;
};

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = {{"psnr_mean", r.psnr_mean}, {"ssim_mean", r.ssim_mean}, {"frechet", r.frechet},
       {"n_pairs", r.n_pairs},     {"t_eval", r.t_eval},       {"psnr", r.psnr},
       {"ssim", r.ssim}};
}

inline void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.psnr_mean = j.at("psnr_mean").get<double>();
  r.ssim_mean = j.at("ssim_mean").get<double>();
  r.frechet = j.at("frechet").get<double>();
  r.n_pairs = j.at("n_pairs").get<std::size_t>();
  r.t_eval = j.at("t_eval").get<double>();
  r.psnr = j.value("psnr", std::vector<double>{});
  r.ssim = j.value("ssim", std::vector<double>{});
}

inline std::string csv_header() { return "t_eval,n_pairs,psnr_mean,ssim_mean,frechet"; }

inline std::string csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.t_eval << ',' << r.n_pairs << ',' << r.psnr_mean << ',' << r.ssim_mean << ',' << r.frechet;
  return os.str();
}

/// Frechet distance between the feature distributions of two image sets.
inline double frechet_score(std::span<const ImageTensor> outputs, std::span<const ImageTensor> references,
                            const FeatureExtractor& ex) {
  return frechet_distance(gaussian_stats(extract_features(outputs, ex)), gaussian_stats(extract_features(references, ex)));
}

/// For every pair i: c_aug = noise_augment(cond[i], t_eval) and an output is
/// drawn from the resolver; PSNR/SSIM are taken against hr[i], the Frechet
/// score over all outputs against all references. Pair i draws randomness
/// only from Prng(seed).split(i), so results do not depend on chunking.
inline MetricsReport evaluate(const SuperResolver& model, std::span<const ImageTensor> cond,
                              std::span<const ImageTensor> hr, const EvalOptions& opts,
                              std::vector<ImageTensor>* outputs_out = nullptr) {
  if (cond.size() != hr.size()) throw InvalidArgument("evaluate: cond/hr count mismatch");
  if (cond.size() < 2) throw InvalidArgument("evaluate: need at least two pairs");
  if (!(opts.t_eval >= 0.0 && opts.t_eval <= 1.0)) throw InvalidArgument("t_eval must be in [0, 1]");
  const std::size_t n = cond.size();
  const Prng root(opts.seed, 0x6576616cULL);
  std::vector<ImageTensor> outputs(n);
  for (std::size_t start = 0; start < n; start += opts.chunk) {
    const std::size_t m = std::min(opts.chunk, n - start);
    std::vector<ImageTensor> aug(m);
    std::vector<Prng> chains;
    std::vector<std::size_t> ids(m);
    chains.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = start + k;
      if (!cond[i].same_shape(hr[i])) throw InvalidArgument("evaluate: pair " + std::to_string(i) + " dims differ");
      const Prng pair = root.split(i);
      Prng aug_prng = pair.split(0);
      aug[k] = diffusion::noise_augment(cond[i], opts.t_eval, aug_prng, opts.sched);
      chains.push_back(pair.split(1));
      ids[k] = i;
    }
    std::vector<ImageTensor> res;
    try {
      res = model(SampleRequest{aug, opts.t_eval, chains, ids});
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.step(), "pairs " + std::to_string(start) + ".." + std::to_string(start + m - 1) +
                                          ": " + e.what());
    }
    if (res.size() != m) throw InvalidArgument("evaluate: model returned wrong batch size");
    for (std::size_t k = 0; k < m; ++k) outputs[start + k] = res[k].clamped();
  }

  MetricsReport r;
  r.n_pairs = n;
  r.t_eval = opts.t_eval;
  r.psnr.resize(n);
  r.ssim.resize(n);
  parallel_for(n, [&](std::size_t i) {
    r.psnr[i] = psnr(outputs[i], hr[i]);
    r.ssim[i] = ssim(outputs[i], hr[i]);
  });
  r.psnr_mean = std::accumulate(r.psnr.begin(), r.psnr.end(), 0.0) / static_cast<double>(n);
  r.ssim_mean = std::accumulate(r.ssim.begin(), r.ssim.end(), 0.0) / static_cast<double>(n);
  r.frechet = frechet_score(outputs, hr, opts.features);
  if (outputs_out) *outputs_out = std::move(outputs);
  return r;
}

}  // namespace blindsr::metrics
