#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/hash.hpp"
#include "blindsr/core/tensor_file.hpp"
#include "blindsr/data/corpus.hpp"
#include "blindsr/data/pairs.hpp"
#include "blindsr/degrade/pipeline.hpp"
#include "blindsr/denoiser/train.hpp"
#include "blindsr/denoiser/unet.hpp"
#include "blindsr/diffusion/sampler.hpp"
#include "blindsr/diffusion/schedule.hpp"
#include "blindsr/metrics/features.hpp"

namespace blindsr::cli {

inline constexpr int kSchemaVersion = 1;

/// Everything that determines a run. The two toggles select the ablation arm:
/// both on is the full method, both off is a plain conditional diffusion model
/// trained on bicubic downsampling.
struct RunConfig {
  std::uint64_t seed = 0;
  data::ScaleProfile profile = data::profile_by_name("desk");
  diffusion::NoiseSchedule schedule;
  diffusion::DiffusionStepPlan sampler;
  bool clip_prediction = true;
  diffusion::NcaConfig nca;
  denoiser::UNetConfig unet;
  denoiser::TrainConfig train;
  bool use_degradations = true;
  bool use_nca = true;
  metrics::FeatureExtractor features;
  int train_pool_size = 4096;
  int eval_batch = 64;

  void validate() const {
    profile.validate();
    schedule.validate();
    nca.validate();
    unet.validate();
    effective_train().validate();
    unet.check_input(profile.model_crop, profile.model_crop);
    if (train_pool_size <= 0 || eval_batch <= 0) throw InvalidArgument("train_pool_size and eval_batch must be positive");
  }

  /// Training settings with the NCA fields taken from the run-level toggles.
  denoiser::TrainConfig effective_train() const {
    denoiser::TrainConfig t = train;
    t.tau_max = nca.tau_max;
    t.use_nca = use_nca;
    return t;
  }

  data::PairOptions pair_options() const {
    data::PairOptions p;
    p.use_degradations = use_degradations;
    return p;
  }

  diffusion::SamplerOptions sampler_options() const {
    diffusion::SamplerOptions o;
    o.clip_prediction = clip_prediction;
    return o;
  }

  /// t_eval applied at test time; arms trained without NCA see clean
  /// conditioning, so they are evaluated at 0.
  double default_t_eval() const { return use_nca ? nca.t_eval : 0.0; }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  nlohmann::json train = c.train;
  train.erase("tau_max");
  train.erase("use_nca");
  j = {{"schema_version", kSchemaVersion},
       {"seed", c.seed},
       {"profile", c.profile},
       {"schedule", c.schedule},
       {"sampler", {{"steps", c.sampler.num_steps}, {"clip_prediction", c.clip_prediction}}},
       {"nca", c.nca},
       {"unet", c.unet},
       {"train", train},
       {"toggles", {{"use_degradations", c.use_degradations}, {"use_nca", c.use_nca}}},
       {"features", c.features},
       {"data", {{"train_pool_size", c.train_pool_size}, {"eval_batch", c.eval_batch}}}};
}

/// Missing keys keep their defaults, so a config file only needs the fields
/// it changes.
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  const int version = j.value("schema_version", kSchemaVersion);
  if (version != kSchemaVersion) {
    throw InvalidArgument("unsupported config schema_version " + std::to_string(version) + " (expected " +
                          std::to_string(kSchemaVersion) + ")");
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("profile")) {
    const auto& p = j.at("profile");
    c.profile = p.is_string() ? data::profile_by_name(p.get<std::string>()) : p.get<data::ScaleProfile>();
  }
  if (j.contains("schedule")) c.schedule = j.at("schedule").get<diffusion::NoiseSchedule>();
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    c.sampler = s.get<diffusion::DiffusionStepPlan>();
    c.clip_prediction = s.value("clip_prediction", c.clip_prediction);
  }
  if (j.contains("nca")) {
    nlohmann::json merged = c.nca;
    merged.update(j.at("nca"));
    c.nca = merged.get<diffusion::NcaConfig>();
  }
  if (j.contains("unet")) {
    nlohmann::json merged = c.unet;
    merged.update(j.at("unet"));
    c.unet = merged.get<denoiser::UNetConfig>();
  }
  if (j.contains("train")) {
    nlohmann::json merged = c.train;
    merged.update(j.at("train"));
    merged["tau_max"] = c.nca.tau_max;
    c.train = merged.get<denoiser::TrainConfig>();
  }
  if (j.contains("toggles")) {
    c.use_degradations = j.at("toggles").value("use_degradations", c.use_degradations);
    c.use_nca = j.at("toggles").value("use_nca", c.use_nca);
  }
  if (j.contains("features")) {
    nlohmann::json merged = c.features;
    merged.update(j.at("features"));
    c.features = merged.get<metrics::FeatureExtractor>();
  }
  if (j.contains("data")) {
    c.train_pool_size = j.at("data").value("train_pool_size", c.train_pool_size);
    c.eval_batch = j.at("data").value("eval_batch", c.eval_batch);
  }
}

inline nlohmann::json to_json_value(const RunConfig& c) {
  nlohmann::json j = c;
  return j;
}

/// sha256 of the canonical (compact, key-sorted) JSON form.
inline std::string config_hash(const RunConfig& c) { return sha256_hex(to_json_value(c).dump()); }

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(blindsr::detail::read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  try {
    c = j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  return c;
}

inline void write_run_config(const std::filesystem::path& path, const RunConfig& c) {
  nlohmann::json j = c;
  j["config_hash"] = config_hash(c);
  blindsr::detail::write_file_bytes(path, j.dump(2) + "\n");
}

/// Named ablation arms and their toggles.
struct AblationArm {
  const char* name;
  bool use_degradations;
  bool use_nca;
};

inline constexpr AblationArm kAblationArms[4] = {
    {"full", true, true},
    {"no-nca", true, false},
    {"no-degrade", false, true},
    {"plain", false, false},
};

inline RunConfig with_arm(RunConfig c, const AblationArm& arm) {
  c.use_degradations = arm.use_degradations;
  c.use_nca = arm.use_nca;
  return c;
}

}  // namespace blindsr::cli
