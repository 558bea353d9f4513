#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/parallel.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/core/tensor_file.hpp"
#include "blindsr/data/corpus.hpp"
#include "blindsr/degrade/pipeline.hpp"
#include "blindsr/denoiser/train.hpp"

namespace blindsr::data {

struct PairOptions {
  bool use_degradations = true;
  degrade::DegradeConfig degrade;
};

struct TrainingSample {
  denoiser::TrainPair pair;
  std::optional<degrade::DegradationTrace> trace;
  int crop_y = 0;
  int crop_x = 0;
};

/// Random hr_crop^2 crop -> LR at 1/4 size (degradation pipeline, or plain
/// bicubic when degradations are off) -> bicubic back to hr_crop^2 -> both the
/// HR crop and the upsampled LR are centre-cropped to model_crop^2.
inline TrainingSample make_training_pair(const ImageTensor& hr_image, Prng& prng, const ScaleProfile& profile,
                                         const PairOptions& opts = {},
                                         const degrade::DegradationTrace* forced_trace = nullptr) {
  profile.validate();
  const int hc = profile.hr_crop;
  if (hr_image.height() < hc || hr_image.width() < hc) {
    throw InvalidArgument("make_training_pair: image " + std::to_string(hr_image.height()) + "x" +
                          std::to_string(hr_image.width()) + " smaller than hr_crop " + std::to_string(hc));
  }
  TrainingSample s;
  s.crop_y = static_cast<int>(prng.uniform_int(0, hr_image.height() - hc));
  s.crop_x = static_cast<int>(prng.uniform_int(0, hr_image.width() - hc));
  const ImageTensor crop = hr_image.crop(s.crop_y, s.crop_x, hc, hc);
  ImageTensor lr;
  if (forced_trace) {
    lr = degrade::apply_trace(crop, *forced_trace, opts.degrade.jpeg);
    s.trace = *forced_trace;
  } else if (opts.use_degradations) {
    degrade::DegradeResult r = degrade::degrade(crop, prng, opts.degrade);
    lr = std::move(r.lr);
    s.trace = std::move(r.trace);
  } else {
    lr = degrade::bicubic_downsample(crop, ScaleProfile::kMagnification);
  }
  const ImageTensor up = degrade::bicubic_upsample(lr, ScaleProfile::kMagnification);
  s.pair.x = crop.center_crop(profile.model_crop, profile.model_crop);
  s.pair.c = up.center_crop(profile.model_crop, profile.model_crop);
  return s;
}

/// Fixed pool of training pairs: pair i uses image i mod N and Prng
/// split i, so the pool is identical regardless of thread count.
inline std::vector<denoiser::TrainPair> make_training_pool(const std::vector<ImageTensor>& images, std::size_t count,
                                                           const Prng& prng, const ScaleProfile& profile,
                                                           const PairOptions& opts = {}) {
  if (images.empty()) throw EmptyCorpusError("no training images");
  std::vector<denoiser::TrainPair> pool(count);
  parallel_for(count, [&](std::size_t i) {
    Prng p = prng.split(i);
    pool[i] = make_training_pair(images[i % images.size()], p, profile, opts).pair;
  });
  return pool;
}

struct EvalPair {
  ImageTensor lr;
  ImageTensor hr;
  std::string source_id;
  int crop_x = 0;
  int crop_y = 0;
  std::optional<degrade::DegradationTrace> trace;
};

/// Aligned evaluation crops: `n_crops_per_image` per manifest entry, HR crops
/// of model_crop^2 and LR crops of a quarter of that. Paired corpora crop the
/// LR image at the corresponding coordinates; HR-only corpora synthesise the
/// LR through the degradation pipeline (or bicubic when disabled) with a
/// recorded trace. Pair k draws from prng.split(k).
inline std::vector<EvalPair> build_eval_set(const DatasetManifest& manifest, const Prng& prng, int n_crops_per_image,
                                            const PairOptions& opts = {}) {
  if (manifest.entries.empty()) throw EmptyCorpusError("eval manifest has no entries");
  if (n_crops_per_image <= 0) throw InvalidArgument("n_crops_per_image must be positive");
  const ScaleProfile& p = manifest.profile;
  p.validate();
  const int hs = p.eval_hr();
  const int m = ScaleProfile::kMagnification;
  const std::size_t n_img = manifest.entries.size();
  std::vector<ImageTensor> hr_imgs(n_img), lr_imgs(n_img);
  parallel_for(n_img, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    hr_imgs[i] = read_image(std::filesystem::path(manifest.root) / e.path);
    if (manifest.paired) lr_imgs[i] = read_image(std::filesystem::path(manifest.root) / *e.lr_path);
  });

  const std::size_t total = n_img * static_cast<std::size_t>(n_crops_per_image);
  std::vector<EvalPair> out(total);
  parallel_for(total, [&](std::size_t k) {
    const std::size_t i = k / static_cast<std::size_t>(n_crops_per_image);
    const ImageTensor& img = hr_imgs[i];
    Prng pp = prng.split(k);
    EvalPair ep;
    ep.source_id = manifest.entries[i].path;
    // Origins on the LR grid so paired crops align exactly.
    ep.crop_y = m * static_cast<int>(pp.uniform_int(0, (img.height() - hs) / m));
    ep.crop_x = m * static_cast<int>(pp.uniform_int(0, (img.width() - hs) / m));
    ep.hr = img.crop(ep.crop_y, ep.crop_x, hs, hs);
    if (manifest.paired) {
      ep.lr = lr_imgs[i].crop(ep.crop_y / m, ep.crop_x / m, hs / m, hs / m);
    } else if (opts.use_degradations) {
      degrade::DegradeResult r = degrade::degrade(ep.hr, pp, opts.degrade);
      ep.lr = std::move(r.lr);
      ep.trace = std::move(r.trace);
    } else {
      ep.lr = degrade::bicubic_downsample(ep.hr, m);
    }
    out[k] = std::move(ep);
  });
  return out;
}

/// Bicubic x4 upsampling of each pair's LR, the conditioning the model sees.
inline std::vector<ImageTensor> upsampled_conditioning(const std::vector<EvalPair>& pairs) {
  std::vector<ImageTensor> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    out[i] = degrade::bicubic_upsample(pairs[i].lr, ScaleProfile::kMagnification);
  });
  return out;
}

inline std::vector<ImageTensor> hr_images(const std::vector<EvalPair>& pairs) {
  std::vector<ImageTensor> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.hr);
  return out;
}

/// Eval-set directory: pair_NNNNN_lr.bst / pair_NNNNN_hr.bst plus index.json.
inline void save_eval_set(const std::filesystem::path& dir, const std::vector<EvalPair>& pairs,
                          const nlohmann::json& extra = nlohmann::json::object()) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  index["format"] = "blindsr-eval-set";
  index["version"] = 1;
  index["meta"] = extra;
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "pair_%05zu", i);
    const std::string lr = std::string(stem) + "_lr.bst", hr = std::string(stem) + "_hr.bst";
    write_tensor(dir / lr, pairs[i].lr, "eval_lr");
    write_tensor(dir / hr, pairs[i].hr, "eval_hr");
    nlohmann::json e = {{"lr", lr},
                        {"hr", hr},
                        {"source_id", pairs[i].source_id},
                        {"crop_origin", {{"x", pairs[i].crop_x}, {"y", pairs[i].crop_y}}}};
    e["trace"] = pairs[i].trace ? nlohmann::json(*pairs[i].trace) : nlohmann::json(nullptr);
    list.push_back(std::move(e));
  }
  index["pairs"] = std::move(list);
  blindsr::detail::write_file_bytes(dir / "index.json", index.dump(2) + "\n");
}

inline std::vector<EvalPair> load_eval_set(const std::filesystem::path& dir) {
  const std::filesystem::path idx = dir / "index.json";
  if (!std::filesystem::exists(idx)) throw InvalidArgument("no eval set at " + dir.string() + " (missing index.json)");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(blindsr::detail::read_file_bytes(idx));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::malformed_header, std::string("eval index: ") + e.what());
  }
  std::vector<EvalPair> out;
  for (const auto& e : index.at("pairs")) {
    EvalPair p;
    p.lr = read_tensor(dir / e.at("lr").get<std::string>());
    p.hr = read_tensor(dir / e.at("hr").get<std::string>());
    p.source_id = e.at("source_id").get<std::string>();
    p.crop_x = e.at("crop_origin").at("x").get<int>();
    p.crop_y = e.at("crop_origin").at("y").get<int>();
    if (!e.at("trace").is_null()) p.trace = e.at("trace").get<degrade::DegradationTrace>();
    out.push_back(std::move(p));
  }
  if (out.empty()) throw EmptyCorpusError("eval set at " + dir.string() + " is empty");
  return out;
}

}  // namespace blindsr::data
