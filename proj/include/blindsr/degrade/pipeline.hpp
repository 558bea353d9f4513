#pragma once

// Second-order degradation pipeline:
//
//   stage 1: blur -> resize -> JPEG
//   stage 2: [blur, p = 0.8] -> resize -> {sinc, JPEG} in sampled order
//   final:   bicubic resize to (H / m, W / m)
//
// No additive noise anywhere. Every random choice is drawn up front into a
// DegradationTrace; apply_trace() is a pure function of (image, trace), so a
// stored trace replays a degradation bit-exactly.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/prng.hpp"
#include "blindsr/degrade/filter.hpp"
#include "blindsr/degrade/jpeg.hpp"
#include "blindsr/degrade/kernels.hpp"
#include "blindsr/degrade/resize.hpp"

namespace blindsr::degrade {

struct ResizeStep {
  ResizeMode mode = ResizeMode::bicubic;
  double scale = 1.0;
};

enum class SincPosition { before_jpeg, after_jpeg };

struct StageOneTrace {
  BlurKernelSpec blur;
  ResizeStep resize;
  int jpeg_quality = 95;
};

struct StageTwoTrace {
  std::optional<BlurKernelSpec> blur;
  ResizeStep resize;
  BlurKernelSpec sinc = BlurKernelSpec::sinc_kernel(std::numbers::pi, 3);
  SincPosition sinc_position = SincPosition::after_jpeg;
  int jpeg_quality = 95;
};

struct FinalResize {
  ResizeMode mode = ResizeMode::bicubic;
  int height = 0;
  int width = 0;
};

struct DegradationTrace {
  StageOneTrace stage1;
  StageTwoTrace stage2;
  FinalResize final_resize;
};

struct DegradeConfig {
  int magnification = 4;
  double stage1_scale_min = 0.15, stage1_scale_max = 1.5;
  double stage2_scale_min = 0.3, stage2_scale_max = 1.2;
  int jpeg_quality_min = 30, jpeg_quality_max = 95;
  double second_blur_prob = 0.8;
  BlurSampling stage1_blur = BlurSampling::stage(1);
  BlurSampling stage2_blur = BlurSampling::stage(2);
  JpegOptions jpeg;
};

inline void check_hr_dims(int h, int w, int magnification) {
  if (magnification < 1) throw InvalidArgument("magnification must be >= 1");
  if (h % magnification != 0 || w % magnification != 0) {
    throw InvalidArgument("HR dims must be divisible by the magnification factor");
  }
  if (h < 8 * magnification || w < 8 * magnification) {
    throw InvalidArgument("HR image must be at least 8x the magnification in each dimension");
  }
}

inline ResizeMode sample_resize_mode(Prng& prng) {
  return static_cast<ResizeMode>(prng.uniform_int(0, 2));
}

inline BlurKernelSpec sample_sinc_spec(Prng& prng, const BlurSampling& cfg) {
  const int radius = cfg.radii[static_cast<std::size_t>(prng.uniform_int(0, cfg.radii.size() - 1))];
  return BlurKernelSpec::sinc_kernel(prng.uniform(sinc_cutoff_min(radius), std::numbers::pi), radius);
}

/// Draws every random parameter of one pipeline pass for an HR image of (h, w).
inline DegradationTrace sample_trace(Prng& prng, int h, int w, const DegradeConfig& cfg = {}) {
  check_hr_dims(h, w, cfg.magnification);
  DegradationTrace tr;
  tr.stage1.blur = sample_blur_spec(prng, cfg.stage1_blur);
  tr.stage1.resize.mode = sample_resize_mode(prng);
  tr.stage1.resize.scale = prng.uniform(cfg.stage1_scale_min, cfg.stage1_scale_max);
  tr.stage1.jpeg_quality = static_cast<int>(prng.uniform_int(cfg.jpeg_quality_min, cfg.jpeg_quality_max));

  if (prng.bernoulli(cfg.second_blur_prob)) tr.stage2.blur = sample_blur_spec(prng, cfg.stage2_blur);
  tr.stage2.resize.mode = sample_resize_mode(prng);
  tr.stage2.resize.scale = prng.uniform(cfg.stage2_scale_min, cfg.stage2_scale_max);
  tr.stage2.sinc = sample_sinc_spec(prng, cfg.stage2_blur);
  tr.stage2.sinc_position = prng.bernoulli(0.5) ? SincPosition::before_jpeg : SincPosition::after_jpeg;
  tr.stage2.jpeg_quality = static_cast<int>(prng.uniform_int(cfg.jpeg_quality_min, cfg.jpeg_quality_max));

  tr.final_resize = {ResizeMode::bicubic, h / cfg.magnification, w / cfg.magnification};
  return tr;
}

/// Replays a trace. Intermediate images are kept unclamped through blur and
/// resize; each JPEG step clamps (its codec needs bounded input) and the
/// final bicubic resize clamps to the unit domain.
inline ImageTensor apply_trace(const ImageTensor& hr, const DegradationTrace& tr, const JpegOptions& jpeg = {}) {
  ImageTensor img = detail::convolve_reflect(hr, render_kernel(tr.stage1.blur), Clamp::no);
  img = resize(img, tr.stage1.resize.scale, tr.stage1.resize.mode, Clamp::no);
  img = jpeg_artifacts(img, tr.stage1.jpeg_quality, jpeg);

  if (tr.stage2.blur) img = detail::convolve_reflect(img, render_kernel(*tr.stage2.blur), Clamp::no);
  img = resize(img, tr.stage2.resize.scale, tr.stage2.resize.mode, Clamp::no);
  const Kernel2D sinc = render_kernel(tr.stage2.sinc);
  if (tr.stage2.sinc_position == SincPosition::before_jpeg) {
    img = detail::convolve_reflect(img, sinc, Clamp::no);
    img = jpeg_artifacts(img, tr.stage2.jpeg_quality, jpeg);
  } else {
    img = jpeg_artifacts(img, tr.stage2.jpeg_quality, jpeg);
    img = detail::convolve_reflect(img, sinc, Clamp::no);
  }
  return resize_to(img, tr.final_resize.height, tr.final_resize.width, tr.final_resize.mode, Clamp::yes);
}

struct DegradeResult {
  ImageTensor lr;
  DegradationTrace trace;
};

inline DegradeResult degrade(const ImageTensor& hr, Prng& prng, const DegradeConfig& cfg = {}) {
  DegradationTrace tr = sample_trace(prng, hr.height(), hr.width(), cfg);
  ImageTensor lr = apply_trace(hr, tr, cfg.jpeg);
  return {std::move(lr), std::move(tr)};
}

/// Plain bicubic downsample by the magnification factor (no degradations).
inline ImageTensor bicubic_downsample(const ImageTensor& hr, int magnification) {
  if (hr.height() % magnification != 0 || hr.width() % magnification != 0) {
    throw InvalidArgument("HR dims must be divisible by the magnification factor");
  }
  return resize_to(hr, hr.height() / magnification, hr.width() / magnification, ResizeMode::bicubic);
}

inline ImageTensor bicubic_upsample(const ImageTensor& lr, int magnification) {
  return resize_to(lr, lr.height() * magnification, lr.width() * magnification, ResizeMode::bicubic);
}

/// Near-identity trace: sigma 0.2 gaussians, unit scales, quality 95, full-band sinc.
inline DegradationTrace benign_trace(int h, int w, int magnification = 4) {
  check_hr_dims(h, w, magnification);
  DegradationTrace tr;
  tr.stage1.blur = BlurKernelSpec::gaussian(0.2, 3);
  tr.stage1.resize = {ResizeMode::bicubic, 1.0};
  tr.stage1.jpeg_quality = 95;
  tr.stage2.blur.reset();
  tr.stage2.resize = {ResizeMode::bicubic, 1.0};
  tr.stage2.sinc = BlurKernelSpec::sinc_kernel(std::numbers::pi, 3);
  tr.stage2.sinc_position = SincPosition::after_jpeg;
  tr.stage2.jpeg_quality = 95;
  tr.final_resize = {ResizeMode::bicubic, h / magnification, w / magnification};
  return tr;
}

/// Harshest corner of the sampling ranges: max-sigma blurs, min scales,
/// quality 30, narrowest sinc.
inline DegradationTrace adversarial_trace(int h, int w, int magnification = 4) {
  check_hr_dims(h, w, magnification);
  DegradationTrace tr;
  tr.stage1.blur = BlurKernelSpec::gaussian(3.0, 11);
  tr.stage1.resize = {ResizeMode::bilinear, 0.15};
  tr.stage1.jpeg_quality = 30;
  tr.stage2.blur = BlurKernelSpec::gaussian(1.5, 11);
  tr.stage2.resize = {ResizeMode::bilinear, 0.3};
  tr.stage2.sinc = BlurKernelSpec::sinc_kernel(std::numbers::pi / 5.0, 11);
  tr.stage2.sinc_position = SincPosition::after_jpeg;
  tr.stage2.jpeg_quality = 30;
  tr.final_resize = {ResizeMode::bicubic, h / magnification, w / magnification};
  return tr;
}

inline void to_json(nlohmann::json& j, const ResizeStep& r) { j = {{"mode", to_string(r.mode)}, {"scale", r.scale}}; }

inline void from_json(const nlohmann::json& j, ResizeStep& r) {
  r.mode = resize_mode_from_string(j.at("mode").get<std::string>());
  r.scale = j.at("scale").get<double>();
}

inline void to_json(nlohmann::json& j, const DegradationTrace& t) {
  j["stage1"] = {{"blur", t.stage1.blur}, {"resize", t.stage1.resize}, {"jpeg_quality", t.stage1.jpeg_quality}};
  nlohmann::json s2;
  s2["blur"] = t.stage2.blur ? nlohmann::json(*t.stage2.blur) : nlohmann::json(nullptr);
  s2["resize"] = t.stage2.resize;
  s2["sinc"] = t.stage2.sinc;
  s2["sinc_position"] = t.stage2.sinc_position == SincPosition::before_jpeg ? "before_jpeg" : "after_jpeg";
  s2["jpeg_quality"] = t.stage2.jpeg_quality;
  j["stage2"] = s2;
  j["final_resize"] = {{"mode", to_string(t.final_resize.mode)},
                       {"height", t.final_resize.height},
                       {"width", t.final_resize.width}};
}

inline void from_json(const nlohmann::json& j, DegradationTrace& t) {
  const auto& s1 = j.at("stage1");
  t.stage1.blur = s1.at("blur").get<BlurKernelSpec>();
  t.stage1.resize = s1.at("resize").get<ResizeStep>();
  t.stage1.jpeg_quality = s1.at("jpeg_quality").get<int>();
  const auto& s2 = j.at("stage2");
  if (s2.at("blur").is_null()) {
    t.stage2.blur.reset();
  } else {
    t.stage2.blur = s2.at("blur").get<BlurKernelSpec>();
  }
  t.stage2.resize = s2.at("resize").get<ResizeStep>();
  t.stage2.sinc = s2.at("sinc").get<BlurKernelSpec>();
  const std::string pos = s2.at("sinc_position").get<std::string>();
  if (pos != "before_jpeg" && pos != "after_jpeg") throw InvalidArgument("bad sinc_position '" + pos + "'");
  t.stage2.sinc_position = pos == "before_jpeg" ? SincPosition::before_jpeg : SincPosition::after_jpeg;
  t.stage2.jpeg_quality = s2.at("jpeg_quality").get<int>();
  const auto& f = j.at("final_resize");
  t.final_resize.mode = resize_mode_from_string(f.at("mode").get<std::string>());
  t.final_resize.height = f.at("height").get<int>();
  t.final_resize.width = f.at("width").get<int>();
}

}  // namespace blindsr::degrade
