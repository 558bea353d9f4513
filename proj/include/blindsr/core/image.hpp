#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blindsr/core/error.hpp"

namespace blindsr {

/// Value domain of an image. Unit images hold displayable values in [0, 1];
/// latents (noisy diffusion states, augmented conditioning) are unbounded.
enum class Domain { unit, latent };

inline const char* to_string(Domain d) { return d == Domain::unit ? "unit" : "latent"; }

/// H x W x C float image, row-major with interleaved channels.
///
/// Constructing a unit-domain tensor clamps the data into [0, 1]; latents are
/// stored as given. Element access is mutable so builders can fill a tensor in
/// place, but once handed to another module a tensor is treated as a value.
class ImageTensor {
 public:
  ImageTensor() = default;

  ImageTensor(int height, int width, int channels, Domain domain = Domain::unit)
      : height_(height), width_(width), channels_(channels), domain_(domain) {
    check_dims(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0f);
  }

  ImageTensor(int height, int width, int channels, std::vector<float> data, Domain domain)
      : height_(height), width_(width), channels_(channels), domain_(domain), data_(std::move(data)) {
    check_dims(height, width, channels);
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
      throw InvalidArgument("image data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(height) + "x" + std::to_string(width) +
                            "x" + std::to_string(channels));
    }
    if (domain_ == Domain::unit) clamp_in_place();
  }

  static ImageTensor filled(int height, int width, int channels, float value,
                            Domain domain = Domain::unit) {
    ImageTensor t(height, width, channels, domain);
    std::fill(t.data_.begin(), t.data_.end(), value);
    if (domain == Domain::unit) t.clamp_in_place();
    return t;
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  Domain domain() const noexcept { return domain_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> values() noexcept { return data_; }
  const std::vector<float>& vector() const noexcept { return data_; }

  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }
  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  bool same_shape(const ImageTensor& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  /// Copy with values clamped to [0, 1] and the domain set to unit.
  ImageTensor clamped() const {
    ImageTensor out = *this;
    out.domain_ = Domain::unit;
    out.clamp_in_place();
    return out;
  }

  /// Copy relabelled as a latent; values are untouched.
  ImageTensor as_latent() const {
    ImageTensor out = *this;
    out.domain_ = Domain::latent;
    return out;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  /// Crop of size (h, w) with top-left corner at (y0, x0).
  ImageTensor crop(int y0, int x0, int h, int w) const {
    if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > height_ || x0 + w > width_) {
      throw InvalidArgument("crop window out of bounds");
    }
    ImageTensor out(h, w, channels_, domain_);
    for (int y = 0; y < h; ++y) {
      const float* src = &data_[index(y0 + y, x0, 0)];
      std::copy(src, src + static_cast<std::size_t>(w) * channels_, &out.data_[out.index(y, 0, 0)]);
    }
    return out;
  }

  ImageTensor center_crop(int h, int w) const {
    return crop((height_ - h) / 2, (width_ - w) / 2, h, w);
  }

  friend bool operator==(const ImageTensor& a, const ImageTensor& b) {
    return a.same_shape(b) && a.domain_ == b.domain_ && a.data_ == b.data_;
  }

 private:
  static void check_dims(int h, int w, int c) {
    if (h <= 0 || w <= 0) throw InvalidArgument("image dims must be positive");
    if (c <= 0) throw InvalidArgument("image channel count must be positive");
  }

  void clamp_in_place() {
    for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  Domain domain_ = Domain::unit;
  std::vector<float> data_;
};

/// Largest absolute elementwise difference; shapes must match.
inline double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw InvalidArgument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.values()[i]) - b.values()[i]));
  }
  return m;
}

}  // namespace blindsr
