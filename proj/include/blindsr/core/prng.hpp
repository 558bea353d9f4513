#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "blindsr/core/error.hpp"
#include "blindsr/core/image.hpp"

namespace blindsr {

namespace detail {

// SplitMix64 finalizer; used only to decorrelate (seed, stream) pairs.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Reproducible, splittable random stream.
///
/// Engine: std::mt19937_64, seeded through std::seed_seq from the four 32-bit
/// halves of (seed, stream_id). Both the engine recurrence and the seed_seq
/// algorithm are fixed by the C++ standard, and every derived quantity
/// (uniform doubles, bounded integers, normals) is computed here rather than
/// through the implementation-defined std distributions, so a given
/// (seed, stream_id, call sequence) yields the same values on every platform.
///
/// Child streams are derived by hashing the parent identity with a child id;
/// a child never shares engine state with its parent.
class Prng {
 public:
  explicit Prng(std::uint64_t seed, std::uint64_t stream_id = 0) : seed_(seed), stream_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  /// Independent child stream. Same parent identity + child id -> same child,
  /// regardless of how many values the parent has produced.
  Prng split(std::uint64_t child_id) const {
    const std::uint64_t s = detail::mix64(stream_ ^ detail::mix64(child_id + 0x632be59bd9b4e019ULL));
    return Prng(seed_, s);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in the closed range [lo, hi] (unbiased, rejection sampled).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw InvalidArgument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via the Box-Muller transform; the second value of each
  /// pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Tensor of i.i.d. N(0, 1) draws, latent domain.
inline ImageTensor sample_standard_normal(Prng& prng, int height, int width, int channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw InvalidArgument("sample_standard_normal: dims must be positive");
  }
  ImageTensor out(height, width, channels, Domain::latent);
  for (float& v : out.values()) v = static_cast<float>(prng.normal());
  return out;
}

inline ImageTensor sample_standard_normal_like(Prng& prng, const ImageTensor& like) {
  return sample_standard_normal(prng, like.height(), like.width(), like.channels());
}

}  // namespace blindsr
