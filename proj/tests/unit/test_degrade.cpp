#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "blindsr/core/prng.hpp"
#include "blindsr/data/textures.hpp"
#include "blindsr/degrade/filter.hpp"
#include "blindsr/degrade/jpeg.hpp"
#include "blindsr/degrade/kernels.hpp"
#include "blindsr/degrade/pipeline.hpp"
#include "blindsr/degrade/resize.hpp"
#include "blindsr/metrics/quality.hpp"

using namespace blindsr;
using namespace blindsr::degrade;

namespace {

ImageTensor constant(int h, int w, int c, float v) {
  ImageTensor img(h, w, c, Domain::unit);
  for (float& x : img.values()) x = v;
  return img;
}

ImageTensor texture(std::uint64_t seed, int h, int w, int c = 3) {
  Prng p(seed);
  return data::synth_texture(p, h, w, c);
}

double kernel_sum(const Kernel2D& k) {
  double s = 0;
  for (double w : k.weights) s += w;
  return s;
}

// Brute-force reflect-101 correlation written directly from the definition.
ImageTensor brute_correlate(const ImageTensor& img, const Kernel2D& k) {
  auto refl = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  ImageTensor out(img.height(), img.width(), img.channels(), Domain::latent);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        double s = 0;
        for (int dy = -k.radius; dy <= k.radius; ++dy)
          for (int dx = -k.radius; dx <= k.radius; ++dx)
            s += k.at(dy, dx) * img.at(refl(y + dy, img.height()), refl(x + dx, img.width()), c);
        out.at(y, x, c) = static_cast<float>(s);
      }
  return out;
}

}  // namespace

TEST(Kernels, AllSampledKernelsSumToOne) {
  Prng p(1);
  for (int stage : {1, 2}) {
    for (int i = 0; i < 500; ++i) {
      const Kernel2D k = render_kernel(sample_blur_spec(p, stage));
      EXPECT_NEAR(kernel_sum(k), 1.0, 1e-9);
    }
  }
  for (int r : {3, 7, 11}) EXPECT_NEAR(kernel_sum(render_kernel(BlurKernelSpec::sinc_kernel(1.0, r))), 1.0, 1e-9);
}

TEST(Kernels, GaussianMatchesClosedForm) {
  const BlurKernelSpec spec = BlurKernelSpec::gaussian(1.3, 5);
  const Kernel2D k = render_kernel(spec);
  double z = 0;
  for (int y = -5; y <= 5; ++y)
    for (int x = -5; x <= 5; ++x) z += std::exp(-(x * x + y * y) / (2 * 1.3 * 1.3));
  for (int y = -5; y <= 5; ++y)
    for (int x = -5; x <= 5; ++x) EXPECT_NEAR(k.at(y, x), std::exp(-(x * x + y * y) / (2 * 1.3 * 1.3)) / z, 1e-12);
}

TEST(Kernels, AnisotropicGaussianMatchesCovarianceForm) {
  BlurKernelSpec spec;
  spec.isotropic = false;
  spec.sigma_x = 2.5;
  spec.sigma_y = 0.7;
  spec.rotation = 0.6;
  spec.radius = 7;
  const Kernel2D k = render_kernel(spec);
  const double c = std::cos(0.6), s = std::sin(0.6);
  // Sigma = R diag(sx^2, sy^2) R^T built explicitly, then inverted by the 2x2 formula.
  const double s00 = c * c * 6.25 + s * s * 0.49, s01 = c * s * (6.25 - 0.49), s11 = s * s * 6.25 + c * c * 0.49;
  const double det = s00 * s11 - s01 * s01;
  std::vector<double> ref;
  double z = 0;
  for (int y = -7; y <= 7; ++y)
    for (int x = -7; x <= 7; ++x) {
      const double q = (s11 * x * x - 2 * s01 * x * y + s00 * y * y) / det;
      ref.push_back(std::exp(-0.5 * q));
      z += ref.back();
    }
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(k.weights[i], ref[i] / z, 1e-12);
}

TEST(Kernels, GeneralizedBetaTwoIsGaussian) {
  Prng p(2);
  for (int i = 0; i < 20; ++i) {
    BlurKernelSpec g;
    g.isotropic = false;
    g.sigma_x = p.uniform(0.2, 3.0);
    g.sigma_y = p.uniform(0.2, 3.0);
    g.rotation = p.uniform(-3.0, 3.0);
    g.radius = 5;
    BlurKernelSpec gg = g;
    gg.family = BlurFamily::generalized_gaussian;
    gg.beta = 2.0;
    const Kernel2D a = render_kernel(g), b = render_kernel(gg);
    for (std::size_t j = 0; j < a.weights.size(); ++j) EXPECT_NEAR(a.weights[j], b.weights[j], 1e-12);
  }
}

TEST(Kernels, IsotropicKernelsAreSymmetric) {
  for (BlurFamily f : {BlurFamily::gaussian, BlurFamily::generalized_gaussian, BlurFamily::plateau}) {
    BlurKernelSpec s = BlurKernelSpec::gaussian(1.7, 6);
    s.family = f;
    s.beta = 1.3;
    const Kernel2D k = render_kernel(s);
    for (int y = -6; y <= 6; ++y)
      for (int x = -6; x <= 6; ++x) {
        EXPECT_NEAR(k.at(y, x), k.at(x, y), 1e-15);
        EXPECT_NEAR(k.at(y, x), k.at(-y, x), 1e-15);
        EXPECT_NEAR(k.at(y, x), k.at(y, -x), 1e-15);
      }
  }
  const Kernel2D sinc = render_kernel(BlurKernelSpec::sinc_kernel(1.5, 6));
  for (int y = -6; y <= 6; ++y)
    for (int x = -6; x <= 6; ++x) EXPECT_NEAR(sinc.at(y, x), sinc.at(-x, y), 1e-15);
}

TEST(Kernels, AnisotropicKernelsArePointSymmetric) {
  Prng p(3);
  for (int i = 0; i < 50; ++i) {
    BlurKernelSpec s = sample_blur_spec(p, 1);
    const Kernel2D k = render_kernel(s);
    for (int y = -s.radius; y <= s.radius; ++y)
      for (int x = -s.radius; x <= s.radius; ++x) EXPECT_NEAR(k.at(y, x), k.at(-y, -x), 1e-15);
  }
}

TEST(Kernels, SamplingDistribution) {
  Prng p(4);
  const int n = 100000;
  std::array<int, 4> fam{};
  int gauss = 0, gauss_iso = 0;
  for (int i = 0; i < n; ++i) {
    const BlurKernelSpec s = sample_blur_spec(p, 1);
    ++fam[static_cast<std::size_t>(s.family)];
    ASSERT_TRUE(s.radius >= 3 && s.radius <= 11 && s.radius % 2 == 1);
    if (s.family == BlurFamily::sinc) {
      ASSERT_GE(s.cutoff, sinc_cutoff_min(s.radius));
      ASSERT_LE(s.cutoff, std::numbers::pi);
      continue;
    }
    ASSERT_TRUE(s.sigma_x >= 0.2 && s.sigma_x <= 3.0 && s.sigma_y >= 0.2 && s.sigma_y <= 3.0);
    ASSERT_TRUE(s.rotation > -std::numbers::pi && s.rotation <= std::numbers::pi);
    if (s.family == BlurFamily::generalized_gaussian) {
      ASSERT_TRUE(s.beta >= 0.5 && s.beta <= 4.0);
    }
    if (s.family == BlurFamily::plateau) {
      ASSERT_TRUE(s.beta >= 1.0 && s.beta <= 2.0);
    }
    if (s.family == BlurFamily::gaussian || s.family == BlurFamily::generalized_gaussian) {
      ++gauss;
      gauss_iso += s.isotropic;
    }
  }
  const double probs[4] = {0.63, 0.135, 0.135, 0.1};
  double chi2 = 0;
  for (int i = 0; i < 4; ++i) {
    const double e = probs[i] * n;
    chi2 += (fam[static_cast<std::size_t>(i)] - e) * (fam[static_cast<std::size_t>(i)] - e) / e;
  }
  EXPECT_LT(chi2, 11.345);  // chi-square(3) 99th percentile
  EXPECT_NEAR(static_cast<double>(gauss_iso) / gauss, 9.0 / 14.0, 0.02);
}

TEST(Kernels, StageTwoSigmaRange) {
  Prng p(5);
  for (int i = 0; i < 5000; ++i) {
    const BlurKernelSpec s = sample_blur_spec(p, 2);
    if (s.family == BlurFamily::sinc) continue;
    ASSERT_LE(std::max(s.sigma_x, s.sigma_y), 1.5);
  }
}

TEST(Kernels, JsonRoundTrip) {
  Prng p(6);
  const BlurKernelSpec s = sample_blur_spec(p, 1);
  nlohmann::json j = s;
  const BlurKernelSpec b = j.get<BlurKernelSpec>();
  EXPECT_EQ(render_kernel(b).weights, render_kernel(s).weights);
}

TEST(Filter, ReflectIndexMirrorsWithoutRepeatingEdge) {
  const std::vector<int> expect = {2, 1, 0, 1, 2, 3, 4, 3, 2, 1, 0, 1};
  for (int i = -2; i < 10; ++i) EXPECT_EQ(reflect_index(i, 5), expect[static_cast<std::size_t>(i + 2)]);
  EXPECT_EQ(reflect_index(-3, 1), 0);
}

TEST(Filter, MatchesBruteForce) {
  const ImageTensor img = texture(7, 13, 9);
  Prng p(7);
  for (int i = 0; i < 5; ++i) {
    const Kernel2D k = render_kernel(sample_blur_spec(p, 1));
    const ImageTensor fast = degrade::detail::convolve_reflect(img, k, Clamp::no);
    EXPECT_LT(max_abs_diff(fast, brute_correlate(img, k)), 1e-5);
  }
}

TEST(Filter, DeltaIsIdentityAndConstantPreserved) {
  const ImageTensor img = texture(8, 10, 10);
  EXPECT_LT(max_abs_diff(convolve(img, Kernel2D::delta()), img), 1e-7);
  const ImageTensor c = constant(12, 12, 3, 0.3f);
  EXPECT_LT(max_abs_diff(convolve(c, render_kernel(BlurKernelSpec::gaussian(2.0, 5))), c), 1e-6);
  EXPECT_THROW(convolve(constant(3, 3, 1, 0.f), Kernel2D::box(5)), InvalidArgument);
}

TEST(Resize, ConstantImagesStayConstant) {
  const ImageTensor c = constant(20, 16, 3, 0.6f);
  for (ResizeMode m : {ResizeMode::area, ResizeMode::bilinear, ResizeMode::bicubic}) {
    for (double s : {0.15, 0.5, 1.0, 1.3}) {
      const ImageTensor r = resize(c, s, m);
      EXPECT_EQ(r.height(), scaled_dim(20, s));
      for (float v : r.values()) EXPECT_NEAR(v, 0.6f, 1e-6);
    }
  }
}

TEST(Resize, AreaDownsampleIsBlockMean) {
  const ImageTensor img = texture(9, 8, 8, 1);
  const ImageTensor r = resize_to(img, 4, 4, ResizeMode::area);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const double m = (img.at(2 * y, 2 * x, 0) + img.at(2 * y + 1, 2 * x, 0) + img.at(2 * y, 2 * x + 1, 0) +
                        img.at(2 * y + 1, 2 * x + 1, 0)) / 4.0;
      EXPECT_NEAR(r.at(y, x, 0), m, 1e-6);
    }
}

TEST(Resize, IdentityScaleIsIdentity) {
  const ImageTensor img = texture(10, 12, 12);
  for (ResizeMode m : {ResizeMode::area, ResizeMode::bilinear, ResizeMode::bicubic}) {
    EXPECT_LT(max_abs_diff(resize_to(img, 12, 12, m), img), 1e-6);
  }
}

TEST(Resize, KeysCubicProperties) {
  EXPECT_DOUBLE_EQ(keys_cubic(0.0), 1.0);
  EXPECT_DOUBLE_EQ(keys_cubic(1.0), 0.0);
  EXPECT_DOUBLE_EQ(keys_cubic(2.0), 0.0);
  for (double f : {0.1, 0.37, 0.5, 0.9}) {
    EXPECT_NEAR(keys_cubic(f + 1) + keys_cubic(f) + keys_cubic(1 - f) + keys_cubic(2 - f), 1.0, 1e-12);
  }
}

TEST(Jpeg, HigherQualityIsCloser) {
  for (std::uint64_t i = 0; i < 20; ++i) {
    const ImageTensor img = texture(100 + i, 32, 40);
    EXPECT_GT(metrics::psnr(jpeg_artifacts(img, 95), img), metrics::psnr(jpeg_artifacts(img, 30), img));
  }
}

TEST(Jpeg, ConstantImageUnchanged) {
  for (int level = 0; level <= 255; ++level) {
    const float v = static_cast<float>(level) / 255.0f;
    for (int c : {1, 3}) {
      const ImageTensor img = constant(24, 17, c, v);
      for (int q : {1, 30, 60, 95, 100}) EXPECT_LE(max_abs_diff(jpeg_artifacts(img, q), img), 1.0 / 255 + 1e-6);
    }
  }
}

TEST(Jpeg, QualityHundredGradientIsNearLossless) {
  ImageTensor img(48, 48, 3, Domain::unit);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) {
      img.at(y, x, 0) = x / 47.0f;
      img.at(y, x, 1) = y / 47.0f;
      img.at(y, x, 2) = (x + y) / 94.0f;
    }
  EXPECT_GT(metrics::psnr(jpeg_artifacts(img, 100), img), 45.0);
}

TEST(Jpeg, QuantTableScaling) {
  EXPECT_EQ(scaled_quant_table(kLumaQuant, 50), kLumaQuant);
  for (int v : scaled_quant_table(kLumaQuant, 100)) EXPECT_EQ(v, 1);
  EXPECT_EQ(scaled_quant_table(kLumaQuant, 10)[0], std::min(255, (16 * 500 + 50) / 100));
}

TEST(Pipeline, OutputShapeRangeAndReplay) {
  const ImageTensor hr = texture(9, 64, 48);
  Prng p(10);
  for (int i = 0; i < 10; ++i) {
    const DegradeResult r = degrade::degrade(hr, p);
    EXPECT_EQ(r.lr.height(), 16);
    EXPECT_EQ(r.lr.width(), 12);
    for (float v : r.lr.values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    nlohmann::json j = r.trace;
    const DegradationTrace back = nlohmann::json::parse(j.dump()).get<DegradationTrace>();
    EXPECT_EQ(apply_trace(hr, back), r.lr);
  }
}

TEST(Pipeline, SameSeedSameOutput) {
  const ImageTensor hr = texture(11, 32, 32);
  Prng a(3), b(3), c(4);
  const ImageTensor la = degrade::degrade(hr, a).lr, lb = degrade::degrade(hr, b).lr, lc = degrade::degrade(hr, c).lr;
  EXPECT_EQ(la, lb);
  EXPECT_NE(la, lc);
}

TEST(Pipeline, SecondBlurPresenceAndRanges) {
  Prng p(12);
  const int n = 100000;
  int second = 0, before = 0;
  for (int i = 0; i < n; ++i) {
    const DegradationTrace t = sample_trace(p, 64, 64);
    second += t.stage2.blur.has_value();
    before += t.stage2.sinc_position == SincPosition::before_jpeg;
    ASSERT_TRUE(t.stage1.resize.scale >= 0.15 && t.stage1.resize.scale <= 1.5);
    ASSERT_TRUE(t.stage2.resize.scale >= 0.3 && t.stage2.resize.scale <= 1.2);
    ASSERT_TRUE(t.stage1.jpeg_quality >= 30 && t.stage1.jpeg_quality <= 95);
    ASSERT_TRUE(t.stage2.jpeg_quality >= 30 && t.stage2.jpeg_quality <= 95);
    ASSERT_EQ(t.final_resize.height, 16);
  }
  EXPECT_NEAR(static_cast<double>(second) / n, 0.8, 0.015);
  EXPECT_NEAR(static_cast<double>(before) / n, 0.5, 0.015);
}

TEST(Pipeline, BenignIsCloserThanAdversarial) {
  const ImageTensor hr = texture(13, 64, 64);
  const ImageTensor ref = bicubic_downsample(hr, 4);
  const double benign = metrics::psnr(apply_trace(hr, benign_trace(64, 64)), ref);
  const double harsh = metrics::psnr(apply_trace(hr, adversarial_trace(64, 64)), ref);
  EXPECT_GT(benign, harsh + 3.0);
}

TEST(Pipeline, RejectsBadDims) {
  Prng p(1);
  EXPECT_THROW(degrade::degrade(constant(62, 64, 3, 0.5f), p), InvalidArgument);
  EXPECT_THROW(degrade::degrade(constant(28, 28, 3, 0.5f), p), InvalidArgument);
}
