#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "blindsr/metrics/evaluate.hpp"
#include "blindsr/metrics/features.hpp"
#include "blindsr/metrics/frechet.hpp"
#include "blindsr/metrics/quality.hpp"

using namespace blindsr;
using namespace blindsr::metrics;

namespace {

ImageTensor random_image(Prng& p, int h, int w, int c) {
  ImageTensor img(h, w, c);
  for (float& v : img.values()) v = static_cast<float>(p.uniform());
  return img;
}

ImageTensor noisy_copy(const ImageTensor& x, Prng& p, double sd) {
  ImageTensor y = x;
  for (float& v : y.values()) v = static_cast<float>(std::clamp(v + sd * p.normal(), 0.0, 1.0));
  return y;
}

// Direct 2-D window sums, no separability.
double ssim_brute(const ImageTensor& a, const ImageTensor& b) {
  const int n = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  std::vector<double> w2(n * n);
  double sum = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d2 = (i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0);
      w2[static_cast<std::size_t>(i * n + j)] = std::exp(-d2 / (2 * sigma * sigma));
      sum += w2[static_cast<std::size_t>(i * n + j)];
    }
  for (double& v : w2) v /= sum;
  double total = 0;
  for (int c = 0; c < a.channels(); ++c) {
    double acc = 0;
    int count = 0;
    for (int y = 0; y + n <= a.height(); ++y)
      for (int x = 0; x + n <= a.width(); ++x) {
        double ma = 0, mb = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            ma += w2[static_cast<std::size_t>(i * n + j)] * a.at(y + i, x + j, c);
            mb += w2[static_cast<std::size_t>(i * n + j)] * b.at(y + i, x + j, c);
          }
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double da = a.at(y + i, x + j, c) - ma, db = b.at(y + i, x + j, c) - mb;
            va += w2[static_cast<std::size_t>(i * n + j)] * da * da;
            vb += w2[static_cast<std::size_t>(i * n + j)] * db * db;
            cov += w2[static_cast<std::size_t>(i * n + j)] * da * db;
          }
        acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    total += acc / count;
  }
  return total / a.channels();
}

Eigen::MatrixXd random_spd(Prng& p, int d) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = p.normal();
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

// Tr((S1 S2)^{1/2}) from the (real, non-negative) eigenvalues of the
// non-symmetric product.
double frechet_general(const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& m2,
                       const Eigen::MatrixXd& s2) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(s1 * s2);
  double tr = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(es.eigenvalues()(i)).real();
  return (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2 * tr;
}

SuperResolver fixed_resolver(std::vector<ImageTensor> images) {
  return [images = std::move(images)](const SampleRequest& r) {
    std::vector<ImageTensor> out;
    for (std::size_t id : r.ids) out.push_back(images[id]);
    return out;
  };
}

}  // namespace

TEST(Psnr, KnownValues) {
  const ImageTensor a = ImageTensor::filled(8, 8, 3, 0.5f);
  const ImageTensor b = ImageTensor::filled(8, 8, 3, 0.6f);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-5);
  EXPECT_EQ(psnr(a, a), 99.0);
  EXPECT_THROW(psnr(a, ImageTensor::filled(8, 8, 1, 0.5f)), InvalidArgument);
}

TEST(Psnr, MatchesDirectFormula) {
  Prng p(1);
  for (int k = 0; k < 5; ++k) {
    const ImageTensor a = random_image(p, 13, 9, 3), b = random_image(p, 13, 9, 3);
    double s = 0;
    for (int y = 0; y < 13; ++y)
      for (int x = 0; x < 9; ++x)
        for (int c = 0; c < 3; ++c) s += std::pow(static_cast<double>(a.at(y, x, c)) - b.at(y, x, c), 2);
    EXPECT_NEAR(psnr(a, b), -10 * std::log10(s / (13 * 9 * 3)), 1e-9);
  }
}

TEST(Ssim, MatchesBruteForce) {
  Prng p(2);
  for (int c : {1, 3}) {
    const ImageTensor a = random_image(p, 20, 17, c);
    const ImageTensor b = noisy_copy(a, p, 0.1);
    EXPECT_NEAR(ssim(a, b), ssim_brute(a, b), 1e-6);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  }
}

TEST(Ssim, IdentityAndBounds) {
  Prng p(3);
  const ImageTensor a = random_image(p, 16, 16, 3);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  const ImageTensor b = random_image(p, 16, 16, 3);
  const double s = ssim(a, b);
  EXPECT_LT(s, 0.2);
  EXPECT_GT(s, -1.0);
  EXPECT_THROW(ssim(random_image(p, 10, 16, 1), random_image(p, 10, 16, 1)), InvalidArgument);
}

TEST(Ssim, DecreasesWithNoise) {
  Prng p(4);
  const ImageTensor a = random_image(p, 24, 24, 1);
  double prev = 1.0;
  for (double sd : {0.02, 0.05, 0.1, 0.2}) {
    const double s = ssim(a, noisy_copy(a, p, sd));
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(Frechet, IdenticalGaussiansAreZero) {
  Prng p(5);
  const Eigen::MatrixXd s = random_spd(p, 6);
  const Eigen::VectorXd m = Eigen::VectorXd::Random(6);
  EXPECT_NEAR(frechet_distance(m, s, m, s), 0.0, 1e-9);
}

TEST(Frechet, ShiftedIdentityIsSquaredDistance) {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd a(4), b(4);
  a << 0, 1, 2, 3;
  b << 1, 1, 0, 3;
  EXPECT_NEAR(frechet_distance(a, id, b, id), 5.0, 1e-12);
}

TEST(Frechet, IsotropicClosedForm) {
  const int d = 5;
  const double a = 2.0, b = 0.5;
  const Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  EXPECT_NEAR(frechet_distance(m, a * id, m, b * id), d * std::pow(std::sqrt(a) - std::sqrt(b), 2), 1e-12);
}

TEST(Frechet, MatchesGeneralEigenvalueFormula) {
  Prng p(6);
  for (int k = 0; k < 5; ++k) {
    const Eigen::MatrixXd s1 = random_spd(p, 5), s2 = random_spd(p, 5);
    Eigen::VectorXd m1(5), m2(5);
    for (int i = 0; i < 5; ++i) {
      m1(i) = p.normal();
      m2(i) = p.normal();
    }
    EXPECT_NEAR(frechet_distance(m1, s1, m2, s2), frechet_general(m1, s1, m2, s2), 1e-8);
    EXPECT_NEAR(frechet_distance(m1, s1, m2, s2), frechet_distance(m2, s2, m1, s1), 1e-8);
  }
}

TEST(Frechet, RankDeficientCovariance) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  s(0, 0) = 1.0;
  const Eigen::VectorXd m = Eigen::VectorXd::Zero(3);
  EXPECT_NEAR(frechet_distance(m, s, m, s), 0.0, 1e-12);
  EXPECT_NEAR(frechet_distance(m, s, m, Eigen::MatrixXd::Zero(3, 3)), 1.0, 1e-12);
}

TEST(GaussianStats, MeanAndUnbiasedCovariance) {
  Eigen::MatrixXd f(3, 2);
  f << 1, 2, 3, 4, 5, 9;
  const GaussianStats s = gaussian_stats(f);
  EXPECT_NEAR(s.mean(0), 3.0, 1e-12);
  EXPECT_NEAR(s.mean(1), 5.0, 1e-12);
  EXPECT_NEAR(s.cov(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(s.cov(0, 1), 7.0, 1e-12);
  EXPECT_NEAR(s.cov(1, 1), 13.0, 1e-12);
  EXPECT_THROW(gaussian_stats(f.topRows(1)), InvalidArgument);
}

TEST(Features, DeterministicAndChunkInvariant) {
  Prng p(7);
  std::vector<ImageTensor> imgs;
  for (int i = 0; i < 5; ++i) imgs.push_back(random_image(p, 16, 16, 3));
  const FeatureExtractor ex;
  const Eigen::MatrixXd a = extract_features(imgs, ex);
  const Eigen::MatrixXd b = extract_features(imgs, ex, 2);
  EXPECT_EQ(a.rows(), 5);
  EXPECT_EQ(a.cols(), 64);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6);
  FeatureExtractor other;
  other.seed = 1;
  EXPECT_GT((extract_features(imgs, other) - a).cwiseAbs().maxCoeff(), 1e-3);
  imgs.push_back(random_image(p, 8, 16, 3));
  EXPECT_THROW(extract_features(imgs, ex), InvalidArgument);
}

TEST(Features, DistanceGrowsWithDegradation) {
  Prng p(8);
  std::vector<ImageTensor> ref, mild, strong;
  for (int i = 0; i < 40; ++i) {
    ref.push_back(random_image(p, 16, 16, 1));
    mild.push_back(noisy_copy(ref.back(), p, 0.05));
    strong.push_back(ImageTensor::filled(16, 16, 1, 0.5f));
  }
  const FeatureExtractor ex;
  EXPECT_NEAR(frechet_score(ref, ref, ex), 0.0, 1e-8);
  EXPECT_LT(frechet_score(mild, ref, ex), frechet_score(strong, ref, ex));
}

class EvaluateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Prng p(9);
    for (int i = 0; i < 6; ++i) {
      hr_.push_back(random_image(p, 16, 16, 3));
      cond_.push_back(noisy_copy(hr_.back(), p, 0.1));
    }
  }
  std::vector<ImageTensor> hr_, cond_;
};

TEST_F(EvaluateTest, PerfectOracleScoresPerfectly) {
  EvalOptions o;
  const MetricsReport r = evaluate(fixed_resolver(hr_), cond_, hr_, o);
  EXPECT_EQ(r.n_pairs, 6u);
  EXPECT_EQ(r.psnr_mean, 99.0);
  EXPECT_NEAR(r.ssim_mean, 1.0, 1e-12);
  EXPECT_NEAR(r.frechet, 0.0, 1e-8);
}

TEST_F(EvaluateTest, MeansOfPerPairMetrics) {
  EvalOptions o;
  const MetricsReport r = evaluate(fixed_resolver(cond_), cond_, hr_, o);
  double ps = 0, ss = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(r.psnr[i], psnr(cond_[i], hr_[i]), 1e-12);
    ps += r.psnr[i];
    ss += r.ssim[i];
  }
  EXPECT_NEAR(r.psnr_mean, ps / 6, 1e-12);
  EXPECT_NEAR(r.ssim_mean, ss / 6, 1e-12);
  EXPECT_GT(r.frechet, 0.0);
}

TEST_F(EvaluateTest, IndependentOfChunking) {
  // The resolver returns its augmented input plus noise from the chain prng.
  const SuperResolver noisy = [](const SampleRequest& r) {
    std::vector<ImageTensor> out;
    for (std::size_t k = 0; k < r.cond.size(); ++k) out.push_back(noisy_copy(r.cond[k], r.prngs[k], 0.05));
    return out;
  };
  EvalOptions a, b;
  a.chunk = 64;
  b.chunk = 4;
  a.seed = b.seed = 3;
  const MetricsReport ra = evaluate(noisy, cond_, hr_, a), rb = evaluate(noisy, cond_, hr_, b);
  EXPECT_EQ(ra.psnr, rb.psnr);
  EXPECT_EQ(ra.frechet, rb.frechet);
  b.seed = 4;
  EXPECT_NE(evaluate(noisy, cond_, hr_, b).psnr, ra.psnr);
}

TEST_F(EvaluateTest, RejectsBadInputs) {
  EvalOptions o;
  EXPECT_THROW(evaluate(fixed_resolver(hr_), std::span(cond_).first(3), hr_, o), InvalidArgument);
  EXPECT_THROW(evaluate(fixed_resolver(hr_), std::span(cond_).first(1), std::span(hr_).first(1), o), InvalidArgument);
  o.t_eval = 1.5;
  EXPECT_THROW(evaluate(fixed_resolver(hr_), cond_, hr_, o), InvalidArgument);
  const SuperResolver bad = [](const SampleRequest&) -> std::vector<ImageTensor> { throw DivergenceError(2, "nan"); };
  EXPECT_THROW(evaluate(bad, cond_, hr_, EvalOptions{}), DivergenceError);
}

TEST(MetricsReport, JsonAndCsv) {
  MetricsReport r;
  r.psnr_mean = 21.5;
  r.ssim_mean = 0.6;
  r.frechet = 0.01;
  r.n_pairs = 2;
  r.t_eval = 0.1;
  r.psnr = {21, 22};
  r.ssim = {0.5, 0.7};
  const MetricsReport back = nlohmann::json(r).get<MetricsReport>();
  EXPECT_EQ(back.psnr, r.psnr);
  EXPECT_EQ(back.frechet, r.frechet);
  EXPECT_EQ(csv_row(r), "0.1,2,21.5,0.6,0.01");
  EXPECT_EQ(csv_header(), "t_eval,n_pairs,psnr_mean,ssim_mean,frechet");
}
