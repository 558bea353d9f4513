#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "blindsr/core/error.hpp"

namespace blindsr::metrics {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased covariance of the rows of `features` (n x d).
inline GaussianStats gaussian_stats(const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw InvalidArgument("gaussian_stats: need at least two samples");
  GaussianStats s;
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  return s;
}

namespace detail {

// Square root of a symmetric PSD matrix; negative eigenvalues are clipped to 0.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).
///
/// Tr((S1 S2)^{1/2}) is evaluated as Tr((S1^{1/2} S2 S1^{1/2})^{1/2}), which
/// has the same eigenvalues but is symmetric, so a self-adjoint solver applies.
inline double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                               const Eigen::MatrixXd& cov2) {
  const Eigen::Index d = mu1.size();
  if (mu2.size() != d || cov1.rows() != d || cov1.cols() != d || cov2.rows() != d || cov2.cols() != d) {
    throw InvalidArgument("frechet_distance: dimension mismatch");
  }
  const Eigen::MatrixXd s1 = 0.5 * (cov1 + cov1.transpose());
  const Eigen::MatrixXd s2 = 0.5 * (cov2 + cov2.transpose());
  const Eigen::MatrixXd r1 = detail::psd_sqrt(s1);
  const Eigen::MatrixXd inner = r1 * s2 * r1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, value);
}

inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  return frechet_distance(a.mean, a.cov, b.mean, b.cov);
}

}  // namespace blindsr::metrics
