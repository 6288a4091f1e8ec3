#include "hiersearch/gaussian.hpp"

#include <cmath>
#include <string>

#include "hiersearch/error.hpp"

namespace hiersearch {

namespace {

void require_same_dim(const ClassGaussian& a, const ClassGaussian& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::kDimension, "Gaussians have dimensions " + std::to_string(a.dim()) +
                                           " and " + std::to_string(b.dim()));
  }
}

}  // namespace

ClassGaussian::ClassGaussian(std::int64_t class_id, Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                             std::size_t count)
    : class_id_(class_id), mu_(std::move(mu)), sigma_(std::move(sigma)), count_(count) {
  if (sigma_.rows() != mu_.size() || sigma_.cols() != mu_.size()) {
    throw Error(ErrorKind::kDimension, "covariance shape does not match mean");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kNumerical,
                "covariance of class " + std::to_string(class_id_) + " is not positive definite");
  }
  chol_ = llt.matrixL();
  const auto diag = chol_.diagonal();
  if (!(diag.array() > 0.0).all() || !diag.allFinite()) {
    throw Error(ErrorKind::kNumerical,
                "covariance of class " + std::to_string(class_id_) + " is not positive definite");
  }
  log_det_ = 2.0 * diag.array().log().sum();
}

ClassGaussian fit_gaussian(const Eigen::MatrixXd& samples, double reg_epsilon,
                           std::int64_t class_id) {
  if (samples.cols() == 0) {
    throw Error(ErrorKind::kInsufficientData,
                "cannot fit a Gaussian to class " + std::to_string(class_id) + " with no samples");
  }
  if (!(reg_epsilon >= 0.0)) throw Error(ErrorKind::kConfig, "reg_epsilon must be >= 0");

  const auto n = samples.cols();
  const auto r = samples.rows();
  Eigen::VectorXd mu = samples.rowwise().mean();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(r, r);
  if (n >= 2) {
    const Eigen::MatrixXd centered = samples.colwise() - mu;
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / static_cast<double>(n));
    sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  }
  const double ridge = reg_epsilon * (sigma.trace() / static_cast<double>(r) + kCovarianceFloor);
  sigma.diagonal().array() += ridge;
  return ClassGaussian(class_id, std::move(mu), std::move(sigma), static_cast<std::size_t>(n));
}

double bhattacharyya_distance(const ClassGaussian& a, const ClassGaussian& b) {
  require_same_dim(a, b);
  const Eigen::MatrixXd avg = 0.5 * (a.sigma() + b.sigma());
  Eigen::LLT<Eigen::MatrixXd> llt(avg);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kNumerical, "averaged covariance of classes " +
                                           std::to_string(a.class_id()) + " and " +
                                           std::to_string(b.class_id()) +
                                           " is not positive definite");
  }
  const Eigen::VectorXd whitened = llt.matrixL().solve(a.mu() - b.mu());
  const double log_det_avg = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double mean_term = 0.125 * whitened.squaredNorm();
  const double cov_term = 0.5 * (log_det_avg - 0.5 * (a.log_det() + b.log_det()));
  return std::max(0.0, mean_term + cov_term);
}

double bhattacharyya_coefficient(const ClassGaussian& a, const ClassGaussian& b) {
  const double d = bhattacharyya_distance(a, b);
  if (d > kCoefficientUnderflowDistance) return 0.0;
  return std::exp(-d);
}

double mahalanobis(const ClassGaussian& g, const Eigen::VectorXd& x) {
  if (x.size() != g.dim()) {
    throw Error(ErrorKind::kDimension, "vector has dimension " + std::to_string(x.size()) +
                                           ", Gaussian has " + std::to_string(g.dim()));
  }
  const Eigen::VectorXd z = g.chol().triangularView<Eigen::Lower>().solve(x - g.mu());
  return z.norm();
}

Eigen::VectorXd squared_mahalanobis(const ClassGaussian& g, const Eigen::MatrixXd& xs) {
  if (xs.rows() != g.dim()) {
    throw Error(ErrorKind::kDimension, "vectors have dimension " + std::to_string(xs.rows()) +
                                           ", Gaussian has " + std::to_string(g.dim()));
  }
  Eigen::MatrixXd z = xs.colwise() - g.mu();
  g.chol().triangularView<Eigen::Lower>().solveInPlace(z);
  return z.colwise().squaredNorm().transpose();
}

}  // namespace hiersearch
