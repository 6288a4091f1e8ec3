#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace hiersearch {

inline constexpr double kDefaultRegEpsilon = 1e-3;
inline constexpr double kCovarianceFloor = 1e-8;
/// Bhattacharyya distances above this map to a coefficient of exactly 0.
inline constexpr double kCoefficientUnderflowDistance = 700.0;

/// Multivariate Gaussian for one class or merged node, with its Cholesky
/// factor and log-determinant cached at construction.
class ClassGaussian {
 public:
  ClassGaussian() = default;
  /// Factorizes `sigma`; throws a numerical error naming `class_id` if it is
  /// not positive definite.
  ClassGaussian(std::int64_t class_id, Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                std::size_t count);

  std::int64_t class_id() const { return class_id_; }
  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  double log_det() const { return log_det_; }
  std::size_t count() const { return count_; }
  Eigen::Index dim() const { return mu_.size(); }

 private:
  std::int64_t class_id_ = -1;
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
  std::size_t count_ = 0;
};

/// Fits mean and population covariance (divisor n) to the columns of
/// `samples`, then adds reg_epsilon * (trace/r + floor) to the diagonal.
ClassGaussian fit_gaussian(const Eigen::MatrixXd& samples, double reg_epsilon = kDefaultRegEpsilon,
                           std::int64_t class_id = -1);

double bhattacharyya_distance(const ClassGaussian& a, const ClassGaussian& b);
double bhattacharyya_coefficient(const ClassGaussian& a, const ClassGaussian& b);

double mahalanobis(const ClassGaussian& g, const Eigen::VectorXd& x);
/// Squared Mahalanobis distance of every column of `xs`.
Eigen::VectorXd squared_mahalanobis(const ClassGaussian& g, const Eigen::MatrixXd& xs);

}  // namespace hiersearch
