#pragma once

#include <span>

#include <Eigen/Dense>

#include "hiersearch/embedding_store.hpp"

namespace hiersearch {

inline constexpr double kDefaultVarianceTarget = 0.95;

/// Principal component projection fitted on training features.
///
/// `components` holds one orthonormal row per retained direction, ordered by
/// descending eigenvalue. The sign of each row is fixed so its largest
/// magnitude entry is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // reduced_dim x original_dim
  Eigen::VectorXd eigenvalues;
  double total_variance = 0.0;
  double explained_fraction = 0.0;

  Eigen::Index original_dim() const { return components.cols(); }
  Eigen::Index reduced_dim() const { return components.rows(); }
};

/// Smallest r whose prefix eigenvalue mass reaches `variance_target` of the
/// total. Eigenvalues must be non-increasing and non-negative.
std::size_t select_components(std::span<const double> eigenvalues, double variance_target);

PcaModel fit_pca(const Eigen::MatrixXd& samples, double variance_target = kDefaultVarianceTarget);
PcaModel fit_pca(const EmbeddingSet& train, double variance_target = kDefaultVarianceTarget);

Eigen::VectorXd transform(const PcaModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd transform(const PcaModel& model, std::span<const float> x);
/// Projects every record; column j is record j.
Eigen::MatrixXd transform(const PcaModel& model, const EmbeddingSet& set);

/// Column-per-record matrix of the raw vectors in `set`.
Eigen::MatrixXd to_matrix(const EmbeddingSet& set);

}  // namespace hiersearch
