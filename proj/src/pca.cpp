#include "hiersearch/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hiersearch/error.hpp"

namespace hiersearch {

namespace {

// Eigenvalues below this fraction of the largest are treated as numerically
// zero and never retained.
constexpr double kRankTolerance = 1e-12;

Eigen::Index argmax_abs(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  return best;
}

}  // namespace

std::size_t select_components(std::span<const double> eigenvalues, double variance_target) {
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw Error(ErrorKind::kConfig, "variance target must lie in (0, 1]");
  }
  if (eigenvalues.empty()) throw Error(ErrorKind::kInsufficientData, "no eigenvalues");
  double total = 0.0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues[i] < 0.0 || !std::isfinite(eigenvalues[i])) {
      throw Error(ErrorKind::kValidation, "eigenvalues must be finite and non-negative");
    }
    if (i > 0 && eigenvalues[i] > eigenvalues[i - 1]) {
      throw Error(ErrorKind::kValidation, "eigenvalues must be non-increasing");
    }
    total += eigenvalues[i];
  }
  if (total <= 0.0) throw Error(ErrorKind::kInsufficientData, "all eigenvalues are zero");
  double prefix = 0.0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    prefix += eigenvalues[i];
    if (prefix / total >= variance_target) return i + 1;
  }
  return eigenvalues.size();
}

PcaModel fit_pca(const Eigen::MatrixXd& samples, double variance_target) {
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw Error(ErrorKind::kConfig, "variance target must lie in (0, 1]");
  }
  const Eigen::Index d = samples.rows();
  const Eigen::Index n = samples.cols();
  if (n < 2) {
    throw Error(ErrorKind::kInsufficientData, "PCA needs at least 2 training vectors, got " +
                                                  std::to_string(n));
  }

  PcaModel model;
  model.mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - model.mean;
  const double inv_n = 1.0 / static_cast<double>(n);

  // Eigenpairs of the d x d covariance, obtained from whichever Gram form is
  // smaller. Columns of `vectors` are unit-norm directions in input space.
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  if (d <= n) {
    const Eigen::MatrixXd cov = (centered * centered.transpose()) * inv_n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorKind::kNumerical, "covariance eigendecomposition failed");
    }
    values = solver.eigenvalues();
    vectors = solver.eigenvectors();
  } else {
    const Eigen::MatrixXd gram = (centered.transpose() * centered) * inv_n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorKind::kNumerical, "Gram eigendecomposition failed");
    }
    values = solver.eigenvalues();
    vectors = centered * solver.eigenvectors();
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
      const double norm = vectors.col(j).norm();
      if (norm > 0.0) vectors.col(j) /= norm;
    }
  }
  values = values.cwiseMax(0.0);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::Index> axis(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    axis[i] = argmax_abs(vectors.col(static_cast<Eigen::Index>(i)));
  }
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return axis[static_cast<std::size_t>(a)] < axis[static_cast<std::size_t>(b)];
  });

  std::vector<double> sorted(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = values[order[i]];
  const double largest = sorted.front();
  if (!(largest > 0.0)) {
    throw Error(ErrorKind::kInsufficientData, "training data has zero total variance");
  }
  std::size_t rank = 0;
  while (rank < sorted.size() && sorted[rank] > largest * kRankTolerance) ++rank;
  for (std::size_t i = rank; i < sorted.size(); ++i) sorted[i] = 0.0;

  const std::size_t r = std::min(select_components(sorted, variance_target), rank);
  model.total_variance = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  model.eigenvalues.resize(static_cast<Eigen::Index>(r));
  model.components.resize(static_cast<Eigen::Index>(r), d);
  double retained = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    Eigen::VectorXd v = vectors.col(order[i]);
    if (v[argmax_abs(v)] < 0.0) v = -v;
    model.components.row(static_cast<Eigen::Index>(i)) = v.transpose();
    model.eigenvalues[static_cast<Eigen::Index>(i)] = sorted[i];
    retained += sorted[i];
  }
  model.explained_fraction = retained / model.total_variance;
  return model;
}

Eigen::MatrixXd to_matrix(const EmbeddingSet& set) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(set.dim), static_cast<Eigen::Index>(set.size()));
  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto& v = set.records[j].vector;
    for (std::uint32_t i = 0; i < set.dim; ++i) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i];
    }
  }
  return m;
}

PcaModel fit_pca(const EmbeddingSet& train, double variance_target) {
  return fit_pca(to_matrix(train), variance_target);
}

Eigen::VectorXd transform(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.original_dim()) {
    throw Error(ErrorKind::kDimension, "vector has dimension " + std::to_string(x.size()) +
                                           ", model expects " +
                                           std::to_string(model.original_dim()));
  }
  return model.components * (x - model.mean);
}

Eigen::VectorXd transform(const PcaModel& model, std::span<const float> x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return transform(model, v);
}

Eigen::MatrixXd transform(const PcaModel& model, const EmbeddingSet& set) {
  if (static_cast<Eigen::Index>(set.dim) != model.original_dim()) {
    throw Error(ErrorKind::kDimension, "set has dimension " + std::to_string(set.dim) +
                                           ", model expects " +
                                           std::to_string(model.original_dim()));
  }
  if (set.empty()) return Eigen::MatrixXd(model.reduced_dim(), 0);
  return model.components * (to_matrix(set).colwise() - model.mean);
}

}  // namespace hiersearch
