#include "hiersearch/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "hiersearch/error.hpp"
#include "model_sections.hpp"
#include "parallel.hpp"

namespace hiersearch {

namespace {

constexpr std::uint32_t kDatabaseTag = detail::fourcc("DATA");
constexpr std::uint32_t kAssignmentTag = detail::fourcc("ASGN");

Eigen::VectorXd reduce_query(const RetrievalIndex& index, std::span<const float> q) {
  const auto& pca = index.model().pca;
  if (static_cast<Eigen::Index>(q.size()) != pca.original_dim()) {
    throw Error(ErrorKind::kDimension, "query has dimension " + std::to_string(q.size()) +
                                           ", index expects " +
                                           std::to_string(pca.original_dim()));
  }
  Eigen::VectorXd x = transform(pca, q);
  if (!(x.norm() > 0.0)) throw Error(ErrorKind::kQuery, "query reduces to a zero vector");
  return x;
}

// Orders positions by (score, position) and keeps the first k.
std::vector<std::size_t> top_k(const std::vector<double>& score, std::vector<std::size_t> positions,
                               std::size_t k) {
  k = std::min(k, positions.size());
  const auto less = [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return a < b;
  };
  std::partial_sort(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(k),
                    positions.end(), less);
  positions.resize(k);
  return positions;
}

std::vector<std::size_t> candidate_positions(const RetrievalIndex& index,
                                             std::optional<RecordId> exclude_id) {
  std::vector<std::size_t> positions;
  positions.reserve(index.size());
  const auto& records = index.database().records;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (exclude_id && records[i].id == *exclude_id) continue;
    positions.push_back(i);
  }
  return positions;
}

double clamp_cosine(double d) { return std::clamp(d, 0.0, 2.0); }

std::vector<double> cosine_scores(const RetrievalIndex& index, const Eigen::VectorXd& x) {
  const double qn = x.norm();
  const Eigen::VectorXd dots = index.reduced().transpose() * x;
  std::vector<double> cosine(index.size());
  for (std::size_t i = 0; i < cosine.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    cosine[i] = clamp_cosine(1.0 - dots[ii] / (index.norms()[ii] * qn));
  }
  return cosine;
}

}  // namespace

RetrievalIndex::RetrievalIndex(HierarchyModel model, EmbeddingSet database,
                               std::vector<NodeId> assignment)
    : model_(std::move(model)), database_(std::move(database)), assignment_(std::move(assignment)) {
  if (static_cast<Eigen::Index>(database_.dim) != model_.pca.original_dim()) {
    throw Error(ErrorKind::kDimension, "database has dimension " + std::to_string(database_.dim) +
                                           ", model expects " +
                                           std::to_string(model_.pca.original_dim()));
  }
  if (assignment_.size() != database_.size()) {
    throw Error(ErrorKind::kValidation, "leaf assignment count does not match the database");
  }
  if (model_.leaf_gaussians.size() != model_.tree.leaf_count()) {
    throw Error(ErrorKind::kValidation, "model has mismatched leaf Gaussians");
  }
  for (NodeId leaf : assignment_) {
    if (leaf >= model_.tree.leaf_count()) {
      throw Error(ErrorKind::kValidation, "assignment to non-leaf node " + std::to_string(leaf));
    }
  }
  reduced_ = transform(model_.pca, database_);
  norms_ = reduced_.colwise().norm().transpose();

  std::vector<RecordId> zero;
  for (Eigen::Index i = 0; i < norms_.size(); ++i) {
    if (!(norms_[i] > 0.0)) zero.push_back(database_.records[static_cast<std::size_t>(i)].id);
  }
  if (!zero.empty()) {
    std::ostringstream msg;
    msg << "zero-norm reduced vectors for record ids:";
    for (std::size_t i = 0; i < zero.size() && i < 20; ++i) msg << ' ' << zero[i];
    if (zero.size() > 20) msg << " ... (" << zero.size() << " total)";
    throw Error(ErrorKind::kValidation, msg.str());
  }
  leaf_distances_ = leaf_distance_table(model_.tree);
}

std::vector<NodeId> assign_leaves(std::span<const ClassGaussian> leaf_gaussians,
                                  const Eigen::MatrixXd& xs, unsigned threads) {
  if (leaf_gaussians.empty()) throw Error(ErrorKind::kValidation, "no leaf Gaussians");
  const auto n = static_cast<std::size_t>(xs.cols());
  std::vector<Eigen::VectorXd> distances(leaf_gaussians.size());
  detail::parallel_for(leaf_gaussians.size(), threads, [&](std::size_t leaf) {
    distances[leaf] = squared_mahalanobis(leaf_gaussians[leaf], xs);
  });
  std::vector<NodeId> best(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    double best_d = distances[0][static_cast<Eigen::Index>(j)];
    for (std::size_t leaf = 1; leaf < leaf_gaussians.size(); ++leaf) {
      const double d = distances[leaf][static_cast<Eigen::Index>(j)];
      if (d < best_d) {
        best_d = d;
        best[j] = static_cast<NodeId>(leaf);
      }
    }
  }
  return best;
}

NodeId assign_leaf(std::span<const ClassGaussian> leaf_gaussians, const Eigen::VectorXd& x) {
  return assign_leaves(leaf_gaussians, Eigen::MatrixXd(x), 1).front();
}

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kDimension, "cosine of vectors of unequal length");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorKind::kQuery, "cosine distance of a zero vector is undefined");
  }
  return clamp_cosine(1.0 - a.dot(b) / (na * nb));
}

RetrievalIndex build_index(HierarchyModel model, EmbeddingSet database, unsigned threads) {
  database.validate();
  std::vector<NodeId> assignment;
  if (!database.empty()) {
    const Eigen::MatrixXd reduced = transform(model.pca, database);
    assignment = assign_leaves(model.leaf_gaussians, reduced, threads);
  } else if (static_cast<Eigen::Index>(database.dim) != model.pca.original_dim()) {
    database.dim = static_cast<std::uint32_t>(model.pca.original_dim());
  }
  return RetrievalIndex(std::move(model), std::move(database), std::move(assignment));
}

QueryResponse query_detailed(const RetrievalIndex& index, std::span<const float> q,
                             const QueryOptions& options) {
  if (!(options.alpha >= 0.0) || !std::isfinite(options.alpha)) {
    throw Error(ErrorKind::kConfig, "alpha must be a finite non-negative number");
  }
  const Eigen::VectorXd x = reduce_query(index, q);
  QueryResponse response;
  response.query_leaf = assign_leaf(index.model().leaf_gaussians, x);
  if (options.k == 0 || index.size() == 0) return response;

  const auto& assignment = index.leaf_assignment();
  const std::vector<double> cosine = cosine_scores(index, x);
  std::vector<double> combined(cosine.size());
  for (std::size_t i = 0; i < cosine.size(); ++i) {
    combined[i] = cosine[i] + options.alpha * index.leaf_distance(response.query_leaf, assignment[i]);
  }
  const auto order = top_k(combined, candidate_positions(index, options.exclude_id), options.k);
  response.results.reserve(order.size());
  for (std::size_t pos : order) {
    RankedResult r;
    r.record_id = index.database().records[pos].id;
    r.position = pos;
    r.combined = combined[pos];
    r.cosine_part = cosine[pos];
    r.hierarchical_part = index.leaf_distance(response.query_leaf, assignment[pos]);
    r.leaf = assignment[pos];
    response.results.push_back(r);
  }
  return response;
}

std::vector<RankedResult> query(const RetrievalIndex& index, std::span<const float> q,
                                const QueryOptions& options) {
  return query_detailed(index, q, options).results;
}

std::vector<RankedResult> cosine_rank(const RetrievalIndex& index, std::span<const float> q,
                                      std::size_t k) {
  const std::vector<double> cosine = cosine_scores(index, reduce_query(index, q));
  std::vector<RankedResult> results;
  for (std::size_t pos : top_k(cosine, candidate_positions(index, std::nullopt), k)) {
    RankedResult r;
    r.record_id = index.database().records[pos].id;
    r.position = pos;
    r.combined = cosine[pos];
    r.cosine_part = cosine[pos];
    r.leaf = index.leaf_assignment()[pos];
    results.push_back(r);
  }
  return results;
}

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
  detail::Container container;
  container.magic = detail::kIndexMagic;
  detail::add_model_sections(container, index.model());
  {
    std::ostringstream out(std::ios::binary);
    write_hfv1(index.database(), out);
    container.add(kDatabaseTag, out.str());
  }
  {
    std::ostringstream out(std::ios::binary);
    detail::write_u32(out, static_cast<std::uint32_t>(index.leaf_assignment().size()));
    for (NodeId leaf : index.leaf_assignment()) detail::write_u32(out, leaf);
    container.add(kAssignmentTag, out.str());
  }
  detail::write_container(container, path);
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  const auto container = detail::read_container(path, detail::kIndexMagic);
  HierarchyModel model = detail::read_model_sections(container);
  EmbeddingSet database;
  {
    std::istringstream in(container.get(kDatabaseTag), std::ios::binary);
    database = read_hfv1(in);
    database.validate();
  }
  std::vector<NodeId> assignment;
  {
    std::istringstream in(container.get(kAssignmentTag), std::ios::binary);
    const auto n = detail::read_u32(in, "assignments");
    if (n != database.size()) {
      throw Error(ErrorKind::kFormat, "assignment count does not match the database");
    }
    assignment.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) assignment.push_back(detail::read_u32(in, "assignment"));
  }
  return RetrievalIndex(std::move(model), std::move(database), std::move(assignment));
}

}  // namespace hiersearch
