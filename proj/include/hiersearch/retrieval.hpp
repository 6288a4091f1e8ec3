#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hiersearch/embedding_store.hpp"
#include "hiersearch/model.hpp"

namespace hiersearch {

struct RankedResult {
  RecordId record_id = 0;
  std::size_t position = 0;  // offset in the database
  double combined = 0.0;
  double cosine_part = 0.0;
  double hierarchical_part = 0.0;
  NodeId leaf = 0;
};

/// Immutable scoring structure: reduced database vectors, their leaf
/// placement, cached norms and the leaf-to-leaf hierarchical distances.
class RetrievalIndex {
 public:
  /// Validates assignments against the model; recomputes the reduced
  /// vectors and norms. Throws on zero-norm reduced vectors.
  RetrievalIndex(HierarchyModel model, EmbeddingSet database, std::vector<NodeId> assignment);

  const HierarchyModel& model() const { return model_; }
  const EmbeddingSet& database() const { return database_; }
  const Eigen::MatrixXd& reduced() const { return reduced_; }
  const std::vector<NodeId>& leaf_assignment() const { return assignment_; }
  const Eigen::VectorXd& norms() const { return norms_; }
  std::size_t size() const { return database_.size(); }
  double leaf_distance(NodeId a, NodeId b) const {
    return leaf_distances_[static_cast<std::size_t>(a) * model_.tree.leaf_count() + b];
  }

 private:
  HierarchyModel model_;
  EmbeddingSet database_;
  Eigen::MatrixXd reduced_;  // r x N
  std::vector<NodeId> assignment_;
  Eigen::VectorXd norms_;
  std::vector<double> leaf_distances_;
};

/// Leaf with the smallest Mahalanobis distance; lowest leaf id on ties.
NodeId assign_leaf(std::span<const ClassGaussian> leaf_gaussians, const Eigen::VectorXd& x);
std::vector<NodeId> assign_leaves(std::span<const ClassGaussian> leaf_gaussians,
                                  const Eigen::MatrixXd& xs, unsigned threads = 1);

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

RetrievalIndex build_index(HierarchyModel model, EmbeddingSet database, unsigned threads = 1);

struct QueryOptions {
  std::size_t k = 10;
  double alpha = 3.0;
  /// Drops the database record with this id (leave-one-out evaluation).
  std::optional<RecordId> exclude_id;
};

struct QueryResponse {
  NodeId query_leaf = 0;
  std::vector<RankedResult> results;
};

/// Ranks the database by cosine distance plus alpha times hierarchical
/// distance, ascending; equal scores keep database order.
QueryResponse query_detailed(const RetrievalIndex& index, std::span<const float> q,
                             const QueryOptions& options);
std::vector<RankedResult> query(const RetrievalIndex& index, std::span<const float> q,
                                const QueryOptions& options);

/// Flat cosine ranking with no hierarchy, the baseline the combined score
/// degenerates to at alpha = 0.
std::vector<RankedResult> cosine_rank(const RetrievalIndex& index, std::span<const float> q,
                                      std::size_t k);

void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);

}  // namespace hiersearch
