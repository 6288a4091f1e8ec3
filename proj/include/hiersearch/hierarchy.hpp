#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hiersearch/embedding_store.hpp"
#include "hiersearch/gaussian.hpp"

namespace hiersearch {

using NodeId = std::uint32_t;

struct HierarchyNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;  // ascending
  std::vector<Label> members;    // original class labels, ascending
  int level = 0;                 // 0 for leaves, creation iteration otherwise
  int height = 0;                // edges on the longest downward path

  bool is_leaf() const { return children.empty(); }
  bool operator==(const HierarchyNode&) const = default;
};

/// Rooted tree over K leaf classes. Node ids are dense: leaves take
/// 0..K-1 in ascending label order, merged nodes follow in creation order.
class HierarchyTree {
 public:
  HierarchyTree() = default;

  /// Checks structural invariants and precomputes depths; throws
  /// ErrorKind::kValidation on a malformed node list.
  static HierarchyTree from_nodes(std::vector<HierarchyNode> nodes, double threshold,
                                  int levels_built);

  const std::vector<HierarchyNode>& nodes() const { return nodes_; }
  const HierarchyNode& node(NodeId id) const;
  NodeId root() const { return root_; }
  std::size_t leaf_count() const { return leaf_labels_.size(); }
  std::size_t size() const { return nodes_.size(); }
  int height() const { return nodes_.empty() ? 0 : nodes_[root_].height; }
  double threshold() const { return threshold_; }
  int levels_built() const { return levels_built_; }
  int depth(NodeId id) const;

  NodeId leaf_of_label(Label label) const;
  Label label_of_leaf(NodeId leaf) const;
  /// Labels of the leaves, indexed by leaf id.
  const std::vector<Label>& leaf_labels() const { return leaf_labels_; }

  bool operator==(const HierarchyTree&) const = default;

 private:
  std::vector<HierarchyNode> nodes_;
  std::vector<int> depth_;
  std::vector<Label> leaf_labels_;
  std::map<Label, NodeId> leaf_of_label_;
  NodeId root_ = 0;
  double threshold_ = 0.0;
  int levels_built_ = 0;
};

struct HierarchyOptions {
  double threshold = 0.30;
  double reg_epsilon = kDefaultRegEpsilon;
  unsigned threads = 1;
};

/// Bottom-up overlap merging. At each level every current top-level node is
/// refit from the raw vectors of its member classes, nodes joined by an edge
/// wherever BC >= threshold, and each connected component of two or more
/// nodes becomes one new parent. Stops when no edge remains or one node is
/// left; survivors are gathered under a synthetic root.
///
/// `samples` holds one column per training vector (already reduced);
/// `labels[j]` is the class of column j.
HierarchyTree build_hierarchy(const Eigen::MatrixXd& samples, std::span<const Label> labels,
                              const HierarchyOptions& options = {});
HierarchyTree build_hierarchy(const EmbeddingSet& reduced, const HierarchyOptions& options = {});

/// Level-0 Gaussians, indexed by leaf id.
std::vector<ClassGaussian> fit_leaf_gaussians(const Eigen::MatrixXd& samples,
                                              std::span<const Label> labels,
                                              const HierarchyTree& tree, double reg_epsilon);

NodeId lca(const HierarchyTree& tree, NodeId a, NodeId b);

/// height(lca(a, b)) / height(root) for two leaves; 0 for a single-leaf tree.
double hierarchical_distance(const HierarchyTree& tree, NodeId a, NodeId b);

/// Dense leaf x leaf table of hierarchical distances, row-major.
std::vector<double> leaf_distance_table(const HierarchyTree& tree);

enum class TreeFormat { kJson, kDot };

TreeFormat parse_tree_format(const std::string& name);

std::string export_tree(const HierarchyTree& tree, TreeFormat format,
                        const std::map<Label, std::string>& label_names = {});
/// Inverse of the JSON export.
HierarchyTree tree_from_json(const std::string& text);

}  // namespace hiersearch
