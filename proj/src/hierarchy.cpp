#include "hiersearch/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "hiersearch/error.hpp"
#include "parallel.hpp"

namespace hiersearch {

namespace {

void invalid(const std::string& what) { throw Error(ErrorKind::kValidation, "hierarchy: " + what); }

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // The smaller index becomes the representative, so components are keyed by
  // their lowest member.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& samples,
                               const std::vector<std::vector<Eigen::Index>>& columns_of_leaf,
                               const std::vector<Label>& members,
                               const std::unordered_map<Label, NodeId>& leaf_of) {
  Eigen::Index total = 0;
  for (Label m : members) total += static_cast<Eigen::Index>(columns_of_leaf[leaf_of.at(m)].size());
  Eigen::MatrixXd out(samples.rows(), total);
  Eigen::Index c = 0;
  for (Label m : members) {
    for (Eigen::Index col : columns_of_leaf[leaf_of.at(m)]) out.col(c++) = samples.col(col);
  }
  return out;
}

std::string escape_dot(const std::string& text) {
  std::string out;
  for (char ch : text) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  return out;
}

}  // namespace

HierarchyTree HierarchyTree::from_nodes(std::vector<HierarchyNode> nodes, double threshold,
                                        int levels_built) {
  if (nodes.empty()) invalid("tree has no nodes");
  HierarchyTree tree;
  tree.threshold_ = threshold;
  tree.levels_built_ = levels_built;
  const std::size_t n = nodes.size();

  std::optional<NodeId> root;
  bool leaves_done = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = nodes[i];
    if (node.id != i) invalid("node ids must be dense and ordered");
    if (node.is_leaf()) {
      if (leaves_done) invalid("leaves must occupy the lowest ids");
      if (node.members.size() != 1) invalid("leaf " + std::to_string(i) + " must have one member");
      if (node.height != 0 || node.level != 0) invalid("leaf " + std::to_string(i) + " must have height 0");
      if (!tree.leaf_labels_.empty() && node.members[0] <= tree.leaf_labels_.back()) {
        invalid("leaf labels must ascend with leaf id");
      }
      tree.leaf_labels_.push_back(node.members[0]);
      tree.leaf_of_label_[node.members[0]] = node.id;
    } else {
      leaves_done = true;
    }
    if (!node.parent) {
      if (root) invalid("more than one root");
      root = node.id;
    } else if (*node.parent >= n || *node.parent == node.id) {
      invalid("node " + std::to_string(i) + " has an invalid parent");
    }
  }
  if (!root) invalid("no root");

  for (const auto& node : nodes) {
    if (node.is_leaf()) continue;
    if (!std::is_sorted(node.children.begin(), node.children.end())) invalid("children must ascend");
    std::vector<Label> members;
    int height = 0;
    for (NodeId c : node.children) {
      if (c >= n || nodes[c].parent != node.id) {
        invalid("child " + std::to_string(c) + " of node " + std::to_string(node.id) +
                " does not point back to it");
      }
      members.insert(members.end(), nodes[c].members.begin(), nodes[c].members.end());
      height = std::max(height, nodes[c].height + 1);
    }
    std::sort(members.begin(), members.end());
    if (std::adjacent_find(members.begin(), members.end()) != members.end()) {
      invalid("children of node " + std::to_string(node.id) + " share members");
    }
    if (members != node.members) invalid("members of node " + std::to_string(node.id) + " mismatch children");
    if (height != node.height) invalid("height of node " + std::to_string(node.id) + " is inconsistent");
  }
  for (const auto& node : nodes) {
    if (!node.parent) continue;
    const auto& siblings = nodes[*node.parent].children;
    if (std::find(siblings.begin(), siblings.end(), node.id) == siblings.end()) {
      invalid("node " + std::to_string(node.id) + " is missing from its parent's children");
    }
  }

  // Breadth-first from the root; every node must be reached exactly once.
  tree.depth_.assign(n, -1);
  std::deque<NodeId> pending{*root};
  tree.depth_[*root] = 0;
  std::size_t reached = 0;
  while (!pending.empty()) {
    const NodeId id = pending.front();
    pending.pop_front();
    ++reached;
    for (NodeId c : nodes[id].children) {
      if (tree.depth_[c] != -1) invalid("cycle through node " + std::to_string(c));
      tree.depth_[c] = tree.depth_[id] + 1;
      pending.push_back(c);
    }
  }
  if (reached != n) invalid("tree is not connected");

  tree.root_ = *root;
  tree.nodes_ = std::move(nodes);
  return tree;
}

const HierarchyNode& HierarchyTree::node(NodeId id) const {
  if (id >= nodes_.size()) {
    throw Error(ErrorKind::kValidation, "unknown hierarchy node " + std::to_string(id));
  }
  return nodes_[id];
}

int HierarchyTree::depth(NodeId id) const {
  node(id);
  return depth_[id];
}

NodeId HierarchyTree::leaf_of_label(Label label) const {
  const auto it = leaf_of_label_.find(label);
  if (it == leaf_of_label_.end()) {
    throw Error(ErrorKind::kValidation, "label " + std::to_string(label) + " has no leaf");
  }
  return it->second;
}

Label HierarchyTree::label_of_leaf(NodeId leaf) const {
  if (leaf >= leaf_labels_.size()) {
    throw Error(ErrorKind::kValidation, "node " + std::to_string(leaf) + " is not a leaf");
  }
  return leaf_labels_[leaf];
}

HierarchyTree build_hierarchy(const Eigen::MatrixXd& samples, std::span<const Label> labels,
                              const HierarchyOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw Error(ErrorKind::kConfig, "threshold must lie in (0, 1)");
  }
  if (static_cast<std::size_t>(samples.cols()) != labels.size()) {
    throw Error(ErrorKind::kDimension, "sample and label counts differ");
  }
  if (labels.empty()) throw Error(ErrorKind::kInsufficientData, "no training vectors");

  std::vector<Label> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const std::size_t k = distinct.size();

  std::unordered_map<Label, NodeId> leaf_of;
  std::vector<HierarchyNode> nodes;
  for (std::size_t i = 0; i < k; ++i) {
    leaf_of[distinct[i]] = static_cast<NodeId>(i);
    HierarchyNode leaf;
    leaf.id = static_cast<NodeId>(i);
    leaf.members = {distinct[i]};
    nodes.push_back(std::move(leaf));
  }
  std::vector<std::vector<Eigen::Index>> columns_of_leaf(k);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    columns_of_leaf[leaf_of[labels[j]]].push_back(static_cast<Eigen::Index>(j));
  }

  std::vector<NodeId> current(k);
  std::iota(current.begin(), current.end(), 0);
  std::unordered_map<NodeId, ClassGaussian> fitted;
  int iteration = 0;

  while (current.size() > 1) {
    std::vector<NodeId> fresh;
    for (NodeId id : current) {
      if (!fitted.contains(id)) fresh.push_back(id);
    }
    std::vector<ClassGaussian> new_fits(fresh.size());
    detail::parallel_for(fresh.size(), options.threads, [&](std::size_t i) {
      const auto& node = nodes[fresh[i]];
      new_fits[i] = fit_gaussian(gather_columns(samples, columns_of_leaf, node.members, leaf_of),
                                 options.reg_epsilon, node.id);
    });
    for (std::size_t i = 0; i < fresh.size(); ++i) fitted.emplace(fresh[i], std::move(new_fits[i]));

    // Pairs of nodes that both survived the previous level unchanged were
    // already found below threshold; only pairs touching a new node can add
    // edges.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < current.size(); ++a) {
      const bool a_fresh = std::binary_search(fresh.begin(), fresh.end(), current[a]);
      for (std::size_t b = a + 1; b < current.size(); ++b) {
        if (a_fresh || std::binary_search(fresh.begin(), fresh.end(), current[b])) {
          pairs.emplace_back(a, b);
        }
      }
    }
    std::vector<char> overlapping(pairs.size(), 0);
    detail::parallel_for(pairs.size(), options.threads, [&](std::size_t p) {
      const auto& ga = fitted.at(current[pairs[p].first]);
      const auto& gb = fitted.at(current[pairs[p].second]);
      overlapping[p] = bhattacharyya_coefficient(ga, gb) >= options.threshold ? 1 : 0;
    });

    DisjointSets components(current.size());
    bool any_edge = false;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (overlapping[p]) {
        components.unite(pairs[p].first, pairs[p].second);
        any_edge = true;
      }
    }
    if (!any_edge) break;
    ++iteration;

    std::vector<std::vector<std::size_t>> groups(current.size());
    for (std::size_t i = 0; i < current.size(); ++i) groups[components.find(i)].push_back(i);

    std::vector<NodeId> next;
    for (const auto& group : groups) {
      if (group.empty()) continue;
      if (group.size() == 1) {
        next.push_back(current[group[0]]);
        continue;
      }
      HierarchyNode merged;
      merged.id = static_cast<NodeId>(nodes.size());
      merged.level = iteration;
      for (std::size_t i : group) {
        const NodeId child = current[i];
        merged.children.push_back(child);
        nodes[child].parent = merged.id;
        merged.members.insert(merged.members.end(), nodes[child].members.begin(),
                              nodes[child].members.end());
        merged.height = std::max(merged.height, nodes[child].height + 1);
      }
      std::sort(merged.children.begin(), merged.children.end());
      std::sort(merged.members.begin(), merged.members.end());
      next.push_back(merged.id);
      nodes.push_back(std::move(merged));
    }
    std::sort(next.begin(), next.end());
    current = std::move(next);
  }

  if (current.size() > 1) {
    HierarchyNode root;
    root.id = static_cast<NodeId>(nodes.size());
    root.level = iteration + 1;
    root.children = current;
    for (NodeId child : current) {
      nodes[child].parent = root.id;
      root.members.insert(root.members.end(), nodes[child].members.begin(),
                          nodes[child].members.end());
      root.height = std::max(root.height, nodes[child].height + 1);
    }
    std::sort(root.members.begin(), root.members.end());
    nodes.push_back(std::move(root));
  }
  return HierarchyTree::from_nodes(std::move(nodes), options.threshold, iteration);
}

HierarchyTree build_hierarchy(const EmbeddingSet& reduced, const HierarchyOptions& options) {
  if (!reduced.fully_labeled()) {
    throw Error(ErrorKind::kValidation, "training set must be labeled");
  }
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(reduced.dim),
                          static_cast<Eigen::Index>(reduced.size()));
  std::vector<Label> labels;
  labels.reserve(reduced.size());
  for (std::size_t j = 0; j < reduced.size(); ++j) {
    const auto& rec = reduced.records[j];
    for (std::uint32_t i = 0; i < reduced.dim; ++i) {
      samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rec.vector[i];
    }
    labels.push_back(*rec.label);
  }
  return build_hierarchy(samples, labels, options);
}

std::vector<ClassGaussian> fit_leaf_gaussians(const Eigen::MatrixXd& samples,
                                              std::span<const Label> labels,
                                              const HierarchyTree& tree, double reg_epsilon) {
  std::vector<std::vector<Eigen::Index>> columns(tree.leaf_count());
  for (std::size_t j = 0; j < labels.size(); ++j) {
    columns[tree.leaf_of_label(labels[j])].push_back(static_cast<Eigen::Index>(j));
  }
  std::vector<ClassGaussian> out;
  out.reserve(tree.leaf_count());
  for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    Eigen::MatrixXd block(samples.rows(), static_cast<Eigen::Index>(columns[leaf].size()));
    for (std::size_t c = 0; c < columns[leaf].size(); ++c) {
      block.col(static_cast<Eigen::Index>(c)) = samples.col(columns[leaf][c]);
    }
    out.push_back(fit_gaussian(block, reg_epsilon, static_cast<std::int64_t>(leaf)));
  }
  return out;
}

NodeId lca(const HierarchyTree& tree, NodeId a, NodeId b) {
  int da = tree.depth(a);
  int db = tree.depth(b);
  while (da > db) {
    a = *tree.node(a).parent;
    --da;
  }
  while (db > da) {
    b = *tree.node(b).parent;
    --db;
  }
  while (a != b) {
    a = *tree.node(a).parent;
    b = *tree.node(b).parent;
  }
  return a;
}

double hierarchical_distance(const HierarchyTree& tree, NodeId a, NodeId b) {
  if (!tree.node(a).is_leaf() || !tree.node(b).is_leaf()) {
    throw Error(ErrorKind::kValidation, "hierarchical distance is defined between leaves");
  }
  if (tree.height() == 0) return 0.0;
  return static_cast<double>(tree.node(lca(tree, a, b)).height) /
         static_cast<double>(tree.height());
}

std::vector<double> leaf_distance_table(const HierarchyTree& tree) {
  const std::size_t k = tree.leaf_count();
  std::vector<double> table(k * k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const double d =
          hierarchical_distance(tree, static_cast<NodeId>(a), static_cast<NodeId>(b));
      table[a * k + b] = d;
      table[b * k + a] = d;
    }
  }
  return table;
}

TreeFormat parse_tree_format(const std::string& name) {
  if (name == "json") return TreeFormat::kJson;
  if (name == "dot") return TreeFormat::kDot;
  throw Error(ErrorKind::kConfig, "unknown tree format '" + name + "'");
}

std::string export_tree(const HierarchyTree& tree, TreeFormat format,
                        const std::map<Label, std::string>& label_names) {
  if (format == TreeFormat::kJson) {
    nlohmann::json doc;
    doc["threshold"] = tree.threshold();
    doc["levels_built"] = tree.levels_built();
    auto& nodes = doc["nodes"] = nlohmann::json::array();
    for (const auto& node : tree.nodes()) {
      nlohmann::json entry;
      entry["id"] = node.id;
      entry["parent"] = node.parent ? nlohmann::json(*node.parent) : nlohmann::json(nullptr);
      entry["children"] = node.children;
      entry["members"] = node.members;
      entry["height"] = node.height;
      entry["level"] = node.level;
      nodes.push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
  }

  std::ostringstream out;
  out << "digraph hierarchy {\n";
  for (const auto& node : tree.nodes()) {
    std::string label;
    if (node.is_leaf()) {
      const auto it = label_names.find(node.members[0]);
      label = it != label_names.end() ? it->second : "class " + std::to_string(node.members[0]);
    } else {
      label = "node " + std::to_string(node.id) + " (h=" + std::to_string(node.height) + ")";
    }
    out << "  n" << node.id << " [label=\"" << escape_dot(label) << "\"];\n";
  }
  for (const auto& node : tree.nodes()) {
    for (NodeId c : node.children) out << "  n" << node.id << " -> n" << c << ";\n";
  }
  out << "}\n";
  return out.str();
}

HierarchyTree tree_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    std::vector<HierarchyNode> nodes;
    for (const auto& entry : doc.at("nodes")) {
      HierarchyNode node;
      node.id = entry.at("id").get<NodeId>();
      if (!entry.at("parent").is_null()) node.parent = entry.at("parent").get<NodeId>();
      node.children = entry.at("children").get<std::vector<NodeId>>();
      node.members = entry.at("members").get<std::vector<Label>>();
      node.height = entry.at("height").get<int>();
      node.level = entry.at("level").get<int>();
      nodes.push_back(std::move(node));
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const HierarchyNode& a, const HierarchyNode& b) { return a.id < b.id; });
    return HierarchyTree::from_nodes(std::move(nodes), doc.at("threshold").get<double>(),
                                     doc.value("levels_built", 0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("tree json: ") + e.what());
  }
}

}  // namespace hiersearch
