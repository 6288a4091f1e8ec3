#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hiersearch/embedding_store.hpp"
#include "hiersearch/gaussian.hpp"
#include "hiersearch/hierarchy.hpp"
#include "hiersearch/pca.hpp"

namespace hiersearch {

/// Tuned (threshold, alpha) pairs for the three reference dataset shapes.
struct Profile {
  std::string name;
  double threshold;
  double alpha;
};

const std::vector<Profile>& profiles();
/// Throws ErrorKind::kConfig for an unknown name.
const Profile& find_profile(const std::string& name);
inline constexpr const char* kDefaultProfile = "cub";

struct FitConfig {
  double threshold = 0.30;
  double alpha = 3.0;
  double variance_target = kDefaultVarianceTarget;
  double reg_epsilon = kDefaultRegEpsilon;

  void validate() const;
  bool operator==(const FitConfig&) const = default;
};

/// Everything fitted from the training set: the projection, the class
/// hierarchy and the leaf Gaussians used to place new vectors.
struct HierarchyModel {
  PcaModel pca;
  HierarchyTree tree;
  std::vector<ClassGaussian> leaf_gaussians;  // indexed by leaf id
  FitConfig config;
  std::map<Label, std::string> label_names;
};

HierarchyModel fit_model(const EmbeddingSet& train, const FitConfig& config, unsigned threads = 1);

void save_model(const HierarchyModel& model, const std::filesystem::path& path);
HierarchyModel load_model(const std::filesystem::path& path);

}  // namespace hiersearch
