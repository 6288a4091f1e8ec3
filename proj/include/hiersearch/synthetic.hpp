#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hiersearch/embedding_store.hpp"
#include "hiersearch/hierarchy.hpp"

namespace hiersearch {

/// Gaussian-mixture generator with a planted two-level hierarchy.
///
/// Group centers are drawn as between_group_spread * N(0, I); each class mean
/// is its group center plus within_group_spread * N(0, I); samples are
/// class mean + class_std * N(0, I). Queries get an extra
/// query_noise_std * N(0, I).
///
/// Randomness comes from std::mt19937_64, one stream per (set, class) seeded
/// with splitmix64(seed ^ stream tag), and std::normal_distribution. Streams
/// are reproducible for a given standard library.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::uint32_t dim = 16;
  std::uint32_t groups = 4;
  std::uint32_t classes_per_group = 5;
  std::uint32_t samples_per_class = 300;
  std::uint32_t database_per_class = 50;
  std::uint32_t queries_per_class = 10;
  double within_group_spread = 0.3;
  double between_group_spread = 5.0;
  double class_std = 1.0;
  double query_noise_std = 0.0;

  void validate() const;
  std::uint32_t class_count() const { return groups * classes_per_group; }
};

struct PlantedTruth {
  std::map<Label, std::uint32_t> group_of_class;
  std::vector<std::vector<Label>> intended_partition;  // one block per group
  std::vector<std::vector<double>> class_means;        // indexed by label
};

struct SynthData {
  EmbeddingSet train;
  EmbeddingSet database;
  EmbeddingSet queries;
  PlantedTruth truth;
};

/// Ids are unique across the three sets: train first, then database, then
/// queries. Labels are g * classes_per_group + c.
SynthData generate(const SynthConfig& config);

std::string truth_to_json(const PlantedTruth& truth);
PlantedTruth truth_from_json(const std::string& text);

/// Hubert-Arabie adjusted Rand index of two labelings of the same items.
double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Blocks formed by the root's children, one block id per leaf label.
std::map<Label, std::uint32_t> top_level_partition(const HierarchyTree& tree);

/// ARI between the root-children partition of `tree` and the planted groups.
double partition_agreement(const HierarchyTree& tree, const PlantedTruth& truth);

}  // namespace hiersearch
