#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "hiersearch/embedding_store.hpp"
#include "hiersearch/model.hpp"
#include "hiersearch/retrieval.hpp"
#include "hiersearch/synthetic.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "hiersearch");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Labeled set of i.i.d. standard normal vectors with labels in [0, classes).
hiersearch::EmbeddingSet random_set(std::uint64_t seed, std::size_t count, std::uint32_t dim,
                                    std::uint32_t classes);

/// 1-D classes N(0, 0.01), N(0.1, 0.01), N(10, 0.01), 500 samples each.
hiersearch::EmbeddingSet three_class_line(std::uint64_t seed = 7);

/// Random SPD matrix with eigenvalues in [lo, hi].
Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index dim, double lo, double hi);

/// Small planted-hierarchy config: 3 groups of 3 classes in 8-D.
hiersearch::SynthConfig small_config(std::uint64_t seed);

/// Two-leaf model in the plane with identity projection. Query (1, 0) lands
/// in leaf 0; record 1 sits in leaf 1 at cosine distance 0.3 and record 2 in
/// leaf 0 at cosine distance 0.4.
hiersearch::RetrievalIndex forced_ordering_index();
inline const std::vector<float> kForcedQuery{1.0f, 0.0f};

std::string read_file(const std::filesystem::path& path);

}  // namespace fixtures
