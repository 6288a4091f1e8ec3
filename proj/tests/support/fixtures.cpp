#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace fixtures {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

hiersearch::EmbeddingSet random_set(std::uint64_t seed, std::size_t count, std::uint32_t dim,
                                    std::uint32_t classes) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal;
  std::uniform_int_distribution<std::uint32_t> label(0, classes - 1);
  hiersearch::EmbeddingSet set;
  set.dim = dim;
  for (std::size_t i = 0; i < count; ++i) {
    hiersearch::FeatureRecord rec;
    rec.id = static_cast<hiersearch::RecordId>(i);
    rec.label = label(rng);
    rec.vector.resize(dim);
    for (auto& v : rec.vector) v = normal(rng);
    set.records.push_back(std::move(rec));
  }
  return set;
}

hiersearch::EmbeddingSet three_class_line(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  const double means[3] = {0.0, 0.1, 10.0};
  hiersearch::EmbeddingSet set;
  set.dim = 1;
  hiersearch::RecordId id = 0;
  for (hiersearch::Label c = 0; c < 3; ++c) {
    for (int i = 0; i < 500; ++i) {
      set.records.push_back({id++, c, {static_cast<float>(means[c] + normal(rng))}});
    }
  }
  return set;
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index dim, double lo, double hi) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(lo, hi);
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd eig(dim);
  for (Eigen::Index i = 0; i < dim; ++i) eig[i] = uniform(rng);
  const Eigen::MatrixXd spd = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (spd + spd.transpose());
}

hiersearch::SynthConfig small_config(std::uint64_t seed) {
  hiersearch::SynthConfig c;
  c.seed = seed;
  c.dim = 8;
  c.groups = 3;
  c.classes_per_group = 3;
  c.samples_per_class = 60;
  c.database_per_class = 20;
  c.queries_per_class = 5;
  c.within_group_spread = 0.5;
  c.between_group_spread = 4.0;
  c.query_noise_std = 0.5;
  return c;
}

hiersearch::RetrievalIndex forced_ordering_index() {
  using namespace hiersearch;
  HierarchyModel model;
  model.pca.mean = Eigen::Vector2d::Zero();
  model.pca.components = Eigen::Matrix2d::Identity();
  model.pca.eigenvalues = Eigen::Vector2d::Ones();
  model.pca.total_variance = 2.0;
  model.pca.explained_fraction = 1.0;
  std::vector<HierarchyNode> nodes{
      {0, NodeId{2}, {}, {0}, 0, 0},
      {1, NodeId{2}, {}, {1}, 0, 0},
      {2, std::nullopt, {0, 1}, {0, 1}, 1, 1},
  };
  model.tree = HierarchyTree::from_nodes(std::move(nodes), 0.3, 0);
  model.leaf_gaussians.emplace_back(0, Eigen::Vector2d(0.8, 0.4), 0.05 * Eigen::Matrix2d::Identity(), 1);
  model.leaf_gaussians.emplace_back(1, Eigen::Vector2d(0.7, -0.714), 0.01 * Eigen::Matrix2d::Identity(), 1);

  EmbeddingSet db;
  db.dim = 2;
  db.records.push_back({1, 1, {0.7f, -static_cast<float>(std::sqrt(0.51))}});
  db.records.push_back({2, 0, {0.6f, 0.8f}});
  return build_index(std::move(model), std::move(db));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
