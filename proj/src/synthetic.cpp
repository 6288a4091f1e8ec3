#include "hiersearch/synthetic.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "hiersearch/error.hpp"

namespace hiersearch {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { kCenters = 1, kMeans = 2, kTrain = 3, kDatabase = 4, kQueries = 5 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  const std::uint64_t tag = (static_cast<std::uint64_t>(stream) << 56) ^ index;
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ tag));
}

std::vector<double> gaussian_vector(std::mt19937_64& rng, std::uint32_t dim, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = scale * normal(rng);
  return v;
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

void SynthConfig::validate() const {
  if (dim == 0) throw Error(ErrorKind::kConfig, "dim must be positive");
  if (groups == 0 || classes_per_group == 0 || class_count() < 2) {
    throw Error(ErrorKind::kConfig, "need at least 2 classes in total");
  }
  if (samples_per_class == 0) throw Error(ErrorKind::kConfig, "samples_per_class must be positive");
  if (!(within_group_spread > 0.0)) throw Error(ErrorKind::kConfig, "within-group spread must be > 0");
  if (!(between_group_spread > within_group_spread)) {
    throw Error(ErrorKind::kConfig, "between-group spread must exceed within-group spread");
  }
  if (!(class_std > 0.0)) throw Error(ErrorKind::kConfig, "class_std must be > 0");
  if (!(query_noise_std >= 0.0)) throw Error(ErrorKind::kConfig, "query_noise_std must be >= 0");
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  const std::uint32_t k = config.class_count();
  const std::uint32_t dim = config.dim;

  std::vector<std::vector<double>> means(k);
  {
    auto center_rng = stream_rng(config.seed, Stream::kCenters, 0);
    for (std::uint32_t g = 0; g < config.groups; ++g) {
      const auto center = gaussian_vector(center_rng, dim, config.between_group_spread);
      for (std::uint32_t c = 0; c < config.classes_per_group; ++c) {
        const Label label = g * config.classes_per_group + c;
        auto rng = stream_rng(config.seed, Stream::kMeans, label);
        auto offset = gaussian_vector(rng, dim, config.within_group_spread);
        for (std::uint32_t i = 0; i < dim; ++i) offset[i] += center[i];
        means[label] = std::move(offset);
      }
    }
  }

  SynthData data;
  RecordId next_id = 0;
  const auto fill = [&](EmbeddingSet& set, Stream stream, std::uint32_t per_class, double extra_noise) {
    set.dim = dim;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Label label = 0; label < k; ++label) {
      auto rng = stream_rng(config.seed, stream, label);
      for (std::uint32_t s = 0; s < per_class; ++s) {
        FeatureRecord rec;
        rec.id = next_id++;
        rec.label = label;
        rec.vector.resize(dim);
        for (std::uint32_t i = 0; i < dim; ++i) {
          double x = means[label][i] + config.class_std * normal(rng);
          if (extra_noise > 0.0) x += extra_noise * normal(rng);
          rec.vector[i] = static_cast<float>(x);
        }
        set.records.push_back(std::move(rec));
      }
    }
  };
  fill(data.train, Stream::kTrain, config.samples_per_class, 0.0);
  fill(data.database, Stream::kDatabase, config.database_per_class, 0.0);
  fill(data.queries, Stream::kQueries, config.queries_per_class, config.query_noise_std);

  data.truth.class_means = means;
  data.truth.intended_partition.resize(config.groups);
  for (Label label = 0; label < k; ++label) {
    const std::uint32_t g = label / config.classes_per_group;
    data.truth.group_of_class[label] = g;
    data.truth.intended_partition[g].push_back(label);
  }
  return data;
}

std::string truth_to_json(const PlantedTruth& truth) {
  nlohmann::json doc;
  auto& map = doc["group_of_class"] = nlohmann::json::object();
  for (const auto& [label, group] : truth.group_of_class) map[std::to_string(label)] = group;
  doc["groups"] = truth.intended_partition;
  doc["class_means"] = truth.class_means;
  return doc.dump(2) + "\n";
}

PlantedTruth truth_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    PlantedTruth truth;
    for (const auto& [key, value] : doc.at("group_of_class").items()) {
      truth.group_of_class[static_cast<Label>(std::stoul(key))] = value.get<std::uint32_t>();
    }
    truth.intended_partition = doc.at("groups").get<std::vector<std::vector<Label>>>();
    if (doc.contains("class_means")) {
      truth.class_means = doc.at("class_means").get<std::vector<std::vector<double>>>();
    }
    return truth;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("truth json: ") + e.what());
  }
}

double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kValidation, "partitions cover different items");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> joint;
  std::map<std::uint32_t, double> rows;
  std::map<std::uint32_t, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [key, count] : joint) index += choose2(count);
  double sum_rows = 0.0;
  for (const auto& [key, count] : rows) sum_rows += choose2(count);
  double sum_cols = 0.0;
  for (const auto& [key, count] : cols) sum_cols += choose2(count);
  const double expected = sum_rows * sum_cols / choose2(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::map<Label, std::uint32_t> top_level_partition(const HierarchyTree& tree) {
  std::map<Label, std::uint32_t> block_of;
  const auto& root = tree.node(tree.root());
  if (root.is_leaf()) {
    block_of[root.members[0]] = 0;
    return block_of;
  }
  for (std::size_t b = 0; b < root.children.size(); ++b) {
    for (Label m : tree.node(root.children[b]).members) block_of[m] = static_cast<std::uint32_t>(b);
  }
  return block_of;
}

double partition_agreement(const HierarchyTree& tree, const PlantedTruth& truth) {
  const auto blocks = top_level_partition(tree);
  if (blocks.size() != truth.group_of_class.size()) {
    throw Error(ErrorKind::kValidation, "tree leaves and planted classes differ");
  }
  std::vector<std::uint32_t> found;
  std::vector<std::uint32_t> planted;
  for (const auto& [label, block] : blocks) {
    const auto it = truth.group_of_class.find(label);
    if (it == truth.group_of_class.end()) {
      throw Error(ErrorKind::kValidation, "tree leaf label " + std::to_string(label) +
                                              " is not in the planted truth");
    }
    found.push_back(block);
    planted.push_back(it->second);
  }
  return adjusted_rand_index(found, planted);
}

}  // namespace hiersearch
