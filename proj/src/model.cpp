#include "hiersearch/model.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "hiersearch/error.hpp"
#include "model_sections.hpp"

namespace hiersearch {

namespace {

constexpr std::uint32_t kConfigTag = detail::fourcc("CONF");
constexpr std::uint32_t kPcaTag = detail::fourcc("PCA ");
constexpr std::uint32_t kTreeTag = detail::fourcc("TREE");
constexpr std::uint32_t kGaussianTag = detail::fourcc("GAUS");
constexpr std::uint32_t kNamesTag = detail::fourcc("NAME");

std::istringstream section_stream(const detail::Container& c, std::uint32_t tag) {
  return std::istringstream(c.get(tag), std::ios::binary);
}

}  // namespace

const std::vector<Profile>& profiles() {
  static const std::vector<Profile> kProfiles{
      {"cub", 0.30, 3.0},
      {"cifar", 0.20, 5.0},
      {"diatom", 0.25, 3.0},
  };
  return kProfiles;
}

const Profile& find_profile(const std::string& name) {
  for (const auto& p : profiles()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorKind::kConfig, "unknown profile '" + name + "' (expected cub, cifar or diatom)");
}

void FitConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorKind::kConfig, "threshold must lie in (0, 1)");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorKind::kConfig, "alpha must be >= 0");
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw Error(ErrorKind::kConfig, "variance target must lie in (0, 1]");
  }
  if (!(reg_epsilon >= 0.0) || !std::isfinite(reg_epsilon)) {
    throw Error(ErrorKind::kConfig, "reg_epsilon must be >= 0");
  }
}

HierarchyModel fit_model(const EmbeddingSet& train, const FitConfig& config, unsigned threads) {
  config.validate();
  if (!train.fully_labeled()) throw Error(ErrorKind::kValidation, "training set must be labeled");

  HierarchyModel model;
  model.config = config;
  model.label_names = train.label_names;
  model.pca = fit_pca(train, config.variance_target);
  const Eigen::MatrixXd reduced = transform(model.pca, train);
  std::vector<Label> labels;
  labels.reserve(train.size());
  for (const auto& rec : train.records) labels.push_back(*rec.label);

  HierarchyOptions options;
  options.threshold = config.threshold;
  options.reg_epsilon = config.reg_epsilon;
  options.threads = threads;
  model.tree = build_hierarchy(reduced, labels, options);
  model.leaf_gaussians = fit_leaf_gaussians(reduced, labels, model.tree, config.reg_epsilon);
  return model;
}

namespace detail {

void add_model_sections(Container& container, const HierarchyModel& model) {
  {
    std::ostringstream out(std::ios::binary);
    write_f64(out, model.config.threshold);
    write_f64(out, model.config.alpha);
    write_f64(out, model.config.variance_target);
    write_f64(out, model.config.reg_epsilon);
    container.add(kConfigTag, out.str());
  }
  {
    const auto& pca = model.pca;
    std::ostringstream out(std::ios::binary);
    write_u32(out, static_cast<std::uint32_t>(pca.original_dim()));
    write_u32(out, static_cast<std::uint32_t>(pca.reduced_dim()));
    write_f64(out, pca.total_variance);
    write_f64(out, pca.explained_fraction);
    for (Eigen::Index i = 0; i < pca.mean.size(); ++i) write_f64(out, pca.mean[i]);
    for (Eigen::Index i = 0; i < pca.eigenvalues.size(); ++i) write_f64(out, pca.eigenvalues[i]);
    for (Eigen::Index r = 0; r < pca.components.rows(); ++r) {
      for (Eigen::Index c = 0; c < pca.components.cols(); ++c) write_f64(out, pca.components(r, c));
    }
    container.add(kPcaTag, out.str());
  }
  container.add(kTreeTag, export_tree(model.tree, TreeFormat::kJson));
  {
    std::ostringstream out(std::ios::binary);
    const auto dim = model.leaf_gaussians.empty() ? 0 : model.leaf_gaussians.front().dim();
    write_u32(out, static_cast<std::uint32_t>(model.leaf_gaussians.size()));
    write_u32(out, static_cast<std::uint32_t>(dim));
    for (const auto& g : model.leaf_gaussians) {
      write_u64(out, static_cast<std::uint64_t>(g.class_id()));
      write_u64(out, g.count());
      for (Eigen::Index i = 0; i < dim; ++i) write_f64(out, g.mu()[i]);
      for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) write_f64(out, g.sigma()(r, c));
      }
    }
    container.add(kGaussianTag, out.str());
  }
  if (!model.label_names.empty()) {
    nlohmann::json names = nlohmann::json::object();
    for (const auto& [label, name] : model.label_names) names[std::to_string(label)] = name;
    container.add(kNamesTag, names.dump());
  }
}

HierarchyModel read_model_sections(const Container& container) {
  HierarchyModel model;
  {
    auto in = section_stream(container, kConfigTag);
    model.config.threshold = read_f64(in, "config");
    model.config.alpha = read_f64(in, "config");
    model.config.variance_target = read_f64(in, "config");
    model.config.reg_epsilon = read_f64(in, "config");
    model.config.validate();
  }
  {
    auto in = section_stream(container, kPcaTag);
    const auto d = static_cast<Eigen::Index>(read_u32(in, "pca"));
    const auto r = static_cast<Eigen::Index>(read_u32(in, "pca"));
    if (d == 0 || r == 0 || r > d) throw Error(ErrorKind::kFormat, "pca section has bad shape");
    auto& pca = model.pca;
    pca.total_variance = read_f64(in, "pca");
    pca.explained_fraction = read_f64(in, "pca");
    pca.mean.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) pca.mean[i] = read_f64(in, "pca mean");
    pca.eigenvalues.resize(r);
    for (Eigen::Index i = 0; i < r; ++i) pca.eigenvalues[i] = read_f64(in, "pca eigenvalues");
    pca.components.resize(r, d);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) pca.components(i, j) = read_f64(in, "pca components");
    }
  }
  model.tree = tree_from_json(container.get(kTreeTag));
  {
    auto in = section_stream(container, kGaussianTag);
    const auto count = read_u32(in, "gaussians");
    const auto dim = static_cast<Eigen::Index>(read_u32(in, "gaussians"));
    if (count != model.tree.leaf_count()) {
      throw Error(ErrorKind::kFormat, "model has " + std::to_string(count) + " leaf Gaussians for " +
                                          std::to_string(model.tree.leaf_count()) + " leaves");
    }
    if (dim != model.pca.reduced_dim()) {
      throw Error(ErrorKind::kFormat, "leaf Gaussian dimension does not match the PCA model");
    }
    for (std::uint32_t k = 0; k < count; ++k) {
      const auto class_id = static_cast<std::int64_t>(read_u64(in, "gaussian id"));
      const auto n = read_u64(in, "gaussian count");
      Eigen::VectorXd mu(dim);
      for (Eigen::Index i = 0; i < dim; ++i) mu[i] = read_f64(in, "gaussian mean");
      Eigen::MatrixXd sigma(dim, dim);
      for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) sigma(r, c) = read_f64(in, "gaussian covariance");
      }
      model.leaf_gaussians.emplace_back(class_id, std::move(mu), std::move(sigma),
                                        static_cast<std::size_t>(n));
    }
  }
  if (container.has(kNamesTag)) {
    try {
      const auto names = nlohmann::json::parse(container.get(kNamesTag));
      for (const auto& [key, value] : names.items()) {
        model.label_names[static_cast<Label>(std::stoul(key))] = value.get<std::string>();
      }
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kFormat, std::string("label names section: ") + e.what());
    }
  }
  return model;
}

}  // namespace detail

void save_model(const HierarchyModel& model, const std::filesystem::path& path) {
  detail::Container container;
  container.magic = detail::kModelMagic;
  detail::add_model_sections(container, model);
  detail::write_container(container, path);
}

HierarchyModel load_model(const std::filesystem::path& path) {
  return detail::read_model_sections(detail::read_container(path, detail::kModelMagic));
}

}  // namespace hiersearch
