// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "hiersearch/evaluation.hpp"
#include "hiersearch/gaussian.hpp"
#include "hiersearch/hierarchy.hpp"
#include "hiersearch/model.hpp"
#include "hiersearch/pca.hpp"
#include "hiersearch/retrieval.hpp"
#include "hiersearch/synthetic.hpp"
#include "oracles.hpp"

using namespace hiersearch;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

ClassGaussian gaussian(Eigen::VectorXd mu, Eigen::MatrixXd sigma) {
  return ClassGaussian(0, std::move(mu), std::move(sigma), 1);
}

// Planted-hierarchy config shared by criteria 3, 4 and 7.
SynthConfig planted_config(std::uint64_t seed, double between_spread) {
  SynthConfig c;
  c.seed = seed;
  c.dim = 16;
  c.groups = 4;
  c.classes_per_group = 5;
  c.samples_per_class = 300;
  c.within_group_spread = 0.3;
  c.between_group_spread = between_spread;
  c.class_std = 1.0;
  return c;
}

Outcome bc_quadrature() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mean(-2.0, 2.0);
  std::uniform_real_distribution<double> var(0.2, 3.0);
  double worst_1d = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double ma = mean(rng), va = var(rng), mb = mean(rng), vb = var(rng);
    const double closed = bhattacharyya_coefficient(gaussian(Eigen::VectorXd::Constant(1, ma), Eigen::MatrixXd::Constant(1, 1, va)),
                                                     gaussian(Eigen::VectorXd::Constant(1, mb), Eigen::MatrixXd::Constant(1, 1, vb)));
    const double numeric = std::exp(-oracle::bhattacharyya_distance_1d_quadrature(ma, va, mb, vb));
    worst_1d = std::max(worst_1d, std::abs(closed - numeric));
  }
  double worst_2d = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Vector2d ma(mean(rng), mean(rng)), mb(mean(rng), mean(rng));
    const Eigen::Matrix2d ca = fixtures::random_spd(rng, 2, 0.3, 2.0);
    const Eigen::Matrix2d cb = fixtures::random_spd(rng, 2, 0.3, 2.0);
    const double closed = bhattacharyya_coefficient(gaussian(ma, ca), gaussian(mb, cb));
    const double numeric = oracle::bhattacharyya_coefficient_2d_grid(ma, ca, mb, cb);
    worst_2d = std::max(worst_2d, std::abs(closed - numeric));
  }
  const double elapsed = seconds_since(start);
  return {worst_1d <= 1e-6 && worst_2d <= 1e-4 && elapsed < 10.0,
          format("max |err| 1-D %.2e (tol 1e-6), 2-D %.2e (tol 1e-4), %.2f s (limit 10 s)", worst_1d,
                 worst_2d, elapsed)};
}

Outcome bc_identities() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  const auto random_g = [&](Eigen::Index dim) {
    Eigen::VectorXd mu(dim);
    for (Eigen::Index i = 0; i < dim; ++i) mu[i] = normal(rng);
    return gaussian(mu, fixtures::random_spd(rng, dim, 0.2, 3.0));
  };
  double self_err = 0.0, asym = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index dim = 1 + t % 8;
    const auto a = random_g(dim);
    const auto b = random_g(dim);
    self_err = std::max(self_err, std::abs(bhattacharyya_coefficient(a, a) - 1.0));
    asym = std::max(asym, std::abs(bhattacharyya_distance(a, b) - bhattacharyya_distance(b, a)));
  }
  const auto n0 = gaussian(Eigen::VectorXd::Constant(1, 0.0), Eigen::MatrixXd::Identity(1, 1));
  const auto n1 = gaussian(Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Identity(1, 1));
  const double d = bhattacharyya_distance(n0, n1);
  const double bc = bhattacharyya_coefficient(n0, n1);
  const bool pass = self_err <= 1e-12 && std::abs(d - 0.125) <= 1e-12 && std::abs(bc - 0.882497) <= 1e-6 &&
                    asym <= 1e-10;
  return {pass, format("|BC(g,g)-1| %.1e, D_B %.12f, BC %.6f, max asymmetry %.1e over 1000 pairs", self_err, d,
                       bc, asym)};
}

struct PlantedRun {
  std::vector<HierarchyTree> trees;
  int recovered = 0;
  int raw_recovered = 0;
  double min_sibling_bc = 1.0;
  double max_cross_bc = 0.0;
  double elapsed = 0.0;
};

PlantedRun planted_runs() {
  PlantedRun run;
  const auto start = Clock::now();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto data = generate(planted_config(seed, 5.0));
    const auto model = fit_model(data.train, FitConfig{});
    if (partition_agreement(model.tree, data.truth) == 1.0) ++run.recovered;
    run.trees.push_back(model.tree);

    // Post-hoc overlap of the leaf Gaussians in the reduced space.
    const auto& leaves = model.leaf_gaussians;
    for (std::size_t a = 0; a < leaves.size(); ++a) {
      for (std::size_t b = a + 1; b < leaves.size(); ++b) {
        const double bc = bhattacharyya_coefficient(leaves[a], leaves[b]);
        const bool siblings = data.truth.group_of_class.at(model.tree.label_of_leaf(static_cast<NodeId>(a))) ==
                              data.truth.group_of_class.at(model.tree.label_of_leaf(static_cast<NodeId>(b)));
        if (siblings) {
          run.min_sibling_bc = std::min(run.min_sibling_bc, bc);
        } else {
          run.max_cross_bc = std::max(run.max_cross_bc, bc);
        }
      }
    }
    // Same data without the projection step.
    if (partition_agreement(build_hierarchy(data.train), data.truth) == 1.0) ++run.raw_recovered;
  }
  run.elapsed = seconds_since(start);
  return run;
}

Outcome planted_recovery(const PlantedRun& run) {
  const bool separated = run.min_sibling_bc >= 0.3 && run.max_cross_bc < 0.3;
  return {run.recovered >= 19 && run.raw_recovered >= 19 && separated && run.elapsed < 60.0,
          format("ARI=1 in %d/20 seeds (16-D without projection: %d/20), min sibling BC %.3f, max cross-group "
                 "BC %.2e, %.1f s",
                 run.recovered, run.raw_recovered, run.min_sibling_bc, run.max_cross_bc, run.elapsed)};
}

Outcome ultrametric(const PlantedRun& run) {
  std::size_t violations = 0, triples = 0;
  for (const auto& tree : run.trees) {
    const auto k = static_cast<NodeId>(tree.leaf_count());
    for (NodeId a = 0; a < k; ++a) {
      if (hierarchical_distance(tree, a, a) != 0.0) ++violations;
      for (NodeId b = 0; b < k; ++b) {
        const double ab = hierarchical_distance(tree, a, b);
        if (ab != hierarchical_distance(tree, b, a) || ab < 0.0 || ab > 1.0) ++violations;
        for (NodeId c = 0; c < k; ++c) {
          ++triples;
          if (hierarchical_distance(tree, a, c) > std::max(ab, hierarchical_distance(tree, b, c))) ++violations;
        }
      }
    }
  }
  return {violations == 0 && !run.trees.empty(),
          format("%zu violations over %zu triples in %zu trees", violations, triples, run.trees.size())};
}

Outcome ranking_oracle() {
  SynthConfig c;
  c.seed = 5;
  c.dim = 16;
  c.groups = 5;
  c.classes_per_group = 2;
  c.samples_per_class = 200;
  c.database_per_class = 100;
  c.queries_per_class = 5;
  c.within_group_spread = 0.5;
  c.between_group_spread = 3.0;
  c.query_noise_std = 1.0;
  const auto data = generate(c);
  const auto index = build_index(fit_model(data.train, FitConfig{}), data.database);
  const oracle::BruteForceRanker brute(index);
  const std::size_t n = index.size();

  std::size_t order_mismatch = 0;
  double worst = 0.0;
  for (double alpha : {0.0, 1.0, 3.0, 5.0}) {
    QueryOptions opts;
    opts.k = n;
    opts.alpha = alpha;
    for (const auto& q : data.queries.records) {
      const auto got = query(index, q.vector, opts);
      const auto expected = brute.rank(q.vector, alpha, n);
      if (got.size() != expected.size()) {
        ++order_mismatch;
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].record_id != expected[i].id) ++order_mismatch;
        worst = std::max(worst, std::abs(got[i].combined - expected[i].combined));
      }
    }
  }
  std::size_t baseline_mismatch = 0;
  QueryOptions zero;
  zero.k = n;
  zero.alpha = 0.0;
  for (const auto& q : data.queries.records) {
    const auto a = query(index, q.vector, zero);
    const auto b = cosine_rank(index, q.vector, n);
    for (std::size_t i = 0; i < n; ++i) baseline_mismatch += a[i].record_id != b[i].record_id;
  }
  return {n == 1000 && data.queries.size() == 50 && order_mismatch == 0 && worst <= 1e-12 && baseline_mismatch == 0,
          format("N=%zu, %zu queries, full rankings at alpha 0/1/3/5: %zu order mismatches, max |dD| %.1e; "
                 "alpha=0 vs cosine sort: %zu mismatches",
                 n, data.queries.size(), order_mismatch, worst, baseline_mismatch)};
}

Outcome forced_ordering() {
  const auto index = fixtures::forced_ordering_index();
  QueryOptions opts;
  opts.k = 2;
  opts.alpha = 3.0;
  const auto with_hierarchy = query(index, fixtures::kForcedQuery, opts);
  opts.alpha = 0.0;
  const auto flat = query(index, fixtures::kForcedQuery, opts);
  const bool pass = with_hierarchy[0].record_id == 2 && flat[0].record_id == 1;
  return {pass, format("alpha=3 first id %u (D %.3f vs %.3f); alpha=0 first id %u (D %.3f vs %.3f)",
                       with_hierarchy[0].record_id, with_hierarchy[0].combined, with_hierarchy[1].combined,
                       flat[0].record_id, flat[0].combined, flat[1].combined)};
}

Outcome map_trend() {
  const double alpha = find_profile(kDefaultProfile).alpha;
  int wins = 0;
  double total = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto c = planted_config(seed, 2.0);
    c.query_noise_std = 1.5 * c.class_std;
    const auto data = generate(c);
    FitConfig fit;
    fit.threshold = find_profile(kDefaultProfile).threshold;
    fit.alpha = alpha;
    const auto index = build_index(fit_model(data.train, fit), data.database);
    EvalOptions opts;
    opts.alpha = alpha;
    const double with_hierarchy = map_at_k(index, data.queries, 10, opts);
    opts.alpha = 0.0;
    const double flat = map_at_k(index, data.queries, 10, opts);
    wins += with_hierarchy >= flat ? 1 : 0;
    total += with_hierarchy - flat;
    per_seed += format(" %+.3f", with_hierarchy - flat);
  }
  const double mean = total / 10.0;
  return {wins >= 8 && mean > 0.0,
          format("alpha=%g beats alpha=0 in %d/10 seeds, mean MAP@10 gain %+.4f (per seed:%s)", alpha, wins, mean,
                 per_seed.c_str())};
}

Outcome leaf_assignment() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  const int classes = 5;
  const Eigen::Index dim = 4;
  const double sigma = 1.0;
  std::vector<ClassGaussian> leaves;
  const auto planted_mean = [&](int c) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
    mu[c % dim] = 10.0 * sigma * (1 + c / dim);
    return mu;
  };
  const auto draw = [&](int c) {
    Eigen::VectorXd x = planted_mean(c);
    for (Eigen::Index i = 0; i < dim; ++i) x[i] += sigma * normal(rng);
    return x;
  };
  for (int c = 0; c < classes; ++c) {
    Eigen::MatrixXd train(dim, 200);
    for (int j = 0; j < 200; ++j) train.col(j) = draw(c);
    leaves.push_back(fit_gaussian(train, kDefaultRegEpsilon, c));
  }
  double min_gap = 1e300;
  for (int a = 0; a < classes; ++a) {
    for (int b = a + 1; b < classes; ++b) min_gap = std::min(min_gap, (planted_mean(a) - planted_mean(b)).norm());
  }
  int correct = 0;
  for (int c = 0; c < classes; ++c) {
    Eigen::MatrixXd xs(dim, 1000);
    for (int j = 0; j < 1000; ++j) xs.col(j) = draw(c);
    for (NodeId leaf : assign_leaves(leaves, xs)) correct += static_cast<int>(leaf) == c ? 1 : 0;
  }
  const double accuracy = correct / 5000.0;
  return {accuracy >= 0.99 && min_gap >= 10.0 * sigma,
          format("%.2f%% of 5000 draws assigned to their generator (min planted mean gap %.1f sigma)", 100.0 * accuracy,
                 min_gap / sigma)};
}

Outcome pca_rule() {
  const std::vector<double> spectrum_a{9, 0.5, 0.5};
  const std::vector<double> spectrum_b{1, 0, 0};
  const std::size_t ra = select_components(spectrum_a, 0.95);
  const std::size_t rb = select_components(spectrum_b, 0.95);

  // The same spectra realized as data: axis-aligned +/- pairs.
  Eigen::MatrixXd m(3, 6);
  m.setZero();
  m(0, 0) = std::sqrt(27.0);
  m(0, 1) = -std::sqrt(27.0);
  m(1, 2) = m(2, 4) = std::sqrt(1.5);
  m(1, 3) = m(2, 5) = -std::sqrt(1.5);
  const auto fitted_a = fit_pca(m, 0.95).reduced_dim();
  Eigen::MatrixXd line(3, 10);
  for (int j = 0; j < 10; ++j) line.col(j) = Eigen::Vector3d(2, -1, 0.5) * j;
  const auto fitted_b = fit_pca(line, 0.95).reduced_dim();

  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  double worst_margin = 1e300;
  for (double target : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    Eigen::MatrixXd x(24, 400);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng) * (1.0 + (i % 24));
    const auto model = fit_pca(x, target);
    const Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
    const Eigen::MatrixXd reduced = model.components * centered;
    const double explained = reduced.squaredNorm() / centered.squaredNorm();
    worst_margin = std::min(worst_margin, explained - target);
  }
  return {ra == 2 && rb == 1 && fitted_a == 2 && fitted_b == 1 && worst_margin >= -1e-9,
          format("{9,0.5,0.5}@0.95 -> %zu (fit %ld), {1,0,0}@0.95 -> %zu (fit %ld), min explained-minus-target %.2e",
                 ra, static_cast<long>(fitted_a), rb, static_cast<long>(fitted_b), worst_margin)};
}

// Structural check of the exported tree document.
bool tree_json_valid(const nlohmann::json& doc, std::string& why) {
  const auto is_int_array = [](const nlohmann::json& v) {
    return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_number_integer(); });
  };
  if (!doc.is_object() || !doc.contains("threshold") || !doc["threshold"].is_number()) {
    why = "threshold";
    return false;
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array() || doc["nodes"].empty()) {
    why = "nodes";
    return false;
  }
  std::size_t roots = 0;
  for (const auto& node : doc["nodes"]) {
    if (!node.is_object() || !node.contains("id") || !node["id"].is_number_integer() || !node.contains("parent") ||
        !(node["parent"].is_null() || node["parent"].is_number_integer()) || !node.contains("children") ||
        !is_int_array(node["children"]) || !node.contains("members") || !is_int_array(node["members"]) ||
        !node.contains("height") || !node["height"].is_number_integer() || !node.contains("level") ||
        !node["level"].is_number_integer()) {
      why = "node " + node.dump();
      return false;
    }
    roots += node["parent"].is_null() ? 1 : 0;
  }
  if (roots != 1) {
    why = "root count";
    return false;
  }
  return true;
}

Outcome determinism_and_formats() {
  fixtures::TempDir dir("hiersearch-accept");
  const auto data = generate(planted_config(3, 5.0));
  for (int run = 0; run < 3; ++run) {
    save_index(build_index(fit_model(data.train, FitConfig{}), data.database),
               dir / ("run" + std::to_string(run) + ".hidx"));
  }
  const auto first = fixtures::read_file(dir / "run0.hidx");
  const bool identical = !first.empty() && first == fixtures::read_file(dir / "run1.hidx") &&
                         first == fixtures::read_file(dir / "run2.hidx");

  std::size_t round_trips = 0, round_trip_ok = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto set = fixtures::random_set(seed, 1 + 50 * seed, static_cast<std::uint32_t>(1 + seed % 7), 6);
    if (seed % 4 == 0) set.records[0].label.reset();
    save_embeddings(set, dir / "rt.hfv", FileFormat::kBinary);
    ++round_trips;
    round_trip_ok += load_embeddings(dir / "rt.hfv", FileFormat::kBinary) == set ? 1 : 0;
  }

  std::string why;
  std::size_t schema_ok = 0;
  const std::vector<HierarchyTree> trees{
      fit_model(data.train, FitConfig{}).tree,
      build_hierarchy(fixtures::three_class_line()),
  };
  for (const auto& tree : trees) {
    schema_ok += tree_json_valid(nlohmann::json::parse(export_tree(tree, TreeFormat::kJson)), why) ? 1 : 0;
  }
  return {identical && round_trip_ok == round_trips && schema_ok == trees.size(),
          format("index bytes identical across 3 runs: %s (%zu bytes); HFV1 round trips %zu/%zu; tree JSON valid "
                 "%zu/%zu%s",
                 identical ? "yes" : "no", first.size(), round_trip_ok, round_trips, schema_ok, trees.size(),
                 why.empty() ? "" : (" (" + why + ")").c_str())};
}

Outcome performance() {
  // K = 100 classes in 64-D; a full variance target keeps all 64 components.
  SynthConfig c;
  c.seed = 11;
  c.dim = 64;
  c.groups = 20;
  c.classes_per_group = 5;
  c.samples_per_class = 500;
  c.database_per_class = 100;
  c.queries_per_class = 1;
  c.within_group_spread = 0.5;
  c.between_group_spread = 4.0;
  const auto data = generate(c);
  FitConfig fit;
  fit.variance_target = 1.0;

  auto start = Clock::now();
  auto model = fit_model(data.train, fit, 1);
  const double fit_seconds = seconds_since(start);
  start = Clock::now();
  const auto big = build_index(model, data.train, 1);
  const double build_seconds = seconds_since(start);

  const auto index = build_index(std::move(model), data.database, 1);
  QueryOptions opts;
  std::vector<double> times;
  for (const auto& q : data.queries.records) {
    start = Clock::now();
    const auto results = query(index, q.vector, opts);
    times.push_back(1000.0 * seconds_since(start));
    if (results.size() != opts.k) times.back() = 1e9;
  }
  std::sort(times.begin(), times.end());
  const double worst = times.back();
  const double median = times[times.size() / 2];
  const long r = static_cast<long>(index.model().pca.reduced_dim());
  const bool pass = r == 64 && index.size() == 10000 && big.size() == 50000 && worst < 50.0 &&
                    fit_seconds + build_seconds < 30.0;
  return {pass, format("r=%ld; query over N=%zu: median %.2f ms, max %.2f ms of %zu (limit 50 ms); fit on %zu "
                       "vectors %.2f s + index of %zu vectors %.2f s (limit 30 s), single-threaded",
                       r, index.size(), median, worst, times.size(), data.train.size(), fit_seconds, big.size(),
                       build_seconds)};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int number, const char* name, const std::function<Outcome()>& check) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += outcome.pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", outcome.pass ? "PASS" : "FAIL", number, name, outcome.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "Bhattacharyya closed form vs quadrature", bc_quadrature);
  report(2, "Bhattacharyya plug-in identities", bc_identities);
  PlantedRun planted;
  report(3, "planted hierarchy recovery", [&] {
    planted = planted_runs();
    return planted_recovery(planted);
  });
  report(4, "ultrametric hierarchical distance", [&] { return ultrametric(planted); });
  report(5, "ranking matches brute-force oracle", ranking_oracle);
  report(6, "forced ordering of the combined score", forced_ordering);
  report(7, "MAP@10 trend vs cosine baseline", map_trend);
  report(8, "leaf assignment accuracy", leaf_assignment);
  report(9, "PCA component rule", pca_rule);
  report(10, "determinism and file formats", determinism_and_formats);
  report(11, "performance floor", performance);

  std::printf("%s: %d of 11 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
