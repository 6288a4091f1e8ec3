#include "hiersearch/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hiersearch/embedding_store.hpp"
#include "hiersearch/error.hpp"
#include "hiersearch/evaluation.hpp"
#include "hiersearch/model.hpp"
#include "hiersearch/retrieval.hpp"
#include "hiersearch/synthetic.hpp"

namespace hiersearch::cli {

namespace {

unsigned default_threads() {
  if (const char* env = std::getenv("HIERSEARCH_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

EmbeddingSet load_any(const std::string& path) {
  return load_embeddings(path, format_from_extension(path));
}

/// Writes to `path`, or to `fallback` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path);
}

struct FitArgs {
  std::string train;
  std::string out;
  std::string profile = kDefaultProfile;
  double threshold = 0.0;
  double alpha = 0.0;
  double variance_target = kDefaultVarianceTarget;
  double reg_epsilon = kDefaultRegEpsilon;
  unsigned threads = 1;
};

struct IndexArgs {
  std::string model;
  std::string database;
  std::string out;
  unsigned threads = 1;
};

struct QueryArgs {
  std::string index;
  std::string queries;
  std::size_t k = 10;
  double alpha = 0.0;
  std::string profile;
  std::string format = "text";
  std::string out;
  bool cosine_only = false;
  bool exclude_self = false;
};

struct EvalArgs {
  std::string index;
  std::string queries;
  std::vector<std::size_t> ks{1, 5, 10};
  double alpha = 0.0;
  std::string profile;
  std::string out;
  std::string per_query;
  bool exclude_self = false;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct SynthArgs {
  SynthConfig config;
  std::string out_dir;
  std::string format = "binary";
};

struct ExportArgs {
  std::string model;
  std::string index;
  std::string format = "json";
  std::string labels;
  std::string out;
};

int cmd_fit(const FitArgs& args, const CLI::App& app, std::ostream& out, std::ostream& err) {
  const auto& profile = find_profile(args.profile);
  FitConfig config;
  config.threshold = app.count("--threshold") ? args.threshold : profile.threshold;
  config.alpha = app.count("--alpha") ? args.alpha : profile.alpha;
  config.variance_target = args.variance_target;
  config.reg_epsilon = args.reg_epsilon;
  config.validate();

  const auto train = load_any(args.train);
  if (!train.fully_labeled()) throw Error(ErrorKind::kValidation, "training set must be labeled");
  const auto model = fit_model(train, config, args.threads);
  if (model.tree.leaf_count() == 1) {
    err << "warning: training set has a single class; hierarchical distances are all zero\n";
  }
  save_model(model, args.out);
  out << "classes: " << model.tree.leaf_count() << "\n"
      << "input_dim: " << model.pca.original_dim() << "\n"
      << "reduced_dim: " << model.pca.reduced_dim() << "\n"
      << "explained_variance: " << fmt("%.6f", model.pca.explained_fraction) << "\n"
      << "levels: " << model.tree.levels_built() << "\n"
      << "tree_height: " << model.tree.height() << "\n"
      << "nodes: " << model.tree.size() << "\n";
  return kExitOk;
}

int cmd_index(const IndexArgs& args, std::ostream& out) {
  auto model = load_model(args.model);
  auto database = load_any(args.database);
  const auto index = build_index(std::move(model), std::move(database), args.threads);
  save_index(index, args.out);

  std::map<NodeId, std::size_t> histogram;
  for (NodeId leaf : index.leaf_assignment()) ++histogram[leaf];
  out << "records: " << index.size() << "\n";
  for (const auto& [leaf, count] : histogram) {
    out << "leaf " << leaf << " (class " << index.model().tree.label_of_leaf(leaf) << "): " << count
        << "\n";
  }
  return kExitOk;
}

double resolve_alpha(const CLI::App& app, double flag_value, const std::string& profile,
                     const RetrievalIndex& index) {
  if (app.count("--alpha")) return flag_value;
  if (!profile.empty()) return find_profile(profile).alpha;
  return index.model().config.alpha;
}

int cmd_query(const QueryArgs& args, const CLI::App& app, std::ostream& out, std::ostream& err) {
  const auto index = load_index(args.index);
  const auto queries = load_any(args.queries);
  QueryOptions options;
  options.k = args.k;
  options.alpha = resolve_alpha(app, args.alpha, args.profile, index);
  if (!(options.alpha >= 0.0)) throw Error(ErrorKind::kConfig, "alpha must be >= 0");
  const bool json = args.format == "json";
  if (!json && args.format != "text") {
    throw Error(ErrorKind::kConfig, "query output format must be text or json");
  }

  nlohmann::json doc = nlohmann::json::array();
  std::ostringstream text;
  std::size_t failures = 0;
  for (const auto& q : queries.records) {
    if (args.exclude_self) options.exclude_id = q.id;
    QueryResponse response;
    try {
      if (args.cosine_only) {
        response.results = cosine_rank(index, q.vector, args.k);
      } else {
        response = query_detailed(index, q.vector, options);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kQuery) throw;
      ++failures;
      err << "query " << q.id << ": " << e.what() << "\n";
      if (json) {
        doc.push_back({{"query_id", q.id}, {"error", e.what()}});
      } else {
        text << "query " << q.id << " error: " << e.what() << "\n";
      }
      continue;
    }
    if (json) {
      nlohmann::json entry;
      entry["query_id"] = q.id;
      if (!args.cosine_only) entry["leaf"] = response.query_leaf;
      auto& results = entry["results"] = nlohmann::json::array();
      for (const auto& r : response.results) {
        results.push_back({{"id", r.record_id},
                           {"combined", r.combined},
                           {"cosine", r.cosine_part},
                           {"hierarchical", r.hierarchical_part},
                           {"leaf", r.leaf}});
      }
      doc.push_back(std::move(entry));
    } else {
      text << "query " << q.id;
      if (!args.cosine_only) text << " leaf " << response.query_leaf;
      text << "\n";
      for (std::size_t i = 0; i < response.results.size(); ++i) {
        const auto& r = response.results[i];
        text << "  " << (i + 1) << " " << r.record_id << " " << fmt("%.9g", r.combined) << " "
             << fmt("%.9g", r.cosine_part) << " " << fmt("%.9g", r.hierarchical_part) << " "
             << r.leaf << "\n";
      }
    }
  }
  emit(args.out, json ? doc.dump(2) + "\n" : text.str(), out);
  if (failures > 0) err << failures << " queries could not be processed\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& args, const CLI::App& app, std::ostream& out, std::ostream& err) {
  const auto index = load_index(args.index);
  const auto queries = load_any(args.queries);
  EvalOptions options;
  options.alpha = resolve_alpha(app, args.alpha, args.profile, index);
  options.exclude_self = args.exclude_self;
  options.keep_per_query = !args.per_query.empty();
  options.threshold = index.model().config.threshold;
  options.variance_target = index.model().config.variance_target;
  options.seed = args.seed;
  options.threads = args.threads;

  const auto report = map_curve(index, queries, args.ks, options);
  if (report.excluded_queries > 0) {
    err << "excluded " << report.excluded_queries << " queries with no relevant record\n";
  }
  std::ostringstream csv;
  write_map_csv(report, csv);
  if (!args.out.empty()) emit(args.out, csv.str(), out);
  if (!args.per_query.empty()) {
    std::ostringstream per_query;
    write_per_query_csv(report, per_query);
    emit(args.per_query, per_query.str(), out);
  }
  out << "queries: " << report.evaluated_queries << " alpha: " << fmt("%g", report.alpha) << "\n";
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    out << "MAP@" << report.ks[i] << " = " << fmt("%.6f", report.map_at_k[i]) << "\n";
  }
  return kExitOk;
}

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  const auto format = parse_file_format(args.format);
  const auto data = generate(args.config);
  const std::filesystem::path dir(args.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  const std::string ext = format == FileFormat::kCsv ? ".csv" : ".hfv";
  save_embeddings(data.train, dir / ("train" + ext), format);
  save_embeddings(data.database, dir / ("database" + ext), format);
  save_embeddings(data.queries, dir / ("queries" + ext), format);
  emit((dir / "truth.json").string(), truth_to_json(data.truth), out);
  out << "train: " << data.train.size() << " database: " << data.database.size()
      << " queries: " << data.queries.size() << " classes: " << args.config.class_count() << "\n";
  return kExitOk;
}

int cmd_export(const ExportArgs& args, std::ostream& out) {
  const auto format = parse_tree_format(args.format);
  std::optional<HierarchyModel> model;
  if (!args.model.empty()) {
    model = load_model(args.model);
  } else if (!args.index.empty()) {
    model = load_index(args.index).model();
  } else {
    throw Error(ErrorKind::kConfig, "export needs --model or --index");
  }
  auto names = model->label_names;
  if (!args.labels.empty()) names = load_label_names(args.labels);
  emit(args.out, export_tree(model->tree, format, names), out);
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNumerical: return kExitNumerical;
    case ErrorKind::kEmptyResult: return kExitEmptyResult;
    case ErrorKind::kIo: return kExitFailure;
    default: return kExitUsage;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchy-aware embedding retrieval"};
  app.name("hiersearch");
  app.require_subcommand(1);
  const unsigned threads = default_threads();

  FitArgs fit;
  fit.threads = threads;
  auto* fit_cmd = app.add_subcommand("fit", "Fit PCA, class Gaussians and the overlap hierarchy");
  fit_cmd->add_option("--train", fit.train, "Labeled training embeddings")->required();
  fit_cmd->add_option("--out", fit.out, "Model file to write")->required();
  fit_cmd->add_option("--profile", fit.profile, "Preset threshold/alpha: cub, cifar or diatom");
  fit_cmd->add_option("--threshold", fit.threshold, "Overlap threshold on the Bhattacharyya coefficient");
  fit_cmd->add_option("--alpha", fit.alpha, "Default hierarchy weight stored in the model");
  fit_cmd->add_option("--variance-target", fit.variance_target, "PCA retained variance fraction");
  fit_cmd->add_option("--reg-epsilon", fit.reg_epsilon, "Relative covariance ridge");
  fit_cmd->add_option("--threads", fit.threads, "Worker threads");

  IndexArgs index;
  index.threads = threads;
  auto* index_cmd = app.add_subcommand("index", "Place database embeddings in the hierarchy");
  index_cmd->add_option("--model", index.model, "Model file from `fit`")->required();
  index_cmd->add_option("--database", index.database, "Database embeddings")->required();
  index_cmd->add_option("--out", index.out, "Index file to write")->required();
  index_cmd->add_option("--threads", index.threads, "Worker threads");

  QueryArgs query_args;
  auto* query_cmd = app.add_subcommand("query", "Rank the database for each query vector");
  query_cmd->add_option("--index", query_args.index, "Index file")->required();
  query_cmd->add_option("--queries", query_args.queries, "Query embeddings")->required();
  query_cmd->add_option("--k", query_args.k, "Results per query");
  query_cmd->add_option("--alpha", query_args.alpha, "Hierarchy weight (default: model's)");
  query_cmd->add_option("--profile", query_args.profile, "Take alpha from a preset");
  query_cmd->add_option("--format", query_args.format, "Output format: text or json");
  query_cmd->add_option("--out", query_args.out, "Output file (default stdout)");
  query_cmd->add_flag("--cosine-only", query_args.cosine_only, "Plain cosine ranking baseline");
  query_cmd->add_flag("--exclude-self", query_args.exclude_self, "Skip database records sharing the query id");

  EvalArgs eval;
  eval.threads = threads;
  auto* eval_cmd = app.add_subcommand("eval", "MAP@k curve over a labeled query set");
  eval_cmd->add_option("--index", eval.index, "Index file")->required();
  eval_cmd->add_option("--queries", eval.queries, "Labeled query embeddings")->required();
  eval_cmd->add_option("--ks", eval.ks, "Comma separated k values")->delimiter(',');
  eval_cmd->add_option("--k", eval.ks, "Single k value")->excludes("--ks");
  eval_cmd->add_option("--alpha", eval.alpha, "Hierarchy weight (default: model's)");
  eval_cmd->add_option("--profile", eval.profile, "Take alpha from a preset");
  eval_cmd->add_option("--out", eval.out, "CSV file for k,map");
  eval_cmd->add_option("--per-query", eval.per_query, "CSV file for query_id,k,ap");
  eval_cmd->add_flag("--exclude-self", eval.exclude_self, "Leave-one-out: skip the query's own id");
  eval_cmd->add_option("--seed", eval.seed, "Echoed into the report");
  eval_cmd->add_option("--threads", eval.threads, "Worker threads");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-hierarchy dataset");
  synth_cmd->add_option("--seed", synth.config.seed, "RNG seed")->required();
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--format", synth.format, "binary or csv");
  synth_cmd->add_option("--dim", synth.config.dim);
  synth_cmd->add_option("--groups", synth.config.groups);
  synth_cmd->add_option("--classes-per-group", synth.config.classes_per_group);
  synth_cmd->add_option("--samples-per-class", synth.config.samples_per_class);
  synth_cmd->add_option("--database-per-class", synth.config.database_per_class);
  synth_cmd->add_option("--queries-per-class", synth.config.queries_per_class);
  synth_cmd->add_option("--within-spread", synth.config.within_group_spread);
  synth_cmd->add_option("--between-spread", synth.config.between_group_spread);
  synth_cmd->add_option("--class-std", synth.config.class_std);
  synth_cmd->add_option("--query-noise", synth.config.query_noise_std);

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export", "Write the hierarchy as JSON or DOT");
  export_cmd->add_option("--model", export_args.model, "Model file");
  export_cmd->add_option("--index", export_args.index, "Index file (alternative to --model)");
  export_cmd->add_option("--format", export_args.format, "json or dot");
  export_cmd->add_option("--labels", export_args.labels, "Label names sidecar");
  export_cmd->add_option("--out", export_args.out, "Output file (default stdout)");

  std::vector<std::string> storage{"hiersearch"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, *fit_cmd, out, err);
    if (*index_cmd) return cmd_index(index, out);
    if (*query_cmd) return cmd_query(query_args, *query_cmd, out, err);
    if (*eval_cmd) return cmd_eval(eval, *eval_cmd, out, err);
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*export_cmd) return cmd_export(export_args, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hiersearch::cli
