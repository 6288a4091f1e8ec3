#include "hiersearch/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "hiersearch/error.hpp"
#include "parallel.hpp"

namespace hiersearch {

double average_precision_at_k(std::span<const Label> retrieved_labels, Label query_label,
                              std::size_t k, std::size_t total_relevant) {
  if (k == 0) throw Error(ErrorKind::kConfig, "k must be positive");
  if (total_relevant == 0) {
    throw Error(ErrorKind::kValidation, "average precision needs at least one relevant record");
  }
  const std::size_t depth = std::min(k, retrieved_labels.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (retrieved_labels[i] != query_label) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(std::min(k, total_relevant));
}

EvalReport map_curve(const RetrievalIndex& index, const EmbeddingSet& queries,
                     std::span<const std::size_t> ks, const EvalOptions& options) {
  if (ks.empty()) throw Error(ErrorKind::kConfig, "at least one k is required");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw Error(ErrorKind::kConfig, "k values must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) throw Error(ErrorKind::kConfig, "k values must be strictly increasing");
  }
  const auto& database = index.database();
  if (!database.fully_labeled()) {
    throw Error(ErrorKind::kValidation, "evaluation needs a fully labeled database");
  }
  if (!queries.fully_labeled()) throw Error(ErrorKind::kValidation, "evaluation needs labeled queries");

  std::unordered_map<Label, std::size_t> relevant_count;
  std::unordered_map<RecordId, Label> database_label;
  for (const auto& rec : database.records) {
    ++relevant_count[*rec.label];
    database_label[rec.id] = *rec.label;
  }

  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  report.alpha = options.alpha;
  report.threshold = options.threshold;
  report.variance_target = options.variance_target;
  report.seed = options.seed;

  std::vector<const FeatureRecord*> ordered;
  ordered.reserve(queries.size());
  for (const auto& rec : queries.records) ordered.push_back(&rec);
  std::sort(ordered.begin(), ordered.end(),
            [](const FeatureRecord* a, const FeatureRecord* b) { return a->id < b->id; });

  // Queries run independently; the reduction below walks them in id order so
  // the result does not depend on the thread count.
  std::vector<std::optional<QueryAp>> rows(ordered.size());
  detail::parallel_for(ordered.size(), options.threads, [&](std::size_t n) {
    const FeatureRecord* q = ordered[n];
    const Label label = *q->label;
    std::size_t relevant = 0;
    if (const auto it = relevant_count.find(label); it != relevant_count.end()) relevant = it->second;
    QueryOptions qopts;
    qopts.k = ks.back();
    qopts.alpha = options.alpha;
    if (options.exclude_self) {
      qopts.exclude_id = q->id;
      if (const auto it = database_label.find(q->id); it != database_label.end() && it->second == label) {
        --relevant;
      }
    }
    if (relevant == 0) return;
    const auto results = query(index, q->vector, qopts);
    std::vector<Label> retrieved;
    retrieved.reserve(results.size());
    for (const auto& r : results) retrieved.push_back(*database.records[r.position].label);
    QueryAp row;
    row.query_id = q->id;
    row.ap.reserve(ks.size());
    for (std::size_t k : ks) row.ap.push_back(average_precision_at_k(retrieved, label, k, relevant));
    rows[n] = std::move(row);
  });

  std::vector<double> sums(ks.size(), 0.0);
  for (auto& row : rows) {
    if (!row) {
      ++report.excluded_queries;
      continue;
    }
    for (std::size_t i = 0; i < ks.size(); ++i) sums[i] += row->ap[i];
    ++report.evaluated_queries;
    if (options.keep_per_query) report.per_query.push_back(std::move(*row));
  }
  if (report.evaluated_queries == 0) {
    throw Error(ErrorKind::kEmptyResult, "no query has a relevant record in the database");
  }
  for (double s : sums) report.map_at_k.push_back(s / static_cast<double>(report.evaluated_queries));
  return report;
}

double map_at_k(const RetrievalIndex& index, const EmbeddingSet& queries, std::size_t k,
                const EvalOptions& options) {
  const std::size_t ks[] = {k};
  return map_curve(index, queries, ks, options).map_at_k.front();
}

void write_map_csv(const EvalReport& report, std::ostream& out) {
  out << "k,map\n";
  char buf[64];
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", report.ks[i], report.map_at_k[i]);
    out << buf;
  }
}

void write_per_query_csv(const EvalReport& report, std::ostream& out) {
  out << "query_id,k,ap\n";
  char buf[96];
  for (const auto& row : report.per_query) {
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%u,%zu,%.6f\n", row.query_id, report.ks[i], row.ap[i]);
      out << buf;
    }
  }
}

}  // namespace hiersearch
