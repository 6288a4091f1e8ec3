#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hiersearch/embedding_store.hpp"
#include "hiersearch/retrieval.hpp"

namespace hiersearch {

/// AP@k = sum_{i<=k} rel_i * Precision@i / min(k, R).
double average_precision_at_k(std::span<const Label> retrieved_labels, Label query_label,
                              std::size_t k, std::size_t total_relevant);

struct EvalOptions {
  double alpha = 3.0;
  bool exclude_self = false;
  bool keep_per_query = false;
  unsigned threads = 1;
  double threshold = 0.0;  // echoed only
  double variance_target = 0.0;
  std::uint64_t seed = 0;
};

struct QueryAp {
  RecordId query_id = 0;
  std::vector<double> ap;  // parallel to EvalReport::ks
};

struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<double> map_at_k;
  std::vector<QueryAp> per_query;  // sorted by query id; empty unless requested
  std::size_t evaluated_queries = 0;
  std::size_t excluded_queries = 0;  // no relevant record in the database
  double alpha = 0.0;
  double threshold = 0.0;
  double variance_target = 0.0;
  std::uint64_t seed = 0;
};

/// One retrieval pass per query at max(ks); smaller k reuse the prefix.
/// Throws ErrorKind::kEmptyResult when every query is excluded.
EvalReport map_curve(const RetrievalIndex& index, const EmbeddingSet& queries,
                     std::span<const std::size_t> ks, const EvalOptions& options);

double map_at_k(const RetrievalIndex& index, const EmbeddingSet& queries, std::size_t k,
                const EvalOptions& options);

/// `k,map` with six decimals.
void write_map_csv(const EvalReport& report, std::ostream& out);
/// `query_id,k,ap` with six decimals.
void write_per_query_csv(const EvalReport& report, std::ostream& out);

}  // namespace hiersearch
