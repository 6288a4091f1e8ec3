#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hiersearch {

using RecordId = std::uint32_t;
using Label = std::uint32_t;

/// Sentinel stored in HFV1 files for records without a class label.
inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

struct FeatureRecord {
  RecordId id = 0;
  std::optional<Label> label;
  std::vector<float> vector;

  bool operator==(const FeatureRecord&) const = default;
};

/// A labeled (or unlabeled) collection of d-dimensional embeddings.
///
/// Invariants are checked by `validate()`, which every loader calls: uniform
/// dimension, finite components, unique ids, and label-name coverage when
/// names are present.
struct EmbeddingSet {
  std::uint32_t dim = 0;
  std::vector<FeatureRecord> records;
  std::map<Label, std::string> label_names;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool fully_labeled() const;
  /// Distinct labels, ascending.
  std::vector<Label> labels() const;

  void validate() const;

  bool operator==(const EmbeddingSet&) const = default;
};

enum class FileFormat { kBinary, kCsv };

FileFormat parse_file_format(const std::string& name);
/// Binary unless the extension is `.csv`.
FileFormat format_from_extension(const std::filesystem::path& path);

EmbeddingSet load_embeddings(const std::filesystem::path& path, FileFormat format);
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     FileFormat format);

// Stream-level HFV1 codec, reused by the index container.
EmbeddingSet read_hfv1(std::istream& in);
void write_hfv1(const EmbeddingSet& set, std::ostream& out);

/// `<dir>/<stem>.labels.json` next to an embeddings file.
std::filesystem::path label_sidecar_path(const std::filesystem::path& path);
std::map<Label, std::string> load_label_names(const std::filesystem::path& path);
void save_label_names(const std::map<Label, std::string>& names,
                      const std::filesystem::path& path);

/// Groups vectors by class label. Throws if any record is unlabeled.
std::map<Label, std::vector<std::vector<float>>> split_by_label(const EmbeddingSet& set);

}  // namespace hiersearch
