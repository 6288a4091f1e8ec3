#include "hiersearch/embedding_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "hiersearch/error.hpp"

namespace hiersearch {

namespace {

constexpr std::uint32_t kHfv1Magic = detail::fourcc("HFV1");
constexpr std::uint32_t kHfv1Version = 1;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') {
    fields.back().pop_back();
  }
  return fields;
}

template <typename T>
bool parse_number(const std::string& text, T& value) {
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

EmbeddingSet read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::kFormat, "csv: missing header");
  }
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw Error(ErrorKind::kFormat, "csv: header must be id,label,f0,...");
  }
  EmbeddingSet set;
  set.dim = static_cast<std::uint32_t>(header.size() - 2);
  for (std::uint32_t j = 0; j < set.dim; ++j) {
    if (header[j + 2] != "f" + std::to_string(j)) {
      throw Error(ErrorKind::kFormat, "csv: unexpected column name '" + header[j + 2] + "'");
    }
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::kDimension, "csv line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    }
    FeatureRecord rec;
    if (!parse_number(fields[0], rec.id)) {
      throw Error(ErrorKind::kFormat, "csv line " + std::to_string(line_no) + ": bad id");
    }
    if (!fields[1].empty()) {
      Label label = 0;
      if (!parse_number(fields[1], label) || label == kUnlabeled) {
        throw Error(ErrorKind::kFormat, "csv line " + std::to_string(line_no) + ": bad label");
      }
      rec.label = label;
    }
    rec.vector.resize(set.dim);
    for (std::uint32_t j = 0; j < set.dim; ++j) {
      if (!parse_number(fields[j + 2], rec.vector[j])) {
        throw Error(ErrorKind::kFormat, "csv line " + std::to_string(line_no) +
                                            ": bad value in column f" + std::to_string(j));
      }
    }
    set.records.push_back(std::move(rec));
  }
  return set;
}

void write_csv(const EmbeddingSet& set, std::ostream& out) {
  out << "id,label";
  for (std::uint32_t j = 0; j < set.dim; ++j) out << ",f" << j;
  out << '\n';
  char buf[32];
  for (const auto& rec : set.records) {
    out << rec.id << ',';
    if (rec.label) out << *rec.label;
    for (float v : rec.vector) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace

bool EmbeddingSet::fully_labeled() const {
  return std::all_of(records.begin(), records.end(),
                     [](const FeatureRecord& r) { return r.label.has_value(); });
}

std::vector<Label> EmbeddingSet::labels() const {
  std::set<Label> distinct;
  for (const auto& r : records) {
    if (r.label) distinct.insert(*r.label);
  }
  return {distinct.begin(), distinct.end()};
}

void EmbeddingSet::validate() const {
  if (dim == 0) throw Error(ErrorKind::kFormat, "embedding dimension must be positive");
  std::unordered_set<RecordId> seen;
  seen.reserve(records.size());
  for (const auto& r : records) {
    if (r.vector.size() != dim) {
      throw Error(ErrorKind::kDimension, "record " + std::to_string(r.id) + " has dimension " +
                                             std::to_string(r.vector.size()) + ", expected " +
                                             std::to_string(dim));
    }
    for (float v : r.vector) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kValidation,
                    "record " + std::to_string(r.id) + " has a non-finite component");
      }
    }
    if (!seen.insert(r.id).second) {
      throw Error(ErrorKind::kValidation, "duplicate record id " + std::to_string(r.id));
    }
    if (r.label && *r.label == kUnlabeled) {
      throw Error(ErrorKind::kValidation, "record " + std::to_string(r.id) +
                                              " uses the reserved unlabeled sentinel as a label");
    }
    if (r.label && !label_names.empty() && !label_names.contains(*r.label)) {
      throw Error(ErrorKind::kValidation,
                  "label " + std::to_string(*r.label) + " has no entry in the label names");
    }
  }
}

FileFormat parse_file_format(const std::string& name) {
  if (name == "binary" || name == "hfv1") return FileFormat::kBinary;
  if (name == "csv") return FileFormat::kCsv;
  throw Error(ErrorKind::kConfig, "unknown embeddings format '" + name + "'");
}

FileFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? FileFormat::kCsv : FileFormat::kBinary;
}

EmbeddingSet read_hfv1(std::istream& in) {
  if (detail::read_u32(in, "HFV1 magic") != kHfv1Magic) {
    throw Error(ErrorKind::kFormat, "bad magic, expected HFV1");
  }
  const auto version = detail::read_u32(in, "HFV1 version");
  if (version != kHfv1Version) {
    throw Error(ErrorKind::kFormat, "unsupported HFV1 version " + std::to_string(version));
  }
  const auto count = detail::read_u32(in, "HFV1 count");
  EmbeddingSet set;
  set.dim = detail::read_u32(in, "HFV1 dim");
  if (set.dim == 0) throw Error(ErrorKind::kFormat, "HFV1 dimension must be positive");
  set.records.reserve(std::min<std::uint32_t>(count, 1u << 20));
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureRecord rec;
    rec.id = detail::read_u32(in, "record id");
    const auto label = detail::read_u32(in, "record label");
    if (label != kUnlabeled) rec.label = label;
    rec.vector.resize(set.dim);
    for (auto& v : rec.vector) v = detail::read_f32(in, "record vector");
    set.records.push_back(std::move(rec));
  }
  return set;
}

void write_hfv1(const EmbeddingSet& set, std::ostream& out) {
  detail::write_u32(out, kHfv1Magic);
  detail::write_u32(out, kHfv1Version);
  detail::write_u32(out, static_cast<std::uint32_t>(set.records.size()));
  detail::write_u32(out, set.dim);
  for (const auto& rec : set.records) {
    detail::write_u32(out, rec.id);
    detail::write_u32(out, rec.label.value_or(kUnlabeled));
    for (float v : rec.vector) detail::write_f32(out, v);
  }
}

std::filesystem::path label_sidecar_path(const std::filesystem::path& path) {
  auto sidecar = path;
  sidecar.replace_extension(".labels.json");
  return sidecar;
}

std::map<Label, std::string> load_label_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::kFormat, path.string() + ": expected an object");
  std::map<Label, std::string> names;
  for (const auto& [key, value] : doc.items()) {
    Label label = 0;
    if (!parse_number(key, label) || !value.is_string()) {
      throw Error(ErrorKind::kFormat, path.string() + ": bad entry '" + key + "'");
    }
    names[label] = value.get<std::string>();
  }
  return names;
}

void save_label_names(const std::map<Label, std::string>& names,
                      const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [label, name] : names) doc[std::to_string(label)] = name;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path, format == FileFormat::kBinary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  EmbeddingSet set = format == FileFormat::kBinary ? read_hfv1(in) : read_csv(in);
  const auto sidecar = label_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) set.label_names = load_label_names(sidecar);
  set.validate();
  return set;
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     FileFormat format) {
  set.validate();
  {
    std::ofstream out(path, format == FileFormat::kBinary ? std::ios::binary : std::ios::out);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
    if (format == FileFormat::kBinary) {
      write_hfv1(set, out);
    } else {
      write_csv(set, out);
    }
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
  }
  if (!set.label_names.empty()) save_label_names(set.label_names, label_sidecar_path(path));
}

std::map<Label, std::vector<std::vector<float>>> split_by_label(const EmbeddingSet& set) {
  std::map<Label, std::vector<std::vector<float>>> groups;
  for (const auto& rec : set.records) {
    if (!rec.label) {
      throw Error(ErrorKind::kValidation, "record " + std::to_string(rec.id) + " is unlabeled");
    }
    groups[*rec.label].push_back(rec.vector);
  }
  return groups;
}

}  // namespace hiersearch
