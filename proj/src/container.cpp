#include "container.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "hiersearch/error.hpp"

namespace hiersearch::detail {

std::string tag_name(std::uint32_t tag) {
  std::string name(4, ' ');
  for (int i = 0; i < 4; ++i) name[static_cast<std::size_t>(i)] = static_cast<char>((tag >> (8 * i)) & 0xFF);
  return name;
}

const std::string& Container::get(std::uint32_t tag) const {
  for (const auto& [t, payload] : sections) {
    if (t == tag) return payload;
  }
  throw Error(ErrorKind::kFormat, "missing section '" + tag_name(tag) + "'");
}

bool Container::has(std::uint32_t tag) const {
  for (const auto& section : sections) {
    if (section.first == tag) return true;
  }
  return false;
}

void write_container(const Container& container, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_u32(out, container.magic);
  write_u32(out, kContainerVersion);
  for (const auto& [tag, payload] : container.sections) {
    write_u32(out, tag);
    write_u64(out, payload.size());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path, std::uint32_t expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  Container container;
  container.magic = read_u32(in, "container magic");
  if (container.magic != expected_magic) {
    throw Error(ErrorKind::kFormat, path.string() + ": bad magic '" + tag_name(container.magic) +
                                        "', expected '" + tag_name(expected_magic) + "'");
  }
  const auto version = read_u32(in, "container version");
  if (version != kContainerVersion) {
    throw Error(ErrorKind::kFormat, "unsupported container version " + std::to_string(version));
  }
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto tag = read_u32(in, "section tag");
    const auto length = read_u64(in, "section length");
    if (length > file_size) throw Error(ErrorKind::kFormat, "section length exceeds file size");
    std::string payload(length, '\0');
    read_exact(in, payload.data(), payload.size(), "section payload");
    container.add(tag, std::move(payload));
  }
  return container;
}

}  // namespace hiersearch::detail
