#pragma once

// Sectioned binary container shared by model and index files:
//   4-byte magic, u32 version, then repeated { u32 tag, u64 length, payload }.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace hiersearch::detail {

inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  std::uint32_t magic = 0;
  std::vector<std::pair<std::uint32_t, std::string>> sections;

  void add(std::uint32_t tag, std::string payload) { sections.emplace_back(tag, std::move(payload)); }
  /// Throws a format error if the section is missing.
  const std::string& get(std::uint32_t tag) const;
  bool has(std::uint32_t tag) const;
};

void write_container(const Container& container, const std::filesystem::path& path);
Container read_container(const std::filesystem::path& path, std::uint32_t expected_magic);

std::string tag_name(std::uint32_t tag);

}  // namespace hiersearch::detail
