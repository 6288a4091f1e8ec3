#pragma once

#include "container.hpp"
#include "hiersearch/model.hpp"

namespace hiersearch::detail {

inline constexpr std::uint32_t kModelMagic = fourcc("HMDL");
inline constexpr std::uint32_t kIndexMagic = fourcc("HIDX");

void add_model_sections(Container& container, const HierarchyModel& model);
HierarchyModel read_model_sections(const Container& container);

}  // namespace hiersearch::detail
