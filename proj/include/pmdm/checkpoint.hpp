#pragma once

#include <string>

#include "pmdm/param_store.hpp"

namespace pmdm {

// Binary parameter container.
//
// Layout (all integers little-endian):
//   magic "PMDM" | format version u32 | entry count u64 | entries...
// Entry:
//   name length u32 | name bytes (UTF-8) | rank u32 | shape u64 x rank |
//   values f64 x numel
//
// Round-trips are bit-exact.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamStore& store, const std::string& path);

// Loads values into an already-constructed store; every file entry must match
// an existing parameter name and shape.
void load_checkpoint(ParamStore& store, const std::string& path);

}  // namespace pmdm
