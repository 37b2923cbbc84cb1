#pragma once

#include <cstdint>
#include <filesystem>

#include "srgf/model.hpp"

// Binary layout, little-endian:
//   "SRGF1", u64 config digest, u64 block count,
//   blocks of {u64 name length, name, u64 rows, u64 cols, float32 values},
//   u8 has_adam, then when set: u64 step followed by the moment blocks
//   "adam.m.<name>" and "adam.v.<name>" for every parameter.
namespace srgf {

void save_checkpoint(const std::filesystem::path& path, const Model& model, bool with_optimizer = true);

/// Reads parameters (and optimizer state when present) into `model`. Throws
/// data::DataError on a bad file, a config digest mismatch or a missing or
/// misshapen parameter block.
void load_checkpoint(const std::filesystem::path& path, Model& model);

/// Config digest stored in a checkpoint header.
std::uint64_t checkpoint_digest(const std::filesystem::path& path);

}  // namespace srgf
