#pragma once

#include <cstdint>
#include <filesystem>

#include "slcnn/model.hpp"

namespace slcnn {

// Layout, integers little-endian:
//   "SLCN" | u16 version | u32 n | n bytes canonical config JSON
//   | u32 block_count | per block: u16 name_len, name, u8 rank,
//     rank x u32 dims, prod(dims) x f32
//   | u64 FNV-1a of every preceding byte
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);

// Throws FormatError on bad magic, version, truncation, block shape or
// checksum. With `expected`, throws ConfigError unless the stored
// architecture matches it.
Model load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace slcnn
