#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace sketchedit {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Self-describing archive: named arrays (dtype, shape, raw little-endian data)
/// plus a free-form JSON manifest.
///
/// Layout: "SKEDCKPT" | u32 format version | u64 header length | header JSON |
/// array data. The header lists each array's name, dtype, shape, offset,
/// byte count and CRC-32, and the CRC-32 of the data section.
struct Archive {
  nlohmann::json manifest = nlohmann::json::object();
  std::map<std::string, torch::Tensor> arrays;
};

/// Writes through a temporary file and rename.
void write_archive(const std::filesystem::path& path, const Archive& archive);

/// Throws CheckpointError on missing files, bad magic, version mismatch,
/// truncation or checksum failure.
Archive read_archive(const std::filesystem::path& path);

}  // namespace sketchedit
