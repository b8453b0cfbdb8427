#pragma once

#include <filesystem>
#include <string>

#include "xaimeter/model.hpp"

namespace xaimeter {

/// Binary model checkpoint: magic "XAIM", format version u32, length-prefixed
/// JSON architecture header, then little-endian 64-bit floats for all
/// parameters in layer order (weights before bias within a layer).
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_model(const Classifier& model, const std::filesystem::path& path);

/// Throws CorruptFileError on truncation/garbage and VersionMismatchError on
/// a format-version bump. load(save(m)) reproduces forward outputs bit-exactly.
Classifier load_model(const std::filesystem::path& path);

/// FNV-1a hash of the whole file, as a fixed-width hex string. Stored in
/// result tables to keep scores from different models apart.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace xaimeter
