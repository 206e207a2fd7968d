#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "fedgkd/model.hpp"

namespace fedgkd {

/// FNV-1a 64 over raw bytes.
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// Checkpoint layout: one line of JSON (shapes, element count, FNV-1a hash
// of the payload) terminated by '\n', then the flattened parameters as
// little-endian float64.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::string& bytes);

}  // namespace fedgkd
