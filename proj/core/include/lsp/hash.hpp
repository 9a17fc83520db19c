#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace lsp {

// FNV-1a, 64-bit. Used for dataset fingerprints and checkpoint hashes.
std::uint64_t fnv1a(std::span<const unsigned char> bytes);
std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

}  // namespace lsp
