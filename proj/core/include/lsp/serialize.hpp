#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "lsp/errors.hpp"

namespace lsp::io {

// Little-endian binary helpers for the checkpoint container format
// (4-byte magic, u32 version, payload). Doubles travel via their IEEE-754
// bit pattern, so round-trips are bit-exact.

void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
void write_f64_block(std::ostream& os, std::span<const double> v);

std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);
void read_f64_block(std::istream& is, std::span<double> v);

// Throws FormatError when the stream does not start with `magic` or the
// version does not match `expect_version`.
void write_header(std::ostream& os, const char magic[4], std::uint32_t version);
void check_header(std::istream& is, const char magic[4], std::uint32_t expect_version,
                  const std::string& what);

}  // namespace lsp::io
