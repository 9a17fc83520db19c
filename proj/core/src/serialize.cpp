#include "lsp/serialize.hpp"

#include <bit>
#include <cstring>

namespace lsp::io {

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), sizeof buf);
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof buf);
    if (!is) throw FormatError("unexpected end of binary stream");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }

void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }

void write_f64_block(std::ostream& os, std::span<const double> v) {
    for (double x : v) write_f64(os, x);
}

std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return read_le<std::uint64_t>(is); }

double read_f64(std::istream& is) { return std::bit_cast<double>(read_le<std::uint64_t>(is)); }

void read_f64_block(std::istream& is, std::span<double> v) {
    for (double& x : v) x = read_f64(is);
}

void write_header(std::ostream& os, const char magic[4], std::uint32_t version) {
    os.write(magic, 4);
    write_u32(os, version);
}

void check_header(std::istream& is, const char magic[4], std::uint32_t expect_version,
                  const std::string& what) {
    char got[4] = {};
    is.read(got, 4);
    if (!is || std::memcmp(got, magic, 4) != 0)
        throw FormatError(what + ": bad magic, not a valid file");
    const std::uint32_t version = read_u32(is);
    if (version != expect_version)
        throw FormatError(what + ": unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(expect_version) + ")");
}

}  // namespace lsp::io
