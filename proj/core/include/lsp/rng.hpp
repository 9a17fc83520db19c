#pragma once

#include <cstdint>
#include <random>

namespace lsp::rng {

// Every run funnels through one master seed; subsystems draw from streams
// derived with fixed tags so reruns and oracle loops can reproduce them.

inline constexpr std::uint64_t kSplit = 0x01;
inline constexpr std::uint64_t kShuffle = 0x02;
inline constexpr std::uint64_t kAttack = 0x03;
inline constexpr std::uint64_t kEvalAttack = 0x04;
inline constexpr std::uint64_t kBankNat = 0x05;
inline constexpr std::uint64_t kBankAdv = 0x06;
inline constexpr std::uint64_t kGlobalNeighbors = 0x07;
inline constexpr std::uint64_t kMixup = 0x08;
inline constexpr std::uint64_t kInit = 0x09;
inline constexpr std::uint64_t kProbe = 0x0a;
inline constexpr std::uint64_t kLipProbe = 0x0b;
inline constexpr std::uint64_t kFalsify = 0x0c;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(base ^ splitmix64(stream)) ^ index);
}

inline std::mt19937_64 engine(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
    return std::mt19937_64(derive(base, stream, index));
}

}  // namespace lsp::rng
