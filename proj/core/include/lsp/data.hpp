#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lsp/matrix.hpp"

namespace lsp {

// Labeled samples with features confined to [feature_min, feature_max]
// (fixed to [0,1] by the generators so attack budgets read like pixel-scale
// budgets).
struct Dataset {
    RowMatrix features;  // [N, d]
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;
    double feature_min = 0.0;
    double feature_max = 1.0;
    std::string split = "full";

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }

    Dataset subset(std::span<const std::size_t> ids, std::string split_tag) const;
    void validate() const;  // invariants; throws on violation
};

// Two interleaved half circles (n/2 points each), Gaussian noise, rescaled
// into [0,1]^2. Odd n -> ConfigError.
Dataset gen_two_moons(std::size_t n, double noise_sigma, std::uint64_t seed);

// Noise-free parametric moon points before noise/rescaling; exposed for
// verification of the construction.
RowMatrix two_moons_raw(std::size_t n);

// Equal-sized isotropic Gaussian clusters around the given centers, clamped
// to [0,1]^d. n must divide evenly across the centers.
Dataset gen_gaussian_blobs(std::size_t n, const RowMatrix& centers, double sigma,
                           std::uint64_t seed);

// CSV with header "label,f0,f1,...". Values are written with 17 significant
// digits so save/load round-trips exactly.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& d, const std::filesystem::path& path);

// Content fingerprint over features, labels and class count (independent of
// the split tag).
std::uint64_t dataset_fingerprint(const Dataset& d);

// Deterministic stratified split: per class, `val_fraction` of the samples
// go to validation. Returns {train_ids, val_ids}, both ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const std::size_t> labels, double val_fraction, std::uint64_t seed);

}  // namespace lsp
