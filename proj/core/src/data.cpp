#include "lsp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "lsp/hash.hpp"
#include "lsp/rng.hpp"

namespace lsp {

Dataset Dataset::subset(std::span<const std::size_t> ids, std::string split_tag) const {
    Dataset out;
    out.features = features.take_rows(ids);
    out.labels.reserve(ids.size());
    for (std::size_t id : ids) out.labels.push_back(labels[id]);
    out.num_classes = num_classes;
    out.feature_min = feature_min;
    out.feature_max = feature_max;
    out.split = std::move(split_tag);
    return out;
}

void Dataset::validate() const {
    if (features.rows() != labels.size())
        throw FormatError("dataset: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(features.rows()) + " rows");
    for (std::size_t y : labels)
        if (y >= num_classes)
            throw FormatError("dataset: label " + std::to_string(y) + " out of range");
    for (double x : features.data())
        if (x < feature_min || x > feature_max || !std::isfinite(x))
            throw FormatError("dataset: feature outside range");
}

RowMatrix two_moons_raw(std::size_t n) {
    const std::size_t half = n / 2;
    RowMatrix pts(n, 2);
    for (std::size_t i = 0; i < half; ++i) {
        const double t = half == 1 ? 0.0
                                   : std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(half - 1);
        pts.at(i, 0) = std::cos(t);
        pts.at(i, 1) = std::sin(t);
        pts.at(half + i, 0) = 1.0 - std::cos(t);
        pts.at(half + i, 1) = 0.5 - std::sin(t);
    }
    return pts;
}

Dataset gen_two_moons(std::size_t n, double noise_sigma, std::uint64_t seed) {
    if (n % 2 != 0) throw ConfigError("gen_two_moons: n must be even, got " + std::to_string(n));
    if (n < 2) throw ConfigError("gen_two_moons: n must be at least 2");
    if (noise_sigma < 0) throw ConfigError("gen_two_moons: noise must be nonnegative");

    RowMatrix pts = two_moons_raw(n);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (noise_sigma > 0)
        for (double& x : pts.data()) x += noise_sigma * gauss(gen);

    // Rescale each dimension into [0,1].
    for (std::size_t j = 0; j < 2; ++j) {
        double lo = pts.at(0, j), hi = pts.at(0, j);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, pts.at(i, j));
            hi = std::max(hi, pts.at(i, j));
        }
        const double span = hi > lo ? hi - lo : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            pts.at(i, j) = std::clamp((pts.at(i, j) - lo) / span, 0.0, 1.0);
    }

    Dataset d;
    d.features = std::move(pts);
    d.labels.assign(n, 0);
    for (std::size_t i = n / 2; i < n; ++i) d.labels[i] = 1;
    d.num_classes = 2;
    return d;
}

Dataset gen_gaussian_blobs(std::size_t n, const RowMatrix& centers, double sigma,
                           std::uint64_t seed) {
    const std::size_t k = centers.rows();
    if (k < 2) throw ConfigError("gen_gaussian_blobs: need at least 2 centers");
    if (n % k != 0)
        throw ConfigError("gen_gaussian_blobs: n=" + std::to_string(n) +
                          " does not divide evenly over " + std::to_string(k) + " centers");
    if (sigma < 0) throw ConfigError("gen_gaussian_blobs: sigma must be nonnegative");

    const std::size_t per = n / k, dim = centers.cols();
    Dataset d;
    d.features = RowMatrix(n, dim);
    d.labels.resize(n);
    d.num_classes = k;
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t r = c * per + i;
            d.labels[r] = c;
            for (std::size_t j = 0; j < dim; ++j)
                d.features.at(r, j) =
                    std::clamp(centers.at(c, j) + sigma * gauss(gen), 0.0, 1.0);
        }
    return d;
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");

    std::vector<double> values;
    std::vector<std::size_t> labels;
    std::size_t width = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const char* b = cell.data();
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(b, &end);
            if (end == b || errno != 0)
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": malformed value '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() < 2)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": too few columns");
        if (width == 0)
            width = row.size();
        else if (row.size() != width)
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": inconsistent column count");
        if (row[0] < 0 || row[0] != std::floor(row[0]))
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": label must be a nonnegative integer");
        labels.push_back(static_cast<std::size_t>(row[0]));
        values.insert(values.end(), row.begin() + 1, row.end());
    }
    if (labels.empty()) throw ParseError(path.string() + ": no data rows");

    Dataset d;
    d.features = RowMatrix(labels.size(), width - 1, std::move(values));
    d.labels = std::move(labels);
    d.num_classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
    double lo = d.features.data()[0], hi = d.features.data()[0];
    for (double x : d.features.data()) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    d.feature_min = std::min(lo, 0.0);
    d.feature_max = std::max(hi, 1.0);
    return d;
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open CSV file for writing: " + path.string());
    out << "label";
    for (std::size_t j = 0; j < d.dim(); ++j) out << ",f" << j;
    out << "\n";
    char buf[64];
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << d.labels[i];
        for (std::size_t j = 0; j < d.dim(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", d.features.at(i, j));
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw ParseError("failed writing CSV file: " + path.string());
}

std::uint64_t dataset_fingerprint(const Dataset& d) {
    std::vector<unsigned char> bytes;
    bytes.reserve(d.features.data().size() * 8 + d.labels.size() * 8 + 24);
    auto push_u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    };
    push_u64(d.size());
    push_u64(d.dim());
    push_u64(d.num_classes);
    for (double x : d.features.data()) {
        std::uint64_t u;
        std::memcpy(&u, &x, 8);
        push_u64(u);
    }
    for (std::size_t y : d.labels) push_u64(y);
    return fnv1a(bytes);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const std::size_t> labels, double val_fraction, std::uint64_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("stratified_split: fraction must be in [0,1)");
    const std::size_t n = labels.size();
    std::size_t num_classes = 0;
    for (std::size_t y : labels) num_classes = std::max(num_classes, y + 1);

    std::vector<char> is_val(n, 0);
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == c) ids.push_back(i);
        auto gen = rng::engine(seed, rng::kSplit, c);
        std::shuffle(ids.begin(), ids.end(), gen);
        const std::size_t take = static_cast<std::size_t>(
            std::floor(val_fraction * static_cast<double>(ids.size())));
        for (std::size_t i = 0; i < take; ++i) is_val[ids[i]] = 1;
    }
    std::vector<std::size_t> train, val;
    for (std::size_t i = 0; i < n; ++i) (is_val[i] ? val : train).push_back(i);
    return {std::move(train), std::move(val)};
}

}  // namespace lsp
