#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lsp/data.hpp"
#include "support/oracles.hpp"

using namespace lsp;
namespace fs = std::filesystem;

TEST_CASE("raw two-moons points lie on the two half circles") {
    const RowMatrix pts = two_moons_raw(8);
    for (std::size_t i = 0; i < 4; ++i) {
        const double r = std::sqrt(pts.at(i, 0) * pts.at(i, 0) + pts.at(i, 1) * pts.at(i, 1));
        CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pts.at(i, 1) >= -1e-12);  // upper half circle
        const double dx = pts.at(4 + i, 0) - 1.0;
        const double dy = pts.at(4 + i, 1) - 0.5;
        CHECK(std::sqrt(dx * dx + dy * dy) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pts.at(4 + i, 1) <= 0.5 + 1e-12);  // lower half circle
    }
}

TEST_CASE("two moons: determinism, balance, range") {
    const Dataset a = gen_two_moons(200, 0.1, 7);
    const Dataset b = gen_two_moons(200, 0.1, 7);
    CHECK(a.features.data() == b.features.data());
    CHECK(a.labels == b.labels);

    std::size_t ones = 0;
    for (std::size_t y : a.labels) ones += y;
    CHECK(ones == 100);
    for (double v : a.features.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    a.validate();
    CHECK_THROWS_AS(gen_two_moons(201, 0.1, 7), ConfigError);

    const Dataset c = gen_two_moons(200, 0.1, 8);
    CHECK(c.features.data() != a.features.data());
}

TEST_CASE("gaussian blobs") {
    RowMatrix centers(2, 2);
    centers.at(0, 0) = 0.2;
    centers.at(0, 1) = 0.2;
    centers.at(1, 0) = 0.8;
    centers.at(1, 1) = 0.8;

    SUBCASE("sigma 0 collapses onto the centers") {
        const Dataset d = gen_gaussian_blobs(10, centers, 0.0, 1);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto c = centers.row(d.labels[i]);
            CHECK(d.features.at(i, 0) == c[0]);
            CHECK(d.features.at(i, 1) == c[1]);
        }
    }

    SUBCASE("far-separated clusters are 1-NN pure") {
        const Dataset d = gen_gaussian_blobs(100, centers, 0.02, 2);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto nn = testsupport::brute_knn(d.features, i, 1);
            if (d.labels[nn[0]] == d.labels[i]) ++correct;
        }
        CHECK(correct == d.size());
    }

    SUBCASE("empirical means stay near the centers") {
        const std::size_t n = 600;
        const double sigma = 0.05;
        const Dataset d = gen_gaussian_blobs(n, centers, sigma, 3);
        const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(n / 2));
        for (std::size_t c = 0; c < 2; ++c) {
            double mx = 0, my = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d.labels[i] != c) continue;
                mx += d.features.at(i, 0);
                my += d.features.at(i, 1);
            }
            mx /= static_cast<double>(n / 2);
            my /= static_cast<double>(n / 2);
            CHECK(std::fabs(mx - centers.at(c, 0)) < tol);
            CHECK(std::fabs(my - centers.at(c, 1)) < tol);
        }
    }

    CHECK_THROWS_AS(gen_gaussian_blobs(101, centers, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(gen_gaussian_blobs(10, RowMatrix(1, 2), 0.1, 1), ConfigError);
}

TEST_CASE("csv load and save") {
    const fs::path dir = fs::temp_directory_path() / "lsp_data_test";
    fs::create_directories(dir);

    SUBCASE("hand-written file") {
        const fs::path p = dir / "hand.csv";
        std::ofstream(p) << "label,f0,f1\n0,0.25,0.5\n1,1,0\n";
        const Dataset d = load_csv(p);
        CHECK(d.size() == 2);
        CHECK(d.dim() == 2);
        CHECK(d.num_classes == 2);
        CHECK(d.features.at(0, 0) == 0.25);
        CHECK(d.features.at(1, 1) == 0.0);
        CHECK(d.labels[1] == 1);
    }

    SUBCASE("empty and malformed files") {
        const fs::path p = dir / "empty.csv";
        std::ofstream(p) << "";
        CHECK_THROWS_AS(load_csv(p), ParseError);

        const fs::path q = dir / "bad.csv";
        std::ofstream(q) << "label,f0\n0,0.5\n1,abc\n";
        CHECK_THROWS_WITH_AS(load_csv(q), doctest::Contains(":3"), ParseError);

        const fs::path r = dir / "width.csv";
        std::ofstream(r) << "label,f0,f1\n0,0.5,0.5\n1,0.5\n";
        CHECK_THROWS_AS(load_csv(r), ParseError);
    }

    SUBCASE("round-trip is exact") {
        const Dataset d = gen_two_moons(64, 0.2, 5);
        const fs::path p = dir / "rt.csv";
        save_csv(d, p);
        const Dataset r = load_csv(p);
        CHECK(r.features.data() == d.features.data());
        CHECK(r.labels == d.labels);
        CHECK(dataset_fingerprint(r) == dataset_fingerprint(d));
    }

    fs::remove_all(dir);
}

TEST_CASE("stratified split is deterministic and proportional") {
    const Dataset d = gen_two_moons(100, 0.1, 3);
    const auto [tr1, va1] = stratified_split(d.labels, 0.1, 9);
    const auto [tr2, va2] = stratified_split(d.labels, 0.1, 9);
    CHECK(tr1 == tr2);
    CHECK(va1 == va2);
    CHECK(va1.size() == 10);
    CHECK(tr1.size() == 90);
    std::size_t val_ones = 0;
    for (std::size_t i : va1) val_ones += d.labels[i];
    CHECK(val_ones == 5);  // stratified
}
