#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "lsp/model.hpp"
#include "lsp/ops.hpp"
#include "lsp/tape.hpp"
#include "support/finite_diff.hpp"
#include "support/oracles.hpp"

using namespace lsp;

TEST_CASE("init_model is deterministic and validates dims") {
    const MlpModel a = MlpModel::init({2, 8, 2}, 0);
    const MlpModel b = MlpModel::init({2, 8, 2}, 0);
    for (std::size_t l = 0; l < a.num_layers(); ++l) {
        CHECK(std::memcmp(a.weight(l).data().data(), b.weight(l).data().data(),
                          a.weight(l).size() * sizeof(double)) == 0);
    }
    CHECK_THROWS_AS(MlpModel::init({2}, 0), ConfigError);
    CHECK_THROWS_AS(MlpModel::init({2, 0, 2}, 0), ConfigError);

    const MlpModel c = MlpModel::init({4, 16, 3}, 1);
    CHECK(c.num_layers() == 2);
    CHECK(c.weight(0).shape() == Shape{4, 16});
    CHECK(c.weight(1).shape() == Shape{16, 3});
    CHECK(c.bias(1).shape() == Shape{3});
}

TEST_CASE("all-zero parameters give uniform probabilities") {
    MlpModel m = MlpModel::init({3, 4}, 0);
    m.set_weight(0, Tensor::zeros(Shape{3, 4}, true));
    const Prediction p = m.forward(Tensor(Shape{2, 3}, {1, 2, 3, -1, 0, 1}));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(p.probabilities.at2(i, j) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("rows are processed independently of the batch around them") {
    const MlpModel m = MlpModel::init({3, 5, 2}, 3);
    const Tensor batch(Shape{4, 3}, {0.1, 0.2, 0.3, -1, 0.5, 2, 0.7, -0.3, 0.4, 1, 1, 1});
    const Prediction full = m.forward(batch);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<std::size_t> one{i};
        const Prediction single = m.forward(Tensor::from_rows(batch.to_matrix(), one));
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(single.logits.at2(0, j) == full.logits.at2(i, j));
    }
}

TEST_CASE("forward matches the per-neuron loop oracle") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const MlpModel m = MlpModel::init({4, 7, 5, 3}, 100 + rep);
        std::vector<double> x(4);
        for (double& v : x) v = u(gen);
        RowMatrix xm(1, 4, x);
        const Tensor logits = m.logits(Tensor::from_matrix(xm));
        const auto oracle = testsupport::naive_logits(m, x);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::fabs(logits.at2(0, j) - oracle[j]) < 1e-12);
    }
}

TEST_CASE("cross entropy values") {
    // Uniform prediction over 10 classes.
    MlpModel m = MlpModel::init({2, 10}, 0);
    m.set_weight(0, Tensor::zeros(Shape{2, 10}, true));
    const Prediction p = m.forward(Tensor(Shape{1, 2}, {0.4, 0.6}));
    std::vector<std::size_t> y{3};
    CHECK(cross_entropy(p, y).item() == doctest::Approx(std::log(10.0)).epsilon(1e-12));

    // Hand-built predictions.
    Prediction q;
    q.logits = Tensor(Shape{1, 2}, {0, 0});
    q.probabilities = Tensor(Shape{1, 2}, {0.7, 0.3});
    q.predicted_label = {0};
    std::vector<std::size_t> y0{0};
    CHECK(cross_entropy(q, y0).item() == doctest::Approx(-std::log(0.7)).epsilon(1e-12));

    Prediction onehot;
    onehot.logits = Tensor(Shape{1, 2}, {0, 0});
    onehot.probabilities = Tensor(Shape{1, 2}, {1.0, 0.0});
    onehot.predicted_label = {0};
    CHECK(cross_entropy(onehot, y0).item() == 0.0);

    std::vector<std::size_t> bad{5};
    CHECK_THROWS_AS(cross_entropy(q, bad), ConfigError);
}

TEST_CASE("softmax shift invariance") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> v(6);
        for (double& x : v) x = u(gen);
        const Tensor p1 = softmax(Tensor(Shape{2, 3}, v));
        const double c = u(gen);
        for (double& x : v) x += c;
        const Tensor p2 = softmax(Tensor(Shape{2, 3}, v));
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(p1[i] - p2[i]) < 1e-12);
    }
}

TEST_CASE("cross entropy gradient equals (probs - onehot)/batch") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> z(3 * 4);
    for (double& x : z) x = u(gen);
    std::vector<std::size_t> y{1, 3, 0};

    GradTape tape;
    std::vector<double> analytic;
    Tensor probs_value;
    {
        auto scope = tape.activate();
        Tensor logits(Shape{3, 4}, z, true);
        Prediction p;
        p.logits = logits;
        p.probabilities = softmax(logits);
        probs_value = p.probabilities;
        const Tensor g = tape.backward(cross_entropy(p, y)).grad_for(logits);
        analytic.assign(g.data().begin(), g.data().end());
    }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double expected =
                (probs_value.at2(i, j) - (y[i] == j ? 1.0 : 0.0)) / 3.0;
            CHECK(analytic[i * 4 + j] == doctest::Approx(expected).epsilon(1e-10));
        }

    const auto fd = testsupport::finite_diff(
        [&](const std::vector<double>& t) {
            Prediction p;
            p.logits = Tensor(Shape{3, 4}, t);
            p.probabilities = softmax(p.logits);
            return cross_entropy(p, y).item();
        },
        z);
    CHECK(testsupport::max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("checkpoint round-trip is bit exact; version mismatch rejected") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "lsp_model_test";
    fs::create_directories(dir);
    const fs::path path = dir / "m.bin";

    const MlpModel m = MlpModel::init({3, 9, 4}, 42);
    m.save(path);
    const MlpModel r = MlpModel::load(path);
    REQUIRE(r.layer_dims() == m.layer_dims());
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        CHECK(std::memcmp(m.weight(l).data().data(), r.weight(l).data().data(),
                          m.weight(l).size() * sizeof(double)) == 0);
        CHECK(std::memcmp(m.bias(l).data().data(), r.bias(l).data().data(),
                          m.bias(l).size() * sizeof(double)) == 0);
    }

    // Flip the version field (bytes 4..7).
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v2[4] = {9, 0, 0, 0};
    f.write(v2, 4);
    f.close();
    CHECK_THROWS_AS(MlpModel::load(path), FormatError);

    std::ofstream bad(dir / "junk.bin", std::ios::binary);
    bad << "not a checkpoint";
    bad.close();
    CHECK_THROWS_AS(MlpModel::load(dir / "junk.bin"), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("forward validates the input dimension") {
    const MlpModel m = MlpModel::init({3, 2}, 0);
    CHECK_THROWS_AS(m.forward(Tensor(Shape{1, 4}, {1, 2, 3, 4})), ShapeError);
}
