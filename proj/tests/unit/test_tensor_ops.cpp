#include <doctest.h>

#include <cmath>
#include <random>

#include "lsp/ops.hpp"
#include "lsp/tensor.hpp"

using namespace lsp;

TEST_CASE("tensor basics and invariants") {
    Tensor t(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.at2(1, 2) == 6);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor(Shape{0, 2}, {}), ShapeError);
    CHECK(Tensor::scalar(3.5).item() == 3.5);
    CHECK_THROWS_AS(t.item(), ShapeError);
}

TEST_CASE("softmax of a constant row is uniform") {
    const Tensor p = softmax(Tensor(Shape{3}, {0, 0, 0}));
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one within 1e-12, even for extreme logits") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-800.0, 800.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(12);
        for (double& x : v) x = u(gen);
        const Tensor p = softmax(Tensor(Shape{3, 4}, v));
        for (std::size_t i = 0; i < 3; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 4; ++j) s += p.at2(i, j);
            CHECK(std::fabs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("relu and l2_norm match their definitions") {
    const Tensor r = relu(Tensor(Shape{3}, {-1, 0, 2}));
    CHECK(r[0] == 0);
    CHECK(r[1] == 0);
    CHECK(r[2] == 2);
    CHECK(l2_norm(Tensor(Shape{2}, {3, 4})).item() == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("shape errors") {
    const Tensor a(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor b(Shape{2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(add(a, Tensor(Shape{2}, {1, 2})), ShapeError);  // cols mismatch
    CHECK_THROWS_AS(l2_norm_rows(Tensor(Shape{3}, {1, 2, 3})), ShapeError);
    std::vector<std::size_t> bad{5};
    CHECK_THROWS_AS(gather_rows(a, bad), ShapeError);
}

TEST_CASE("numeric errors on non-finite results") {
    CHECK_THROWS_AS(lsp::exp(Tensor::scalar(1e4)), NumericError);   // overflow
    CHECK_THROWS_AS(lsp::log(Tensor::scalar(0.0)), NumericError);
    CHECK_THROWS_AS(lsp::log(Tensor::scalar(-1.0)), NumericError);
    CHECK_THROWS_AS(divide(Tensor::scalar(1.0), Tensor::scalar(0.0)), NumericError);
    CHECK_THROWS_AS(normalize_rows(Tensor(Shape{1, 2}, {0, 0})), NumericError);
}

TEST_CASE("broadcast add over the batch axis") {
    const Tensor a(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor b(Shape{3}, {10, 20, 30});
    const Tensor c = add(a, b);
    CHECK(c.at2(0, 0) == 11);
    CHECK(c.at2(1, 2) == 36);
    const Tensor d = sub(a, Tensor::scalar(1.0));
    CHECK(d.at2(0, 0) == 0);
}

TEST_CASE("matmul against a hand computation") {
    const Tensor a(Shape{2, 2}, {1, 2, 3, 4});
    const Tensor b(Shape{2, 2}, {5, 6, 7, 8});
    const Tensor c = matmul(a, b);
    CHECK(c.at2(0, 0) == 19);
    CHECK(c.at2(0, 1) == 22);
    CHECK(c.at2(1, 0) == 43);
    CHECK(c.at2(1, 1) == 50);
}

TEST_CASE("clamp with open bounds") {
    const Tensor x(Shape{4}, {-2, 0.5, 1.5, 3});
    const Tensor c = clamp(x, 0.0, 1.0);
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 0.5);
    CHECK(c[2] == 1.0);
    const Tensor m = clamp_min(x, 0.0);
    CHECK(m[3] == 3.0);
    CHECK_THROWS_AS(clamp(x, 2.0, 1.0), ConfigError);
}
