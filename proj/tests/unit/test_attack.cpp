#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "lsp/attack.hpp"
#include "lsp/data.hpp"
#include "lsp/ops.hpp"
#include "lsp/tape.hpp"
#include "support/finite_diff.hpp"

using namespace lsp;

namespace {

AttackConfig base_cfg() {
    AttackConfig cfg;
    cfg.epsilon = 0.1;
    cfg.steps = 5;
    cfg.step_size = 0.03;
    cfg.random_init = false;
    cfg.seed = 7;
    return cfg;
}

RowMatrix random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0, 1);
    RowMatrix x(n, d);
    for (double& v : x.data()) v = u(gen);
    return x;
}

std::vector<std::size_t> random_labels(std::size_t n, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> u(0, c - 1);
    std::vector<std::size_t> y(n);
    for (auto& v : y) v = u(gen);
    return y;
}

}  // namespace

TEST_CASE("fgsm with zero budget returns the input unchanged") {
    const MlpModel m = MlpModel::init({3, 2}, 1);
    const RowMatrix x = random_inputs(4, 3, 2);
    AttackConfig cfg = base_cfg();
    cfg.method = AttackMethod::fgsm;
    cfg.epsilon = 0.0;
    const auto y = random_labels(4, 2, 3);
    const RowMatrix adv = fgsm(m, x, y, cfg);
    CHECK(adv.data() == x.data());
}

TEST_CASE("fgsm perturbation sign follows the analytic gradient of a logistic model") {
    // Two-class linear model with logits (w.x, 0): the CE gradient w.r.t. x
    // is -(1 - p0) w for label 0, so the fgsm step moves along -sign(w).
    MlpModel m = MlpModel::init({4, 2}, 0);
    const std::vector<double> w{0.7, -1.3, 0.4, -0.2};
    std::vector<double> wm(4 * 2, 0.0);
    for (std::size_t i = 0; i < 4; ++i) wm[i * 2] = w[i];
    m.set_weight(0, Tensor(Shape{4, 2}, wm, true));

    RowMatrix x(1, 4, std::vector<double>{0.5, 0.5, 0.5, 0.5});
    AttackConfig cfg = base_cfg();
    cfg.method = AttackMethod::fgsm;
    cfg.epsilon = 0.01;
    const std::vector<std::size_t> y{0};
    const RowMatrix adv = fgsm(m, x, y, cfg);
    for (std::size_t i = 0; i < 4; ++i) {
        const double delta = adv.at(0, i) - x.at(0, i);
        CHECK(delta == doctest::Approx(-0.01 * (w[i] > 0 ? 1.0 : -1.0)).epsilon(1e-12));
    }
}

TEST_CASE("fgsm requires the linf norm") {
    const MlpModel m = MlpModel::init({2, 2}, 1);
    const RowMatrix x = random_inputs(2, 2, 4);
    AttackConfig cfg = base_cfg();
    cfg.norm = AttackNorm::l2;
    const auto y = random_labels(2, 2, 5);
    CHECK_THROWS_AS(fgsm(m, x, y, cfg), ConfigError);
}

TEST_CASE("pgd with zero budget returns the input unchanged") {
    const MlpModel m = MlpModel::init({3, 2}, 2);
    const RowMatrix x = random_inputs(4, 3, 6);
    const auto y = random_labels(4, 2, 7);
    for (AttackNorm norm : {AttackNorm::linf, AttackNorm::l2}) {
        AttackConfig cfg = base_cfg();
        cfg.norm = norm;
        cfg.epsilon = 0.0;
        cfg.random_init = true;
        const RowMatrix adv = pgd(m, x, y, cfg);
        CHECK(adv.data() == x.data());
    }
}

TEST_CASE("one-step pgd with large step collapses onto fgsm exactly") {
    const MlpModel m = MlpModel::init({5, 3}, 3);
    const RowMatrix x = random_inputs(6, 5, 8);
    const auto y = random_labels(6, 3, 9);
    AttackConfig cfg = base_cfg();
    cfg.epsilon = 0.07;
    cfg.steps = 1;
    cfg.step_size = 0.2;  // >= epsilon
    cfg.random_init = false;
    const RowMatrix a = pgd(m, x, y, cfg);
    AttackConfig fcfg = cfg;
    fcfg.method = AttackMethod::fgsm;
    const RowMatrix b = fgsm(m, x, y, fcfg);
    CHECK(std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0);
}

TEST_CASE("ball containment and data clamp hold for every attack output") {
    const MlpModel m = MlpModel::init({4, 3}, 4);
    for (AttackNorm norm : {AttackNorm::linf, AttackNorm::l2}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const RowMatrix x = random_inputs(5, 4, 100 + seed);
            const auto y = random_labels(5, 3, 200 + seed);
            AttackConfig cfg = base_cfg();
            cfg.norm = norm;
            cfg.random_init = true;
            cfg.seed = seed;
            cfg.epsilon = 0.15;
            cfg.steps = 8;
            cfg.step_size = 0.05;
            const RowMatrix adv = pgd(m, x, y, cfg);
            for (std::size_t i = 0; i < 5; ++i) {
                double l2 = 0.0, linf = 0.0;
                for (std::size_t j = 0; j < 4; ++j) {
                    const double d = adv.at(i, j) - x.at(i, j);
                    l2 += d * d;
                    linf = std::max(linf, std::fabs(d));
                    CHECK(adv.at(i, j) >= 0.0);
                    CHECK(adv.at(i, j) <= 1.0);
                }
                if (norm == AttackNorm::linf)
                    CHECK(linf <= cfg.epsilon + 1e-9);
                else
                    CHECK(std::sqrt(l2) <= cfg.epsilon + 1e-9);
            }
        }
    }
}

TEST_CASE("l2 projection lands outside points on the sphere and keeps inside points") {
    // A constant model has zero input gradient, so pgd from a random start
    // only projects: the start is inside the ball and must stay put.
    MlpModel constant = MlpModel::init({3, 2}, 5);
    constant.set_weight(0, Tensor::zeros(Shape{3, 2}, true));
    const RowMatrix x = random_inputs(4, 3, 11);
    const auto y = random_labels(4, 2, 12);
    AttackConfig cfg = base_cfg();
    cfg.norm = AttackNorm::l2;
    cfg.random_init = false;
    const RowMatrix adv = pgd(constant, x, y, cfg);
    CHECK(adv.data() == x.data());  // zero gradient keeps the iterate

    // A steep model with a huge step lands on the sphere within 1e-9.
    const MlpModel steep = MlpModel::init({3, 2}, 6);
    AttackConfig big = base_cfg();
    big.norm = AttackNorm::l2;
    big.epsilon = 0.05;
    big.steps = 3;
    big.step_size = 10.0;
    big.data_min = -100.0;
    big.data_max = 100.0;
    const RowMatrix far = pgd(steep, x, y, big);
    for (std::size_t i = 0; i < 4; ++i) {
        double l2 = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double d = far.at(i, j) - x.at(i, j);
            l2 += d * d;
        }
        CHECK(std::sqrt(l2) == doctest::Approx(big.epsilon).epsilon(1e-9));
    }
}

TEST_CASE("attacks are deterministic given the seed") {
    const MlpModel m = MlpModel::init({4, 3}, 7);
    const RowMatrix x = random_inputs(6, 4, 13);
    const auto y = random_labels(6, 3, 14);
    AttackConfig cfg = base_cfg();
    cfg.random_init = true;
    cfg.seed = 99;
    const RowMatrix a = pgd(m, x, y, cfg);
    const RowMatrix b = pgd(m, x, y, cfg);
    CHECK(std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0);
    cfg.seed = 100;
    const RowMatrix c = pgd(m, x, y, cfg);
    CHECK(c.data() != a.data());
}

TEST_CASE("cw margin loss values and gradient") {
    const Tensor z(Shape{1, 2}, {5, 1});
    std::vector<std::size_t> y{0};
    CHECK(cw_margin_loss(z, y).item() == doctest::Approx(4.0).epsilon(1e-15));

    const Tensor tie(Shape{1, 3}, {2, 2, -1});
    CHECK(cw_margin_loss(tie, y).item() == 0.0);

    std::mt19937_64 gen(15);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> logits(2 * 4);
        for (double& v : logits) v = u(gen);
        std::vector<std::size_t> labels{1, 3};
        // Keep the runner-up unique so the max kink stays away from the stencil.
        bool tie_risk = false;
        for (std::size_t r = 0; r < 2; ++r) {
            std::vector<double> others;
            for (std::size_t j = 0; j < 4; ++j)
                if (j != labels[r]) others.push_back(logits[r * 4 + j]);
            std::sort(others.rbegin(), others.rend());
            if (others[0] - others[1] < 1e-3) tie_risk = true;
        }
        if (tie_risk) continue;

        GradTape tape;
        std::vector<double> analytic;
        {
            auto scope = tape.activate();
            Tensor zt(Shape{2, 4}, logits, true);
            const Tensor g = tape.backward(cw_margin_loss(zt, labels)).grad_for(zt);
            analytic.assign(g.data().begin(), g.data().end());
        }
        const auto fd = testsupport::finite_diff(
            [&](const std::vector<double>& t) {
                return cw_margin_loss(Tensor(Shape{2, 4}, t), labels).item();
            },
            logits);
        CHECK(testsupport::max_rel_err(analytic, fd) < 1e-4);
    }
}

TEST_CASE("evaluate_robust_accuracy") {
    const Dataset data = gen_two_moons(100, 0.1, 21);

    SUBCASE("zero budget: robust equals clean") {
        const MlpModel m = MlpModel::init({2, 8, 2}, 1);
        AttackConfig cfg = base_cfg();
        cfg.epsilon = 0.0;
        cfg.random_init = false;
        const RobustAccuracy r = evaluate_robust_accuracy(m, data, cfg);
        CHECK(r.robust == r.clean);
    }

    SUBCASE("robust accuracy never exceeds clean accuracy without random init") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const MlpModel m = MlpModel::init({2, 8, 2}, seed);
            AttackConfig cfg = base_cfg();
            cfg.random_init = false;
            const RobustAccuracy r = evaluate_robust_accuracy(m, data, cfg);
            CHECK(r.robust <= r.clean);
        }
    }

    SUBCASE("untrained models sit near chance on balanced data") {
        double acc = 0.0;
        const int trials = 20;
        for (int seed = 0; seed < trials; ++seed) {
            const MlpModel m = MlpModel::init({2, 8, 2}, 1000 + seed);
            AttackConfig cfg = base_cfg();
            cfg.epsilon = 0.0;
            acc += evaluate_robust_accuracy(m, data, cfg).clean;
        }
        acc /= trials;
        CHECK(acc == doctest::Approx(0.5).epsilon(0.2));
    }
}
