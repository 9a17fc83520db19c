#include "lsp/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lsp/ops.hpp"
#include "lsp/rng.hpp"
#include "lsp/tape.hpp"

namespace lsp {

AttackNorm attack_norm_from_string(const std::string& s) {
    if (s == "linf") return AttackNorm::linf;
    if (s == "l2") return AttackNorm::l2;
    throw ConfigError("unknown attack norm '" + s + "' (expected linf|l2)");
}

AttackLoss attack_loss_from_string(const std::string& s) {
    if (s == "ce") return AttackLoss::ce;
    if (s == "cw_margin" || s == "cw") return AttackLoss::cw_margin;
    throw ConfigError("unknown attack loss '" + s + "' (expected ce|cw_margin)");
}

AttackMethod attack_method_from_string(const std::string& s) {
    if (s == "fgsm") return AttackMethod::fgsm;
    if (s == "pgd") return AttackMethod::pgd;
    throw ConfigError("unknown attack method '" + s + "' (expected fgsm|pgd)");
}

std::string to_string(AttackNorm n) { return n == AttackNorm::linf ? "linf" : "l2"; }
std::string to_string(AttackLoss l) { return l == AttackLoss::ce ? "ce" : "cw_margin"; }
std::string to_string(AttackMethod m) { return m == AttackMethod::fgsm ? "fgsm" : "pgd"; }

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw ConfigError("attack: epsilon must be nonnegative");
    if (step_size <= 0.0) throw ConfigError("attack: step_size must be positive");
    if (steps < 1) throw ConfigError("attack: steps must be at least 1");
    if (!(data_min < data_max)) throw ConfigError("attack: data_min must be below data_max");
}

Tensor cw_margin_loss(const Tensor& logits, std::span<const std::size_t> labels) {
    if (logits.rank() != 2 || logits.rows() != labels.size())
        throw ShapeError("cw_margin_loss: logits/labels mismatch");
    const std::size_t n = logits.rows(), c = logits.cols();
    if (c < 2) throw ShapeError("cw_margin_loss: need at least two classes");
    for (std::size_t y : labels)
        if (y >= c) throw ConfigError("cw_margin_loss: label out of range");

    std::vector<std::size_t> runner(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = labels[i];
        std::size_t best = y == 0 ? 1 : 0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j == y) continue;
            if (logits.at2(i, j) > logits.at2(i, best)) best = j;
        }
        runner[i] = best;
        total += logits.at2(i, y) - logits.at2(i, best);
    }
    const double value = total / static_cast<double>(n);
    if (!std::isfinite(value)) throw NumericError("cw_margin_loss: non-finite result");
    Tensor res = Tensor::scalar(value);
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(logits)) {
        std::vector<std::size_t> ys(labels.begin(), labels.end());
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& gl = acc.get(logits);
            const double gv = g[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                gl[i * c + ys[i]] += gv;
                gl[i * c + runner[i]] -= gv;
            }
        });
    }
    return res;
}

namespace {

// Gradient of the attack objective w.r.t. the current iterate.
RowMatrix input_gradient(const MlpModel& model, const RowMatrix& x,
                         std::span<const std::size_t> labels, AttackLoss loss) {
    GradTape tape;
    auto scope = tape.activate();
    const Tensor xt = Tensor::from_matrix(x, true);
    const Prediction pred = model.forward(xt);
    // Objective is always ascended: CE for ce, negated margin for cw.
    const Tensor obj = loss == AttackLoss::ce ? cross_entropy(pred, labels)
                                              : scale(cw_margin_loss(pred.logits, labels), -1.0);
    return tape.backward(obj).grad_for(xt).to_matrix();
}

void clamp_data_range(RowMatrix& x, const AttackConfig& cfg) {
    for (double& v : x.data()) v = std::clamp(v, cfg.data_min, cfg.data_max);
}

// Project per-row displacement from `origin` onto the epsilon-ball.
void project_ball(RowMatrix& x, const RowMatrix& origin, const AttackConfig& cfg) {
    const std::size_t n = x.rows(), d = x.cols();
    if (cfg.norm == AttackNorm::linf) {
        for (std::size_t i = 0; i < n * d; ++i) {
            const double o = origin.data()[i];
            x.data()[i] = std::clamp(x.data()[i], o - cfg.epsilon, o + cfg.epsilon);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double dv = x.at(i, j) - origin.at(i, j);
                r += dv * dv;
            }
            r = std::sqrt(r);
            if (r > cfg.epsilon) {
                const double f = cfg.epsilon / r;
                for (std::size_t j = 0; j < d; ++j)
                    x.at(i, j) = origin.at(i, j) + (x.at(i, j) - origin.at(i, j)) * f;
            }
        }
    }
}

RowMatrix random_start(const RowMatrix& x, const AttackConfig& cfg) {
    RowMatrix out = x;
    std::mt19937_64 gen(cfg.seed);
    const std::size_t n = x.rows(), d = x.cols();
    if (cfg.norm == AttackNorm::linf) {
        std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
        for (double& v : out.data()) v += u(gen);
    } else {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::vector<double> dir(d);
        for (std::size_t i = 0; i < n; ++i) {
            double norm = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                dir[j] = gauss(gen);
                norm += dir[j] * dir[j];
            }
            norm = std::sqrt(norm);
            if (norm == 0.0) continue;
            const double radius =
                cfg.epsilon * std::pow(u01(gen), 1.0 / static_cast<double>(d));
            for (std::size_t j = 0; j < d; ++j) out.at(i, j) += radius * dir[j] / norm;
        }
    }
    project_ball(out, x, cfg);
    clamp_data_range(out, cfg);
    return out;
}

}  // namespace

RowMatrix fgsm(const MlpModel& model, const RowMatrix& x, std::span<const std::size_t> labels,
               const AttackConfig& cfg) {
    cfg.validate();
    if (cfg.norm != AttackNorm::linf) throw ConfigError("fgsm: only the linf norm is defined");
    const RowMatrix g = input_gradient(model, x, labels, cfg.loss);
    RowMatrix out = x;
    for (std::size_t i = 0; i < out.data().size(); ++i) {
        const double s = g.data()[i] > 0.0 ? 1.0 : (g.data()[i] < 0.0 ? -1.0 : 0.0);
        out.data()[i] += cfg.epsilon * s;
    }
    clamp_data_range(out, cfg);
    return out;
}

RowMatrix pgd(const MlpModel& model, const RowMatrix& x, std::span<const std::size_t> labels,
              const AttackConfig& cfg) {
    cfg.validate();
    RowMatrix cur = cfg.random_init ? random_start(x, cfg) : x;
    const std::size_t n = x.rows(), d = x.cols();
    for (int step = 0; step < cfg.steps; ++step) {
        const RowMatrix g = input_gradient(model, cur, labels, cfg.loss);
        if (cfg.norm == AttackNorm::linf) {
            for (std::size_t i = 0; i < cur.data().size(); ++i) {
                const double gv = g.data()[i];
                const double s = gv > 0.0 ? 1.0 : (gv < 0.0 ? -1.0 : 0.0);
                cur.data()[i] += cfg.step_size * s;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                double norm = 0.0;
                for (std::size_t j = 0; j < d; ++j) norm += g.at(i, j) * g.at(i, j);
                norm = std::max(std::sqrt(norm), 1e-12);
                for (std::size_t j = 0; j < d; ++j)
                    cur.at(i, j) += cfg.step_size * g.at(i, j) / norm;
            }
        }
        project_ball(cur, x, cfg);
        clamp_data_range(cur, cfg);
    }
    return cur;
}

RowMatrix run_attack(const MlpModel& model, const RowMatrix& x,
                     std::span<const std::size_t> labels, const AttackConfig& cfg) {
    return cfg.method == AttackMethod::fgsm ? fgsm(model, x, labels, cfg)
                                            : pgd(model, x, labels, cfg);
}

RobustAccuracy evaluate_robust_accuracy(const MlpModel& model, const Dataset& data,
                                        const AttackConfig& cfg) {
    if (data.size() == 0) throw ConfigError("evaluate_robust_accuracy: empty dataset");
    const std::size_t n = data.size();
    RobustAccuracy acc;

    const Prediction clean = model.forward(Tensor::from_matrix(data.features));
    const RowMatrix adv = run_attack(model, data.features, data.labels, cfg);
    const Prediction attacked = model.forward(Tensor::from_matrix(adv));

    std::size_t clean_ok = 0, robust_ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (clean.predicted_label[i] == data.labels[i]) ++clean_ok;
        if (attacked.predicted_label[i] == data.labels[i]) ++robust_ok;
    }
    acc.clean = static_cast<double>(clean_ok) / static_cast<double>(n);
    acc.robust = static_cast<double>(robust_ok) / static_cast<double>(n);
    return acc;
}

}  // namespace lsp
