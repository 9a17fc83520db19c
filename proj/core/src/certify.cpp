#include "lsp/certify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lsp/attack.hpp"
#include "lsp/ops.hpp"
#include "lsp/rng.hpp"
#include "lsp/tape.hpp"

namespace lsp {

LipschitzMode lipschitz_mode_from_string(const std::string& s) {
    if (s == "empirical") return LipschitzMode::empirical;
    if (s == "analytic") return LipschitzMode::analytic;
    throw ConfigError("unknown lipschitz mode '" + s + "' (expected empirical|analytic)");
}

std::string to_string(LipschitzMode m) {
    return m == LipschitzMode::empirical ? "empirical" : "analytic";
}

double certified_radius(double p_a, double p_b, double lipschitz) {
    if (!(p_b >= 0.0 && p_a >= p_b && p_a <= 1.0))
        throw ConfigError("certified_radius: need 0 <= p_b <= p_a <= 1");
    if (!(lipschitz > 0.0)) throw ConfigError("certified_radius: L_x must be positive");
    return (p_a - p_b) / (2.0 * lipschitz);
}

namespace {

// Probability output for a single point.
std::vector<double> prob_row(const MlpModel& model, std::span<const double> x) {
    RowMatrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.row(0).begin());
    const Tensor p = softmax(model.logits(Tensor::from_matrix(m)));
    return {p.data().begin(), p.data().end()};
}

void project_l2(std::vector<double>& probe, std::span<const double> center, double radius) {
    double r = 0.0;
    for (std::size_t j = 0; j < probe.size(); ++j) {
        const double d = probe[j] - center[j];
        r += d * d;
    }
    r = std::sqrt(r);
    if (r > radius && r > 0.0) {
        const double f = radius / r;
        for (std::size_t j = 0; j < probe.size(); ++j)
            probe[j] = center[j] + (probe[j] - center[j]) * f;
    }
}

double ratio_at(const MlpModel& model, std::span<const double> x,
                const std::vector<double>& p0, std::span<const double> probe) {
    double dist = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = probe[j] - x[j];
        dist += d * d;
    }
    dist = std::sqrt(dist);
    if (dist == 0.0) return 0.0;
    const std::vector<double> p = prob_row(model, probe);
    double num = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = p[j] - p0[j];
        num += d * d;
    }
    return std::sqrt(num) / dist;
}

// Spectral norm via power iteration on W^T W, deterministic start.
double spectral_norm(const Tensor& w) {
    const std::size_t in = w.rows(), out = w.cols();
    std::mt19937_64 gen(0x5eedcafe);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(out);
    double vn = 0.0;
    for (double& x : v) {
        x = gauss(gen);
        vn += x * x;
    }
    vn = std::sqrt(vn);
    for (double& x : v) x /= vn;

    std::vector<double> wv(in), wtwv(out);
    double sigma = 0.0;
    for (int it = 0; it < 1000; ++it) {
        for (std::size_t i = 0; i < in; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < out; ++j) s += w.at2(i, j) * v[j];
            wv[i] = s;
        }
        double wvn = 0.0;
        for (double x : wv) wvn += x * x;
        const double next = std::sqrt(wvn);
        for (std::size_t j = 0; j < out; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < in; ++i) s += w.at2(i, j) * wv[i];
            wtwv[j] = s;
        }
        double nn = 0.0;
        for (double x : wtwv) nn += x * x;
        nn = std::sqrt(nn);
        if (nn == 0.0) return 0.0;
        for (std::size_t j = 0; j < out; ++j) v[j] = wtwv[j] / nn;
        if (it > 4 && std::fabs(next - sigma) <= 1e-15 * std::max(next, 1.0)) {
            sigma = next;
            break;
        }
        sigma = next;
    }
    return sigma;
}

}  // namespace

double analytic_lipschitz_bound(const MlpModel& model) {
    double prod = 0.5;  // softmax is 1/2-Lipschitz in L2
    for (std::size_t l = 0; l < model.num_layers(); ++l)
        prod *= spectral_norm(model.weight(l));
    // Tiny inflation so power-iteration convergence error cannot make the
    // bound optimistic.
    return prod * (1.0 + 1e-9);
}

double estimate_local_lipschitz(const MlpModel& model, std::span<const double> x, double radius,
                                int n_probes, std::uint64_t seed) {
    if (!(radius > 0.0)) throw ConfigError("estimate_local_lipschitz: radius must be positive");
    if (n_probes < 1) throw ConfigError("estimate_local_lipschitz: need at least one probe");

    const std::size_t d = x.size();
    const std::vector<double> p0 = prob_row(model, x);
    std::mt19937_64 gen(rng::derive(seed, rng::kProbe));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    double best = 0.0;
    std::vector<double> first_probe;
    std::vector<double> probe(d);
    for (int t = 0; t < n_probes; ++t) {
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            probe[j] = gauss(gen);
            norm += probe[j] * probe[j];
        }
        norm = std::sqrt(norm);
        const double r = radius * std::pow(u01(gen), 1.0 / static_cast<double>(d));
        if (norm == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + r * probe[j] / norm;
        best = std::max(best, ratio_at(model, x, p0, probe));
        if (t == 0) first_probe = probe;
    }

    // One gradient-ascent-refined probe, seeded from the first random probe
    // so estimates stay nested in n_probes.
    if (!first_probe.empty()) {
        RowMatrix x_const(1, d);
        std::copy(x.begin(), x.end(), x_const.row(0).begin());
        const Tensor xc = Tensor::from_matrix(x_const);
        RowMatrix p0m(1, p0.size(), p0);
        const Tensor p0t = Tensor::from_matrix(p0m);
        std::vector<double> cur = first_probe;
        const double step = radius / 10.0;
        for (int it = 0; it < 20; ++it) {
            GradTape tape;
            auto scope = tape.activate();
            RowMatrix cm(1, d, cur);
            const Tensor xt = Tensor::from_matrix(cm, true);
            const Tensor den = l2_norm(sub(xt, xc));
            if (den.item() == 0.0) break;
            const Tensor num = l2_norm(sub(softmax(model.logits(xt)), p0t));
            const Tensor ratio = divide(num, den);
            best = std::max(best, ratio.item());
            const RowMatrix g = tape.backward(ratio).grad_for(xt).to_matrix();
            double gn = 0.0;
            for (double v : g.data()) gn += v * v;
            gn = std::max(std::sqrt(gn), 1e-12);
            for (std::size_t j = 0; j < d; ++j) cur[j] += step * g.data()[j] / gn;
            project_l2(cur, x, radius);
        }
        best = std::max(best, ratio_at(model, x, p0, cur));
    }
    return best;
}

bool falsify_certificate(const MlpModel& model, std::span<const double> x, double delta,
                         int n_probes, std::uint64_t seed) {
    if (delta <= 0.0 || n_probes < 1) return false;
    const std::size_t d = x.size();

    RowMatrix xm(1, d);
    std::copy(x.begin(), x.end(), xm.row(0).begin());
    const std::size_t base_class =
        model.forward(Tensor::from_matrix(xm)).predicted_label[0];

    std::mt19937_64 gen(rng::derive(seed, rng::kProbe, 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const std::size_t chunk = 1024;
    std::size_t remaining = static_cast<std::size_t>(n_probes);
    std::size_t probe_index = 0;
    while (remaining > 0) {
        const std::size_t b = std::min(chunk, remaining);
        RowMatrix probes(b, d);
        for (std::size_t i = 0; i < b; ++i, ++probe_index) {
            double norm = 0.0;
            auto row = probes.row(i);
            for (std::size_t j = 0; j < d; ++j) {
                row[j] = gauss(gen);
                norm += row[j] * row[j];
            }
            norm = std::sqrt(norm);
            // Alternate interior and boundary probes.
            const double u = u01(gen);
            const double r = (probe_index % 2 == 0)
                                 ? delta * std::pow(u, 1.0 / static_cast<double>(d))
                                 : delta;
            if (norm == 0.0) {
                std::copy(x.begin(), x.end(), row.begin());
                continue;
            }
            for (std::size_t j = 0; j < d; ++j) row[j] = x[j] + r * row[j] / norm;
        }
        const Prediction pred = model.forward(Tensor::from_matrix(probes));
        for (std::size_t i = 0; i < b; ++i)
            if (pred.predicted_label[i] != base_class) return true;
        remaining -= b;
    }

    // Margin-driven refinement inside the same ball.
    AttackConfig cfg;
    cfg.method = AttackMethod::pgd;
    cfg.norm = AttackNorm::l2;
    cfg.epsilon = delta;
    cfg.steps = 20;
    cfg.step_size = delta / 4.0;
    cfg.loss = AttackLoss::cw_margin;
    cfg.random_init = false;
    cfg.data_min = -1e12;  // Theorem-1 ball, not the data box
    cfg.data_max = 1e12;
    cfg.seed = rng::derive(seed, rng::kProbe, 2);
    const std::vector<std::size_t> label{base_class};
    const RowMatrix refined = pgd(model, xm, label, cfg);
    return model.forward(Tensor::from_matrix(refined)).predicted_label[0] != base_class;
}

std::vector<CertificateReport> certify_dataset(const MlpModel& model, const Dataset& data,
                                               const CertifyOptions& opts) {
    if (opts.radius_probes < 1) throw ConfigError("certify: radius probes must be positive");
    const double analytic =
        opts.mode == LipschitzMode::analytic ? analytic_lipschitz_bound(model) : 0.0;

    const Prediction pred = model.forward(Tensor::from_matrix(data.features));
    std::vector<CertificateReport> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CertificateReport r;
        r.sample_id = i;
        const std::size_t c = pred.probabilities.cols();
        std::size_t a = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (pred.probabilities.at2(i, j) > pred.probabilities.at2(i, a)) a = j;
        std::size_t b = a == 0 ? 1 : 0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j == a) continue;
            if (pred.probabilities.at2(i, j) > pred.probabilities.at2(i, b)) b = j;
        }
        r.p_a = pred.probabilities.at2(i, a);
        r.p_b = pred.probabilities.at2(i, b);

        double lip = analytic;
        if (opts.mode == LipschitzMode::empirical)
            lip = estimate_local_lipschitz(model, data.features.row(i), opts.lipschitz_radius,
                                           opts.lipschitz_probes,
                                           rng::derive(opts.seed, rng::kLipProbe, i));
        r.lipschitz = lip;
        r.certified_radius = certified_radius(r.p_a, r.p_b, std::max(lip, 1e-12));
        r.falsification_budget = opts.radius_probes;
        r.falsified = falsify_certificate(model, data.features.row(i), r.certified_radius,
                                          opts.radius_probes,
                                          rng::derive(opts.seed, rng::kFalsify, i));
        out.push_back(r);
    }
    return out;
}

}  // namespace lsp
