#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsp/data.hpp"
#include "lsp/model.hpp"

namespace lsp {

enum class LipschitzMode { empirical, analytic };

LipschitzMode lipschitz_mode_from_string(const std::string& s);
std::string to_string(LipschitzMode m);

// Certified L2 radius (p_a - p_b) / (2 L_x); zero at ties. Requires
// 0 <= p_b <= p_a <= 1 and L_x > 0 (ConfigError otherwise).
double certified_radius(double p_a, double p_b, double lipschitz);

// Probe-based lower bound on the local Lipschitz constant of the
// probability map around x: max ratio over uniform ball probes plus one
// gradient-ascent-refined probe. Nested in n_probes for a fixed seed.
double estimate_local_lipschitz(const MlpModel& model, std::span<const double> x, double radius,
                                int n_probes, std::uint64_t seed);

// Upper bound on the global Lipschitz constant of the probability map:
// 1/2 times the product of layer spectral norms (the 1/2 is the softmax
// Lipschitz constant; ReLU is 1-Lipschitz). Exact spectral norm for a
// single linear layer.
double analytic_lipschitz_bound(const MlpModel& model);

// True iff some probe within the L2 delta-ball around x flips the argmax
// class. Probes: uniform in the ball, on the sphere, and one margin-driven
// PGD refinement. The ball is searched without data-range clamping.
bool falsify_certificate(const MlpModel& model, std::span<const double> x, double delta,
                         int n_probes, std::uint64_t seed);

struct CertificateReport {
    std::size_t sample_id = 0;
    double p_a = 0.0;
    double p_b = 0.0;
    double lipschitz = 0.0;
    double certified_radius = 0.0;
    bool falsified = false;
    int falsification_budget = 0;
};

struct CertifyOptions {
    LipschitzMode mode = LipschitzMode::analytic;
    int radius_probes = 1000;     // falsification probes per sample
    int lipschitz_probes = 1000;  // empirical mode only
    double lipschitz_radius = 0.1;
    std::uint64_t seed = 0;
};

std::vector<CertificateReport> certify_dataset(const MlpModel& model, const Dataset& data,
                                               const CertifyOptions& opts);

}  // namespace lsp
