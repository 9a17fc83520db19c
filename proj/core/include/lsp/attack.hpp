#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "lsp/data.hpp"
#include "lsp/model.hpp"

namespace lsp {

enum class AttackNorm { linf, l2 };
enum class AttackLoss { ce, cw_margin };
enum class AttackMethod { fgsm, pgd };

AttackNorm attack_norm_from_string(const std::string& s);
AttackLoss attack_loss_from_string(const std::string& s);
AttackMethod attack_method_from_string(const std::string& s);
std::string to_string(AttackNorm n);
std::string to_string(AttackLoss l);
std::string to_string(AttackMethod m);

struct AttackConfig {
    AttackMethod method = AttackMethod::pgd;
    AttackNorm norm = AttackNorm::linf;
    double epsilon = 8.0 / 255.0;
    int steps = 10;
    double step_size = 1.0 / 255.0;
    AttackLoss loss = AttackLoss::ce;
    bool random_init = true;
    double data_min = 0.0;
    double data_max = 1.0;
    std::uint64_t seed = 0;

    void validate() const;  // ConfigError on violated invariants
};

// Margin loss z_y - max_{l != y} z_l, mean over the batch. Negative margin
// means misclassification; PGD ascends its negative when loss=cw_margin.
Tensor cw_margin_loss(const Tensor& logits, std::span<const std::size_t> labels);

// One signed-gradient step of size epsilon, clamped to the data range.
// Requires norm == linf.
RowMatrix fgsm(const MlpModel& model, const RowMatrix& x, std::span<const std::size_t> labels,
               const AttackConfig& cfg);

// Iterated projected ascent within the epsilon-ball (sign steps for linf,
// normalized-gradient steps for l2), optional uniform random start.
RowMatrix pgd(const MlpModel& model, const RowMatrix& x, std::span<const std::size_t> labels,
              const AttackConfig& cfg);

// Dispatch on cfg.method.
RowMatrix run_attack(const MlpModel& model, const RowMatrix& x,
                     std::span<const std::size_t> labels, const AttackConfig& cfg);

struct RobustAccuracy {
    double clean = 0.0;
    double robust = 0.0;
};

// Fraction of samples classified correctly before and after the attack.
RobustAccuracy evaluate_robust_accuracy(const MlpModel& model, const Dataset& data,
                                        const AttackConfig& cfg);

}  // namespace lsp
