#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lsp/attack.hpp"
#include "lsp/data.hpp"
#include "lsp/model.hpp"
#include "lsp/structure.hpp"
#include "lsp/tape.hpp"

namespace lsp {

// Step learning rate: the initial value divided by every divisor whose
// epoch has been reached (epochs are 1-based).
struct LrSchedule {
    double initial = 0.1;
    std::map<int, double> drops = {{75, 10.0}, {90, 10.0}};
    double at(int epoch) const;
};

enum class StructureMode { local, global, off };
StructureMode structure_mode_from_string(const std::string& s);
std::string to_string(StructureMode m);

struct TrainConfig {
    int epochs = 100;
    std::size_t batch_size = 128;
    LrSchedule lr;
    double momentum = 0.9;
    double lambda = 1.0;
    std::size_t m = 8;
    LspKind kind = LspKind::l2;
    StructureMode structure = StructureMode::local;
    bool adversarial = false;
    AttackConfig attack;  // inner maximization and the per-epoch validation eval
    double bank_momentum = 0.5;
    double mixup_alpha = 0.0;  // > 0 enables the mixup baseline path
    double val_fraction = 0.1;
    bool early_stopping = false;
    double pretext_tau = 0.07;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double ce = 0.0;
    double lsp = 0.0;
    double total = 0.0;
    double clean_acc = 0.0;
    double robust_acc = 0.0;
    double purity = 0.0;
    double lr = 0.0;
    std::size_t skipped_anchors = 0;  // degenerate neighborhoods this epoch
};

struct TrainLog {
    std::vector<EpochRecord> epochs;

    void to_csv(const std::filesystem::path& path) const;
    static TrainLog from_csv(const std::filesystem::path& path);
};

// Momentum-SGD velocity buffers, parallel to MlpModel::parameters().
struct SgdState {
    std::vector<std::vector<double>> velocity;
};

// v <- momentum*v + g; param <- param - lr*v. Non-finite gradients raise
// NumericError naming the parameter.
void sgd_step(MlpModel& model, const GradMap& grads, double lr, double momentum,
              SgdState& state);

struct TrainResult {
    MlpModel model;
    TrainLog log;
    std::optional<MemoryBank> nat_bank;
    std::optional<MemoryBank> adv_bank;
};

// Standard training, mean CE + lambda * LSP over a frozen extractor-space
// neighbor index. lambda == 0 or structure == off is exactly the vanilla
// ERM loop (the structure term is still monitored into the log when an
// index exists).
TrainResult train_standard(MlpModel model, const Extractor& g, const Dataset& data,
                           const TrainConfig& cfg);

// PGD adversarial training with representation memory banks; the structure
// term aligns natural-bank neighborhoods with the adversarial embedding.
TrainResult train_adversarial(MlpModel model, const Dataset& data, const TrainConfig& cfg);

// Instance-discrimination pretext: every sample is its own class, scored
// against a unit-norm memory bank at temperature tau.
std::pair<MlpModel, TrainLog> train_pretext(MlpModel encoder, const Dataset& data,
                                            const TrainConfig& cfg);

// The pretext objective for one batch (live encoder logits against the
// constant bank); exposed for gradient verification.
Tensor pretext_loss(const MlpModel& encoder, const Tensor& x,
                    std::span<const std::size_t> sample_ids, const MemoryBank& bank, double tau);

struct MixupBatch {
    RowMatrix x;
    RowMatrix soft_labels;  // rows sum to 1
    double lambda_mix = 0.0;
};

// Convex combination with the given coefficient.
MixupBatch mixup_combine(const RowMatrix& x_i, std::span<const std::size_t> labels_i,
                         const RowMatrix& x_j, std::span<const std::size_t> labels_j,
                         std::size_t num_classes, double lambda_mix);

// lambda_mix ~ Beta(alpha, alpha), then mixup_combine.
MixupBatch mixup_batch(const RowMatrix& x_i, std::span<const std::size_t> labels_i,
                       const RowMatrix& x_j, std::span<const std::size_t> labels_j,
                       std::size_t num_classes, double alpha, std::uint64_t seed);

}  // namespace lsp
