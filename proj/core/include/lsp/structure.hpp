#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lsp/data.hpp"
#include "lsp/model.hpp"
#include "lsp/tensor.hpp"

namespace lsp {

// Exhaustive Euclidean k-NN over a fixed feature matrix. Queries never
// return the anchor itself; ties break toward the smaller id.
class NeighborIndex {
  public:
    static NeighborIndex build(RowMatrix features);

    std::size_t size() const { return features_.rows(); }
    std::size_t dim() const { return features_.cols(); }
    const RowMatrix& features() const { return features_; }

    // The m nearest non-anchor ids, ascending by (distance, id).
    // m >= size() -> ConfigError.
    std::vector<std::size_t> query(std::size_t anchor_id, std::size_t m) const;

    double distance(std::size_t i, std::size_t j) const;
    std::vector<double> distances(std::size_t anchor_id,
                                  std::span<const std::size_t> ids) const;

  private:
    RowMatrix features_;
};

// Approximate input-space metric: Euclidean distance between extractor
// features (raw inputs under the identity extractor).
double input_metric(const Extractor& g, std::span<const double> x_i,
                    std::span<const double> x_j);

// Normalized anchor-to-neighbor distance vector; the probability encoding
// of a local neighborhood.
struct StructureVector {
    std::vector<double> values;  // sums to 1
    std::size_t anchor_id = 0;
    std::vector<std::size_t> neighbor_ids;
};

// values[i] = distances[i] / sum(distances). All-zero distances ->
// DegenerateNeighborhoodError; fewer than two -> ConfigError.
StructureVector structure_vector(std::span<const double> distances);

enum class LspKind { kl, cosine, l1, l2 };

LspKind lsp_kind_from_string(const std::string& s);
std::string to_string(LspKind kind);

// Discrepancy between a constant target structure p and a live structure q.
// All four kinds are nonnegative and vanish iff p == q on the simplex. KL
// clamps q at 1e-12 before the log.
Tensor lsp_discrepancy(std::span<const double> p, const Tensor& q, LspKind kind);

struct LspStats {
    std::size_t anchors = 0;
    std::size_t skipped = 0;  // degenerate neighborhoods
};

// Standard-training structure loss: mean over batch anchors of
// D(P_x, Q_x) with P from the frozen extractor-space index and Q from live
// logit distances of the anchor and its m neighbors (one forward pass over
// all involved rows). Degenerate anchors are skipped and counted.
Tensor lsp_loss_standard(const MlpModel& f, const Dataset& train,
                         std::span<const std::size_t> anchor_ids, const NeighborIndex& index,
                         std::size_t m, LspKind kind, LspStats* stats = nullptr);

// As above but with explicit per-anchor neighbor lists (the `global`
// structure ablation passes random ids here).
Tensor lsp_loss_with_neighbors(const MlpModel& f, const Dataset& train,
                               std::span<const std::size_t> anchor_ids,
                               const std::vector<std::vector<std::size_t>>& neighbors,
                               const RowMatrix& p_features, LspKind kind,
                               LspStats* stats = nullptr);

// Per-sample unit-norm representation store with momentum updates:
// row <- normalize((1-mu)*row + mu*normalize(rep)).
class MemoryBank {
  public:
    MemoryBank() = default;

    // Gaussian random rows, unit-normalized. momentum in (0,1].
    static MemoryBank init(std::size_t n, std::size_t k, double momentum, std::uint64_t seed);

    std::size_t size() const { return rows_.rows(); }
    std::size_t dim() const { return rows_.cols(); }
    double momentum() const { return momentum_; }
    const RowMatrix& rows() const { return rows_; }

    // reps row i refreshes bank row ids[i]; zero-norm reps -> NumericError.
    void update(std::span<const std::size_t> ids, const RowMatrix& reps);

    void save(const std::filesystem::path& path) const;
    static MemoryBank load(const std::filesystem::path& path);

  private:
    RowMatrix rows_;
    double momentum_ = 0.5;
};

// Adversarial-training structure loss: neighbors mined from the natural
// bank, target structure from natural-bank distances, live structure from
// the anchor's normalized adversarial representation against adversarial
// bank rows. `adv_logits` are the live logits of the adversarial batch;
// `sample_ids` are bank row ids of the batch.
Tensor lsp_loss_adversarial(const Tensor& adv_logits, std::span<const std::size_t> sample_ids,
                            const MemoryBank& nat_bank, const MemoryBank& adv_bank,
                            std::size_t m, LspKind kind, LspStats* stats = nullptr);

// Mean over anchors of the fraction of m nearest neighbors sharing the
// anchor's label.
double neighbor_purity(const NeighborIndex& index, std::span<const std::size_t> labels,
                       std::size_t m);
double neighbor_purity(const MemoryBank& bank, std::span<const std::size_t> labels,
                       std::size_t m);

}  // namespace lsp
