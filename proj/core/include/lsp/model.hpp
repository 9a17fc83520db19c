#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsp/tensor.hpp"

namespace lsp {

// Row-wise class prediction from a forward pass. The raw logits are the
// output embedding the structure losses operate on; probabilities are the
// softmax of the logits.
struct Prediction {
    Tensor logits;         // [batch, C]
    Tensor probabilities;  // [batch, C], rows sum to 1
    std::vector<std::size_t> predicted_label;
};

// Fully connected classifier: ReLU on hidden layers, identity on the output
// layer. Weights are stored [in, out] so a forward step is x*W + b.
class MlpModel {
  public:
    MlpModel() = default;

    // Gaussian init scaled by 1/sqrt(fan_in), zero biases, deterministic
    // per seed. Throws ConfigError for fewer than two dims or any dim == 0.
    static MlpModel init(std::vector<std::size_t> layer_dims, std::uint64_t seed);

    const std::vector<std::size_t>& layer_dims() const { return dims_; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    std::size_t num_layers() const { return weights_.size(); }

    Tensor logits(const Tensor& x) const;  // x: [batch, input_dim]
    Prediction forward(const Tensor& x) const;

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;

    const Tensor& weight(std::size_t layer) const { return weights_[layer]; }
    const Tensor& bias(std::size_t layer) const { return biases_[layer]; }
    void set_weight(std::size_t layer, Tensor w);
    void set_bias(std::size_t layer, Tensor b);

    void save(const std::filesystem::path& path) const;
    static MlpModel load(const std::filesystem::path& path);

  private:
    std::vector<std::size_t> dims_;
    std::vector<Tensor> weights_;  // [dims[i], dims[i+1]], requires_grad
    std::vector<Tensor> biases_;   // [dims[i+1]], requires_grad
};

// Mean over the batch of -ln(probability of the true class). Probabilities
// are floored at 1e-300 inside the log. Out-of-range labels -> ConfigError.
Tensor cross_entropy(const Prediction& pred, std::span<const std::size_t> labels);

// Soft-label variant used by the mixup baseline; each row of `soft_labels`
// must be a distribution over the C classes.
Tensor cross_entropy_soft(const Prediction& pred, const RowMatrix& soft_labels);

// Optional feature extractor: a pretrained encoder, or the identity map on
// raw inputs when absent.
using Extractor = std::optional<MlpModel>;

// g-features of a dataset matrix: encoder logits, or a copy of x for the
// identity extractor.
RowMatrix extract_features(const Extractor& g, const RowMatrix& x);

}  // namespace lsp
