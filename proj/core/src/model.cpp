#include "lsp/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "lsp/ops.hpp"
#include "lsp/serialize.hpp"

namespace lsp {

namespace {
constexpr char kModelMagic[4] = {'L', 'S', 'P', 'M'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

MlpModel MlpModel::init(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2)
        throw ConfigError("init_model: need at least input and output dims, got " +
                          std::to_string(layer_dims.size()));
    for (std::size_t d : layer_dims)
        if (d == 0) throw ConfigError("init_model: layer dims must be positive");

    MlpModel m;
    m.dims_ = std::move(layer_dims);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < m.dims_.size(); ++l) {
        const std::size_t fan_in = m.dims_[l], fan_out = m.dims_[l + 1];
        const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> w(fan_in * fan_out);
        for (double& x : w) x = gauss(rng) * s;
        m.weights_.emplace_back(Shape{fan_in, fan_out}, std::move(w), true);
        m.biases_.emplace_back(Tensor::zeros(Shape{fan_out}, true));
    }
    return m;
}

Tensor MlpModel::logits(const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != input_dim())
        throw ShapeError("forward: input shape " + shape_str(x.shape()) + " does not match dim " +
                         std::to_string(input_dim()));
    Tensor h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = add(matmul(h, weights_[l]), biases_[l]);
        if (l + 1 < weights_.size()) h = relu(h);
    }
    return h;
}

Prediction MlpModel::forward(const Tensor& x) const {
    Prediction p;
    p.logits = logits(x);
    p.probabilities = softmax(p.logits);
    const std::size_t n = p.logits.rows(), c = p.logits.cols();
    p.predicted_label.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (p.logits.at2(i, j) > p.logits.at2(i, best)) best = j;
        p.predicted_label[i] = best;
    }
    return p;
}

std::vector<Tensor*> MlpModel::parameters() {
    std::vector<Tensor*> ps;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ps.push_back(&weights_[l]);
        ps.push_back(&biases_[l]);
    }
    return ps;
}

std::vector<const Tensor*> MlpModel::parameters() const {
    std::vector<const Tensor*> ps;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ps.push_back(&weights_[l]);
        ps.push_back(&biases_[l]);
    }
    return ps;
}

std::vector<std::string> MlpModel::parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        names.push_back("layer" + std::to_string(l) + ".weight");
        names.push_back("layer" + std::to_string(l) + ".bias");
    }
    return names;
}

void MlpModel::set_weight(std::size_t layer, Tensor w) {
    if (w.shape() != weights_[layer].shape())
        throw ShapeError("set_weight: shape mismatch for layer " + std::to_string(layer));
    weights_[layer] = std::move(w);
}

void MlpModel::set_bias(std::size_t layer, Tensor b) {
    if (b.shape() != biases_[layer].shape())
        throw ShapeError("set_bias: shape mismatch for layer " + std::to_string(layer));
    biases_[layer] = std::move(b);
}

void MlpModel::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open model file for writing: " + path.string());
    io::write_header(os, kModelMagic, kModelVersion);
    io::write_u32(os, static_cast<std::uint32_t>(dims_.size()));
    for (std::size_t d : dims_) io::write_u64(os, d);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        io::write_f64_block(os, weights_[l].data());
        io::write_f64_block(os, biases_[l].data());
    }
    if (!os) throw FormatError("failed writing model file: " + path.string());
}

MlpModel MlpModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open model file: " + path.string());
    io::check_header(is, kModelMagic, kModelVersion, "model checkpoint " + path.string());
    const std::uint32_t ndims = io::read_u32(is);
    if (ndims < 2) throw FormatError("model checkpoint: invalid layer count");
    MlpModel m;
    m.dims_.resize(ndims);
    for (auto& d : m.dims_) d = io::read_u64(is);
    for (std::size_t l = 0; l + 1 < m.dims_.size(); ++l) {
        std::vector<double> w(m.dims_[l] * m.dims_[l + 1]);
        io::read_f64_block(is, w);
        std::vector<double> b(m.dims_[l + 1]);
        io::read_f64_block(is, b);
        m.weights_.emplace_back(Shape{m.dims_[l], m.dims_[l + 1]}, std::move(w), true);
        m.biases_.emplace_back(Shape{m.dims_[l + 1]}, std::move(b), true);
    }
    return m;
}

namespace {

RowMatrix one_hot(std::span<const std::size_t> labels, std::size_t c) {
    RowMatrix m(labels.size(), c, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) m.at(i, labels[i]) = 1.0;
    return m;
}

}  // namespace

Tensor cross_entropy(const Prediction& pred, std::span<const std::size_t> labels) {
    const std::size_t n = pred.probabilities.rows(), c = pred.probabilities.cols();
    if (labels.size() != n)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    for (std::size_t y : labels)
        if (y >= c)
            throw ConfigError("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                              std::to_string(c) + ")");
    const Tensor mask = Tensor::from_matrix(one_hot(labels, c));
    const Tensor logp = log(clamp_min(pred.probabilities, 1e-300));
    return scale(sum(mul(logp, mask)), -1.0 / static_cast<double>(n));
}

Tensor cross_entropy_soft(const Prediction& pred, const RowMatrix& soft_labels) {
    const std::size_t n = pred.probabilities.rows(), c = pred.probabilities.cols();
    if (soft_labels.rows() != n || soft_labels.cols() != c)
        throw ShapeError("cross_entropy_soft: label matrix shape mismatch");
    const Tensor mask = Tensor::from_matrix(soft_labels);
    const Tensor logp = log(clamp_min(pred.probabilities, 1e-300));
    return scale(sum(mul(logp, mask)), -1.0 / static_cast<double>(n));
}

RowMatrix extract_features(const Extractor& g, const RowMatrix& x) {
    if (!g.has_value()) return x;
    return g->logits(Tensor::from_matrix(x)).to_matrix();
}

}  // namespace lsp
