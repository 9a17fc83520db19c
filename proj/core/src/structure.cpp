#include "lsp/structure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "lsp/ops.hpp"
#include "lsp/serialize.hpp"

namespace lsp {

namespace {
constexpr char kBankMagic[4] = {'L', 'S', 'P', 'B'};
constexpr std::uint32_t kBankVersion = 1;
constexpr double kKlClamp = 1e-12;

std::vector<std::size_t> knn_scan(const RowMatrix& feats, std::size_t anchor_id, std::size_t m) {
    const std::size_t n = feats.rows();
    if (anchor_id >= n)
        throw ConfigError("knn_query: anchor id " + std::to_string(anchor_id) + " out of range");
    if (m >= n)
        throw ConfigError("knn_query: m=" + std::to_string(m) + " must be below N=" +
                          std::to_string(n));
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        if (j == anchor_id) continue;
        cand.emplace_back(euclidean(feats.row(anchor_id), feats.row(j)), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(m), cand.end());
    std::vector<std::size_t> ids(m);
    for (std::size_t i = 0; i < m; ++i) ids[i] = cand[i].second;
    return ids;
}

}  // namespace

NeighborIndex NeighborIndex::build(RowMatrix features) {
    if (features.rows() == 0) throw ConfigError("NeighborIndex: empty feature matrix");
    NeighborIndex idx;
    idx.features_ = std::move(features);
    return idx;
}

std::vector<std::size_t> NeighborIndex::query(std::size_t anchor_id, std::size_t m) const {
    return knn_scan(features_, anchor_id, m);
}

double NeighborIndex::distance(std::size_t i, std::size_t j) const {
    return euclidean(features_.row(i), features_.row(j));
}

std::vector<double> NeighborIndex::distances(std::size_t anchor_id,
                                             std::span<const std::size_t> ids) const {
    std::vector<double> out;
    out.reserve(ids.size());
    for (std::size_t j : ids) out.push_back(distance(anchor_id, j));
    return out;
}

double input_metric(const Extractor& g, std::span<const double> x_i,
                    std::span<const double> x_j) {
    if (x_i.size() != x_j.size())
        throw ShapeError("input_metric: dimension mismatch " + std::to_string(x_i.size()) +
                         " vs " + std::to_string(x_j.size()));
    if (!g.has_value()) return euclidean(x_i, x_j);
    RowMatrix pair(2, x_i.size());
    std::copy(x_i.begin(), x_i.end(), pair.row(0).begin());
    std::copy(x_j.begin(), x_j.end(), pair.row(1).begin());
    const Tensor feats = g->logits(Tensor::from_matrix(pair));
    RowMatrix fm = feats.to_matrix();
    return euclidean(fm.row(0), fm.row(1));
}

StructureVector structure_vector(std::span<const double> distances) {
    if (distances.size() < 2)
        throw ConfigError("structure_vector: need at least 2 neighbors, got " +
                          std::to_string(distances.size()));
    double s = 0.0;
    for (double d : distances) {
        if (d < 0.0) throw ConfigError("structure_vector: negative distance");
        s += d;
    }
    if (s <= 0.0)
        throw DegenerateNeighborhoodError(
            "structure_vector: all neighbor distances are zero");
    StructureVector v;
    v.values.reserve(distances.size());
    for (double d : distances) v.values.push_back(d / s);
    return v;
}

LspKind lsp_kind_from_string(const std::string& s) {
    if (s == "kl") return LspKind::kl;
    if (s == "cosine") return LspKind::cosine;
    if (s == "l1") return LspKind::l1;
    if (s == "l2") return LspKind::l2;
    throw ConfigError("unknown lsp kind '" + s + "' (expected kl|cosine|l1|l2)");
}

std::string to_string(LspKind kind) {
    switch (kind) {
        case LspKind::kl: return "kl";
        case LspKind::cosine: return "cosine";
        case LspKind::l1: return "l1";
        case LspKind::l2: return "l2";
    }
    return "?";
}

Tensor lsp_discrepancy(std::span<const double> p, const Tensor& q, LspKind kind) {
    if (q.rank() != 1 || q.shape()[0] != p.size())
        throw ShapeError("lsp_discrepancy: P length " + std::to_string(p.size()) +
                         " vs Q shape " + shape_str(q.shape()));
    const Tensor p_t = Tensor::row_vector(p);
    switch (kind) {
        case LspKind::kl: {
            double self = 0.0;
            for (double pi : p)
                if (pi > 0.0) self += pi * std::log(pi);
            const Tensor cross = sum(mul(log(clamp_min(q, kKlClamp)), p_t));
            return offset(scale(cross, -1.0), self);
        }
        case LspKind::cosine: {
            double pn = 0.0;
            for (double pi : p) pn += pi * pi;
            pn = std::sqrt(pn);
            const Tensor dot = sum(mul(q, p_t));
            const Tensor denom = scale(l2_norm(q), pn);
            return offset(scale(divide(dot, denom), -1.0), 1.0);
        }
        case LspKind::l1: return mean(abs(sub(q, p_t)));
        case LspKind::l2: return mean(square(sub(q, p_t)));
    }
    throw ConfigError("lsp_discrepancy: invalid kind");
}

Tensor lsp_loss_with_neighbors(const MlpModel& f, const Dataset& train,
                               std::span<const std::size_t> anchor_ids,
                               const std::vector<std::vector<std::size_t>>& neighbors,
                               const RowMatrix& p_features, LspKind kind, LspStats* stats) {
    if (neighbors.size() != anchor_ids.size())
        throw ShapeError("lsp_loss: neighbor lists do not match anchors");
    LspStats local;
    local.anchors = anchor_ids.size();

    // Target structures first; degenerate anchors never enter the forward.
    struct Kept {
        std::size_t anchor;
        const std::vector<std::size_t>* nbs;
        StructureVector p;
    };
    std::vector<Kept> kept;
    for (std::size_t i = 0; i < anchor_ids.size(); ++i) {
        std::vector<double> dists;
        dists.reserve(neighbors[i].size());
        for (std::size_t j : neighbors[i])
            dists.push_back(euclidean(p_features.row(anchor_ids[i]), p_features.row(j)));
        try {
            kept.push_back({anchor_ids[i], &neighbors[i], structure_vector(dists)});
        } catch (const DegenerateNeighborhoodError&) {
            ++local.skipped;
        }
    }
    if (stats) *stats = local;
    if (kept.empty()) return Tensor::scalar(0.0);

    const std::size_t m = kept.front().nbs->size();
    std::vector<std::size_t> row_ids;
    row_ids.reserve(kept.size() * (1 + m));
    for (const Kept& k : kept) {
        row_ids.push_back(k.anchor);
        row_ids.insert(row_ids.end(), k.nbs->begin(), k.nbs->end());
    }
    const Tensor x = Tensor::from_rows(train.features, row_ids);
    const Tensor logits = f.logits(x);
    const std::size_t c = logits.cols();

    Tensor total = Tensor::scalar(0.0);
    std::size_t contributing = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const std::size_t base = i * (1 + m);
        std::vector<std::size_t> arow{base};
        std::vector<std::size_t> nrows(m);
        for (std::size_t j = 0; j < m; ++j) nrows[j] = base + 1 + j;
        const Tensor anchor = reshape(gather_rows(logits, arow), Shape{c});
        const Tensor diffs = sub(gather_rows(logits, nrows), anchor);
        const Tensor dvec = l2_norm_rows(diffs);
        const Tensor s = sum(dvec);
        if (s.item() <= 0.0) {  // all logit distances collapsed
            ++local.skipped;
            continue;
        }
        total = add(total, lsp_discrepancy(kept[i].p.values, divide(dvec, s), kind));
        ++contributing;
    }
    if (stats) *stats = local;
    if (contributing == 0) return Tensor::scalar(0.0);
    return scale(total, 1.0 / static_cast<double>(contributing));
}

Tensor lsp_loss_standard(const MlpModel& f, const Dataset& train,
                         std::span<const std::size_t> anchor_ids, const NeighborIndex& index,
                         std::size_t m, LspKind kind, LspStats* stats) {
    std::vector<std::vector<std::size_t>> neighbors;
    neighbors.reserve(anchor_ids.size());
    for (std::size_t a : anchor_ids) neighbors.push_back(index.query(a, m));
    return lsp_loss_with_neighbors(f, train, anchor_ids, neighbors, index.features(), kind,
                                   stats);
}

MemoryBank MemoryBank::init(std::size_t n, std::size_t k, double momentum, std::uint64_t seed) {
    if (n == 0 || k == 0) throw ConfigError("bank_init: empty bank");
    if (!(momentum > 0.0 && momentum <= 1.0))
        throw ConfigError("bank_init: momentum must be in (0,1]");
    MemoryBank b;
    b.momentum_ = momentum;
    b.rows_ = RowMatrix(n, k);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        auto row = b.rows_.row(i);
        for (double& x : row) {
            x = gauss(gen);
            s += x * x;
        }
        s = std::sqrt(s);
        if (s == 0.0) s = 1.0;
        for (double& x : row) x /= s;
    }
    return b;
}

void MemoryBank::update(std::span<const std::size_t> ids, const RowMatrix& reps) {
    if (reps.rows() != ids.size() || reps.cols() != dim())
        throw ShapeError("bank_update: representation matrix shape mismatch");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= size())
            throw ConfigError("bank_update: id " + std::to_string(ids[i]) + " out of range");
        auto rep = reps.row(i);
        double rn = 0.0;
        for (double x : rep) rn += x * x;
        rn = std::sqrt(rn);
        if (rn == 0.0 || !std::isfinite(rn))
            throw NumericError("bank_update: zero or non-finite representation norm");
        auto row = rows_.row(ids[i]);
        if (momentum_ == 1.0) {  // row <- normalize(rep) exactly
            for (std::size_t j = 0; j < row.size(); ++j) row[j] = rep[j] / rn;
            continue;
        }
        double vn = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] = (1.0 - momentum_) * row[j] + momentum_ * rep[j] / rn;
            vn += row[j] * row[j];
        }
        vn = std::sqrt(vn);
        if (vn == 0.0) throw NumericError("bank_update: update cancelled the stored row");
        for (double& x : row) x /= vn;
    }
}

void MemoryBank::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open bank file for writing: " + path.string());
    io::write_header(os, kBankMagic, kBankVersion);
    io::write_u64(os, size());
    io::write_u64(os, dim());
    io::write_f64(os, momentum_);
    io::write_f64_block(os, rows_.data());
    if (!os) throw FormatError("failed writing bank file: " + path.string());
}

MemoryBank MemoryBank::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open bank file: " + path.string());
    io::check_header(is, kBankMagic, kBankVersion, "memory bank " + path.string());
    const std::uint64_t n = io::read_u64(is);
    const std::uint64_t k = io::read_u64(is);
    MemoryBank b;
    b.momentum_ = io::read_f64(is);
    b.rows_ = RowMatrix(n, k);
    io::read_f64_block(is, b.rows_.data());
    if (!is) throw FormatError("memory bank " + path.string() + ": truncated data");
    return b;
}

Tensor lsp_loss_adversarial(const Tensor& adv_logits, std::span<const std::size_t> sample_ids,
                            const MemoryBank& nat_bank, const MemoryBank& adv_bank,
                            std::size_t m, LspKind kind, LspStats* stats) {
    if (adv_logits.rank() != 2 || adv_logits.rows() != sample_ids.size())
        throw ShapeError("lsp_loss_adversarial: logits/id mismatch");
    if (nat_bank.size() != adv_bank.size() || nat_bank.dim() != adv_bank.dim())
        throw ShapeError("lsp_loss_adversarial: bank shapes disagree");
    if (adv_logits.cols() != nat_bank.dim())
        throw ShapeError("lsp_loss_adversarial: representation dim does not match banks");

    LspStats local;
    local.anchors = sample_ids.size();
    const std::size_t c = nat_bank.dim();
    Tensor total = Tensor::scalar(0.0);
    std::size_t contributing = 0;

    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        const std::size_t anchor = sample_ids[i];
        const auto nbs = knn_scan(nat_bank.rows(), anchor, m);

        std::vector<double> p_dists;
        p_dists.reserve(m);
        for (std::size_t j : nbs)
            p_dists.push_back(euclidean(nat_bank.rows().row(anchor), nat_bank.rows().row(j)));
        StructureVector p;
        try {
            p = structure_vector(p_dists);
        } catch (const DegenerateNeighborhoodError&) {
            ++local.skipped;
            continue;
        }

        std::vector<std::size_t> arow{i};
        const Tensor rep =
            reshape(normalize_rows(gather_rows(adv_logits, arow)), Shape{c});
        const Tensor adv_rows = Tensor::from_rows(adv_bank.rows(), nbs);
        const Tensor dvec = l2_norm_rows(sub(adv_rows, rep));
        const Tensor s = sum(dvec);
        if (s.item() <= 0.0) {
            ++local.skipped;
            continue;
        }
        total = add(total, lsp_discrepancy(p.values, divide(dvec, s), kind));
        ++contributing;
    }
    if (stats) *stats = local;
    if (contributing == 0) return Tensor::scalar(0.0);
    return scale(total, 1.0 / static_cast<double>(contributing));
}

double neighbor_purity(const NeighborIndex& index, std::span<const std::size_t> labels,
                       std::size_t m) {
    if (labels.size() != index.size())
        throw ShapeError("neighbor_purity: label count does not match index");
    double acc = 0.0;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto nbs = index.query(i, m);
        std::size_t same = 0;
        for (std::size_t j : nbs)
            if (labels[j] == labels[i]) ++same;
        acc += static_cast<double>(same) / static_cast<double>(m);
    }
    return acc / static_cast<double>(index.size());
}

double neighbor_purity(const MemoryBank& bank, std::span<const std::size_t> labels,
                       std::size_t m) {
    return neighbor_purity(NeighborIndex::build(bank.rows()), labels, m);
}

}  // namespace lsp
