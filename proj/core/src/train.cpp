#include "lsp/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "lsp/ops.hpp"
#include "lsp/rng.hpp"

namespace lsp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double LrSchedule::at(int epoch) const {
    double lr = initial;
    for (const auto& [e, div] : drops)
        if (epoch >= e) lr /= div;
    return lr;
}

StructureMode structure_mode_from_string(const std::string& s) {
    if (s == "local") return StructureMode::local;
    if (s == "global") return StructureMode::global;
    if (s == "off") return StructureMode::off;
    throw ConfigError("unknown structure mode '" + s + "' (expected local|global|off)");
}

std::string to_string(StructureMode m) {
    switch (m) {
        case StructureMode::local: return "local";
        case StructureMode::global: return "global";
        case StructureMode::off: return "off";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
    if (!(lr.initial > 0.0)) throw ConfigError("train: initial learning rate must be positive");
    for (const auto& [e, div] : lr.drops) {
        if (e < 1) throw ConfigError("train: schedule epochs must be positive");
        if (!(div > 0.0)) throw ConfigError("train: schedule divisors must be positive");
    }
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
    if (lambda < 0.0) throw ConfigError("train: lambda must be nonnegative");
    if (m < 2) throw ConfigError("train: m must be at least 2");
    if (!(bank_momentum > 0.0 && bank_momentum <= 1.0))
        throw ConfigError("train: bank momentum must be in (0,1]");
    if (mixup_alpha < 0.0) throw ConfigError("train: mixup alpha must be nonnegative");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("train: validation fraction must be in [0,1)");
    if (!(pretext_tau > 0.0)) throw ConfigError("train: pretext temperature must be positive");
}

void TrainLog::to_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open log file for writing: " + path.string());
    out << "epoch,ce,lsp,total,clean_acc,robust_acc,purity,lr\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
    };
    for (const EpochRecord& r : epochs) {
        out << r.epoch;
        put(r.ce);
        put(r.lsp);
        put(r.total);
        put(r.clean_acc);
        put(r.robust_acc);
        put(r.purity);
        put(r.lr);
        out << "\n";
    }
    if (!out) throw FormatError("failed writing log file: " + path.string());
}

TrainLog TrainLog::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open log file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "epoch,ce,lsp,total,clean_acc,robust_acc,purity,lr")
        throw FormatError(path.string() + ": not a training log");
    TrainLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            vals.push_back(std::strtod(cell.c_str(), &end));
            if (end == cell.c_str()) throw FormatError(path.string() + ": malformed log row");
        }
        if (vals.size() != 8) throw FormatError(path.string() + ": malformed log row");
        EpochRecord r;
        r.epoch = static_cast<int>(vals[0]);
        r.ce = vals[1];
        r.lsp = vals[2];
        r.total = vals[3];
        r.clean_acc = vals[4];
        r.robust_acc = vals[5];
        r.purity = vals[6];
        r.lr = vals[7];
        log.epochs.push_back(r);
    }
    return log;
}

void sgd_step(MlpModel& model, const GradMap& grads, double lr, double momentum,
              SgdState& state) {
    auto params = model.parameters();
    const auto names = model.parameter_names();
    if (state.velocity.size() != params.size()) {
        state.velocity.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            state.velocity[i].assign(params[i]->size(), 0.0);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor g = grads.grad_for(*params[i]);
        const Tensor& p = *params[i];
        auto& v = state.velocity[i];
        std::vector<double> np(p.size());
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g[j];
            if (!std::isfinite(gj))
                throw NumericError("sgd_step: non-finite gradient for " + names[i]);
            v[j] = momentum * v[j] + gj;
            np[j] = p[j] - lr * v[j];
        }
        *params[i] = Tensor(p.shape(), std::move(np), true);
    }
}

namespace {

double accuracy(const MlpModel& model, const Dataset& d) {
    if (d.size() == 0) return kNaN;
    const Prediction pred = model.forward(Tensor::from_matrix(d.features));
    std::size_t ok = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (pred.predicted_label[i] == d.labels[i]) ++ok;
    return static_cast<double>(ok) / static_cast<double>(d.size());
}

std::vector<std::size_t> iota_ids(std::size_t n) {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    return ids;
}

// The `global` structure ablation: m uniformly random non-anchor ids per
// anchor, redrawn each epoch.
std::vector<std::vector<std::size_t>> global_neighbors(std::size_t n, std::size_t m, int epoch,
                                                       std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t a = 0; a < n; ++a) {
        auto gen = rng::engine(seed, rng::kGlobalNeighbors,
                               static_cast<std::uint64_t>(epoch) * 1000003ull + a);
        std::uniform_int_distribution<std::size_t> u(0, n - 1);
        auto& ids = out[a];
        while (ids.size() < m) {
            const std::size_t j = u(gen);
            if (j == a || std::find(ids.begin(), ids.end(), j) != ids.end()) continue;
            ids.push_back(j);
        }
    }
    return out;
}

std::vector<std::size_t> labels_of(const Dataset& d, std::span<const std::size_t> ids) {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (std::size_t i : ids) out.push_back(d.labels[i]);
    return out;
}

double validation_robust(const MlpModel& model, const Dataset& val, const TrainConfig& cfg,
                         int epoch) {
    if (val.size() == 0) return kNaN;
    AttackConfig ac = cfg.attack;
    ac.method = AttackMethod::pgd;
    ac.seed = rng::derive(cfg.seed, rng::kEvalAttack, static_cast<std::uint64_t>(epoch));
    return evaluate_robust_accuracy(model, val, ac).robust;
}

}  // namespace

TrainResult train_standard(MlpModel model, const Extractor& g, const Dataset& data,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.adversarial)
        throw ConfigError("train_standard: adversarial config passed to the standard loop");
    cfg.attack.validate();

    auto [tids, vids] = stratified_split(data.labels, cfg.val_fraction, cfg.seed);
    if (tids.empty()) throw ConfigError("train_standard: empty training split");
    const Dataset train = data.subset(tids, "train");
    const Dataset val = data.subset(vids, "val");
    const std::size_t n = train.size();
    if (cfg.early_stopping && val.size() == 0)
        throw ConfigError("train_standard: early stopping requires a validation split");

    const bool structured = cfg.structure != StructureMode::off;
    std::optional<NeighborIndex> index;
    if (structured) {
        if (cfg.m >= n)
            throw ConfigError("train: m=" + std::to_string(cfg.m) +
                              " must be below the training split size " + std::to_string(n));
        index.emplace(NeighborIndex::build(extract_features(g, train.features)));
    }
    const double purity =
        structured ? neighbor_purity(*index, train.labels, cfg.m) : kNaN;
    const auto all_ids = iota_ids(n);

    auto eval_epoch = [&](int epoch, std::size_t skipped) {
        EpochRecord r;
        r.epoch = epoch;
        r.skipped_anchors = skipped;
        r.ce = cross_entropy(model.forward(Tensor::from_matrix(train.features)), train.labels)
                   .item();
        r.lsp = kNaN;
        if (structured) {
            if (cfg.structure == StructureMode::local) {
                r.lsp = lsp_loss_standard(model, train, all_ids, *index, cfg.m, cfg.kind).item();
            } else {
                const auto gnb = global_neighbors(n, cfg.m, epoch, cfg.seed);
                r.lsp = lsp_loss_with_neighbors(model, train, all_ids, gnb, index->features(),
                                                cfg.kind)
                            .item();
            }
        }
        r.total = std::isnan(r.lsp) ? r.ce : r.ce + cfg.lambda * r.lsp;
        r.clean_acc = accuracy(model, val);
        r.robust_acc = validation_robust(model, val, cfg, epoch);
        r.purity = purity;
        r.lr = cfg.lr.at(std::max(epoch, 1));
        return r;
    };

    SgdState sgd;
    TrainLog log;
    log.epochs.push_back(eval_epoch(0, 0));
    MlpModel best = model;
    double best_robust = -std::numeric_limits<double>::infinity();
    if (!std::isnan(log.epochs.back().robust_acc)) best_robust = log.epochs.back().robust_acc;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.lr.at(epoch);
        std::vector<std::size_t> perm = all_ids;
        {
            auto gen = rng::engine(cfg.seed, rng::kShuffle, static_cast<std::uint64_t>(epoch));
            std::shuffle(perm.begin(), perm.end(), gen);
        }
        std::vector<std::vector<std::size_t>> gnb;
        if (cfg.structure == StructureMode::global)
            gnb = global_neighbors(n, cfg.m, epoch, cfg.seed);

        std::size_t skipped = 0;
        std::size_t batch_idx = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_idx) {
            const std::size_t bsz = std::min(cfg.batch_size, n - start);
            const std::vector<std::size_t> bids(perm.begin() + start,
                                                perm.begin() + start + bsz);
            const std::vector<std::size_t> blabels = labels_of(train, bids);

            GradMap grads;
            {
                GradTape tape;
                auto scope = tape.activate();
                Tensor loss;
                if (cfg.mixup_alpha > 0.0) {
                    const std::uint64_t tag =
                        static_cast<std::uint64_t>(epoch) * 1000000ull + batch_idx;
                    std::vector<std::size_t> pair(bsz);
                    std::iota(pair.begin(), pair.end(), std::size_t{0});
                    auto mixgen = rng::engine(cfg.seed, rng::kMixup, 2 * tag);
                    std::shuffle(pair.begin(), pair.end(), mixgen);
                    std::vector<std::size_t> bjds(bsz);
                    for (std::size_t i = 0; i < bsz; ++i) bjds[i] = bids[pair[i]];
                    const auto mixed = mixup_batch(
                        train.features.take_rows(bids), blabels,
                        train.features.take_rows(bjds), labels_of(train, bjds),
                        train.num_classes, cfg.mixup_alpha,
                        rng::derive(cfg.seed, rng::kMixup, 2 * tag + 1));
                    loss = cross_entropy_soft(model.forward(Tensor::from_matrix(mixed.x)),
                                              mixed.soft_labels);
                } else {
                    loss = cross_entropy(
                        model.forward(Tensor::from_rows(train.features, bids)), blabels);
                }
                if (cfg.lambda > 0.0 && structured) {
                    LspStats st;
                    Tensor lsp;
                    if (cfg.structure == StructureMode::local) {
                        lsp = lsp_loss_standard(model, train, bids, *index, cfg.m, cfg.kind,
                                                &st);
                    } else {
                        std::vector<std::vector<std::size_t>> sel;
                        sel.reserve(bsz);
                        for (std::size_t id : bids) sel.push_back(gnb[id]);
                        lsp = lsp_loss_with_neighbors(model, train, bids, sel,
                                                      index->features(), cfg.kind, &st);
                    }
                    skipped += st.skipped;
                    loss = add(loss, scale(lsp, cfg.lambda));
                }
                grads = tape.backward(loss);
            }
            sgd_step(model, grads, lr, cfg.momentum, sgd);
        }

        log.epochs.push_back(eval_epoch(epoch, skipped));
        const double robust = log.epochs.back().robust_acc;
        if (cfg.early_stopping && !std::isnan(robust) && robust > best_robust) {
            best_robust = robust;
            best = model;
        }
    }

    TrainResult res;
    res.model = cfg.early_stopping ? best : std::move(model);
    res.log = std::move(log);
    return res;
}

TrainResult train_adversarial(MlpModel model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    cfg.attack.validate();

    auto [tids, vids] = stratified_split(data.labels, cfg.val_fraction, cfg.seed);
    if (tids.empty()) throw ConfigError("train_adversarial: empty training split");
    const Dataset train = data.subset(tids, "train");
    const Dataset val = data.subset(vids, "val");
    const std::size_t n = train.size();
    if (cfg.m >= n)
        throw ConfigError("train: m=" + std::to_string(cfg.m) +
                          " must be below the training split size " + std::to_string(n));
    if (cfg.early_stopping && val.size() == 0)
        throw ConfigError("train_adversarial: early stopping requires a validation split");

    const bool structured = cfg.structure != StructureMode::off;
    const std::size_t c = model.output_dim();
    MemoryBank nat_bank =
        MemoryBank::init(n, c, cfg.bank_momentum, rng::derive(cfg.seed, rng::kBankNat));
    MemoryBank adv_bank =
        MemoryBank::init(n, c, cfg.bank_momentum, rng::derive(cfg.seed, rng::kBankAdv));
    const auto all_ids = iota_ids(n);

    auto eval_epoch = [&](int epoch, std::size_t skipped) {
        EpochRecord r;
        r.epoch = epoch;
        r.skipped_anchors = skipped;
        AttackConfig ac = cfg.attack;
        ac.seed = rng::derive(cfg.seed, rng::kEvalAttack,
                              1000000ull + static_cast<std::uint64_t>(epoch));
        const RowMatrix adv_all = pgd(model, train.features, train.labels, ac);
        const Prediction pred = model.forward(Tensor::from_matrix(adv_all));
        r.ce = cross_entropy(pred, train.labels).item();
        r.lsp = structured ? lsp_loss_adversarial(pred.logits, all_ids, nat_bank, adv_bank,
                                                  cfg.m, cfg.kind)
                                 .item()
                           : kNaN;
        r.total = std::isnan(r.lsp) ? r.ce : r.ce + cfg.lambda * r.lsp;
        r.clean_acc = accuracy(model, val);
        r.robust_acc = validation_robust(model, val, cfg, epoch);
        r.purity = neighbor_purity(nat_bank, train.labels, cfg.m);
        r.lr = cfg.lr.at(std::max(epoch, 1));
        return r;
    };

    SgdState sgd;
    TrainLog log;
    log.epochs.push_back(eval_epoch(0, 0));
    MlpModel best = model;
    double best_robust = -std::numeric_limits<double>::infinity();
    if (!std::isnan(log.epochs.back().robust_acc)) best_robust = log.epochs.back().robust_acc;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.lr.at(epoch);
        std::vector<std::size_t> perm = all_ids;
        {
            auto gen = rng::engine(cfg.seed, rng::kShuffle, static_cast<std::uint64_t>(epoch));
            std::shuffle(perm.begin(), perm.end(), gen);
        }

        std::size_t skipped = 0;
        std::size_t batch_idx = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_idx) {
            const std::size_t bsz = std::min(cfg.batch_size, n - start);
            const std::vector<std::size_t> bids(perm.begin() + start,
                                                perm.begin() + start + bsz);
            const std::vector<std::size_t> blabels = labels_of(train, bids);
            const RowMatrix xb = train.features.take_rows(bids);

            AttackConfig ac = cfg.attack;
            ac.seed = rng::derive(cfg.seed, rng::kAttack,
                                  static_cast<std::uint64_t>(epoch) * 1000000ull + batch_idx);
            const RowMatrix xadv = pgd(model, xb, blabels, ac);
            const RowMatrix nat_rep = model.logits(Tensor::from_matrix(xb)).to_matrix();

            GradMap grads;
            RowMatrix adv_rep;
            {
                GradTape tape;
                auto scope = tape.activate();
                const Prediction pred = model.forward(Tensor::from_matrix(xadv));
                adv_rep = pred.logits.to_matrix();
                Tensor loss = cross_entropy(pred, blabels);
                if (cfg.lambda > 0.0 && structured) {
                    LspStats st;
                    const Tensor lsp = lsp_loss_adversarial(pred.logits, bids, nat_bank,
                                                            adv_bank, cfg.m, cfg.kind, &st);
                    skipped += st.skipped;
                    loss = add(loss, scale(lsp, cfg.lambda));
                }
                grads = tape.backward(loss);
            }
            sgd_step(model, grads, lr, cfg.momentum, sgd);
            nat_bank.update(bids, nat_rep);
            adv_bank.update(bids, adv_rep);
        }

        log.epochs.push_back(eval_epoch(epoch, skipped));
        const double robust = log.epochs.back().robust_acc;
        if (cfg.early_stopping && !std::isnan(robust) && robust > best_robust) {
            best_robust = robust;
            best = model;
        }
    }

    TrainResult res;
    res.model = cfg.early_stopping ? best : std::move(model);
    res.log = std::move(log);
    res.nat_bank = std::move(nat_bank);
    res.adv_bank = std::move(adv_bank);
    return res;
}

Tensor pretext_loss(const MlpModel& encoder, const Tensor& x,
                    std::span<const std::size_t> sample_ids, const MemoryBank& bank,
                    double tau) {
    if (!(tau > 0.0)) throw ConfigError("pretext_loss: temperature must be positive");
    if (x.rank() != 2 || x.rows() != sample_ids.size())
        throw ShapeError("pretext_loss: batch/id mismatch");
    for (std::size_t id : sample_ids)
        if (id >= bank.size()) throw ConfigError("pretext_loss: sample id out of range");

    const std::size_t b = x.rows(), n = bank.size(), k = bank.dim();
    const Tensor v = normalize_rows(encoder.logits(x));  // [B, k]
    RowMatrix bank_t(k, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) bank_t.at(j, i) = bank.rows().at(i, j);
    const Tensor scores = matmul(v, Tensor::from_matrix(bank_t));  // [B, N]
    const Tensor sm = softmax(scale(scores, 1.0 / tau));
    RowMatrix mask(b, n, 0.0);
    for (std::size_t i = 0; i < b; ++i) mask.at(i, sample_ids[i]) = 1.0;
    return scale(sum(mul(log(clamp_min(sm, 1e-300)), Tensor::from_matrix(mask))),
                 -1.0 / static_cast<double>(b));
}

namespace {

// Samples whose embedding collapsed to the zero vector carry no direction
// for the contrastive objective; they are skipped like degenerate anchors.
std::vector<std::size_t> nonzero_rows(const RowMatrix& reps,
                                      std::span<const std::size_t> ids) {
    std::vector<std::size_t> keep;
    keep.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double s = 0.0;
        for (double v : reps.row(i)) s += v * v;
        if (s > 0.0) keep.push_back(ids[i]);
    }
    return keep;
}

// Rows of `reps` (ordered like `ids`) restricted to the kept sample ids.
RowMatrix encoder_reps(const RowMatrix& reps, std::span<const std::size_t> ids,
                       std::span<const std::size_t> keep) {
    RowMatrix out(keep.size(), reps.cols());
    std::size_t w = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (w < keep.size() && ids[i] == keep[w]) {
            std::copy(reps.row(i).begin(), reps.row(i).end(), out.row(w).begin());
            ++w;
        }
    }
    return out;
}

}  // namespace

std::pair<MlpModel, TrainLog> train_pretext(MlpModel encoder, const Dataset& data,
                                            const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t n = data.size();
    if (n < 2) throw ConfigError("train_pretext: need at least two samples");

    MemoryBank bank = MemoryBank::init(n, encoder.output_dim(), cfg.bank_momentum,
                                       rng::derive(cfg.seed, rng::kBankNat));
    const auto all_ids = iota_ids(n);
    const std::size_t purity_m = std::min(cfg.m, n - 1);

    auto eval_epoch = [&](int epoch) {
        EpochRecord r;
        r.epoch = epoch;
        const RowMatrix feats = encoder.logits(Tensor::from_matrix(data.features)).to_matrix();
        const auto live = nonzero_rows(feats, all_ids);
        r.skipped_anchors = n - live.size();
        r.ce = live.empty()
                   ? kNaN
                   : pretext_loss(encoder, Tensor::from_rows(data.features, live), live,
                                  bank, cfg.pretext_tau)
                         .item();
        r.lsp = kNaN;
        r.total = r.ce;
        r.clean_acc = kNaN;
        r.robust_acc = kNaN;
        r.purity = neighbor_purity(bank, data.labels, purity_m);
        r.lr = cfg.lr.at(std::max(epoch, 1));
        return r;
    };

    SgdState sgd;
    TrainLog log;
    log.epochs.push_back(eval_epoch(0));

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.lr.at(epoch);
        std::vector<std::size_t> perm = all_ids;
        {
            auto gen = rng::engine(cfg.seed, rng::kShuffle, static_cast<std::uint64_t>(epoch));
            std::shuffle(perm.begin(), perm.end(), gen);
        }
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, n - start);
            const std::vector<std::size_t> bids(perm.begin() + start,
                                                perm.begin() + start + bsz);
            const RowMatrix rep =
                encoder.logits(Tensor::from_rows(data.features, bids)).to_matrix();
            const auto live = nonzero_rows(rep, bids);
            if (live.empty()) continue;
            GradMap grads;
            {
                GradTape tape;
                auto scope = tape.activate();
                const Tensor loss = pretext_loss(
                    encoder, Tensor::from_rows(data.features, live), live, bank,
                    cfg.pretext_tau);
                grads = tape.backward(loss);
            }
            sgd_step(encoder, grads, lr, cfg.momentum, sgd);
            bank.update(live, encoder_reps(rep, bids, live));
        }
        log.epochs.push_back(eval_epoch(epoch));
    }
    return {std::move(encoder), std::move(log)};
}

MixupBatch mixup_combine(const RowMatrix& x_i, std::span<const std::size_t> labels_i,
                         const RowMatrix& x_j, std::span<const std::size_t> labels_j,
                         std::size_t num_classes, double lambda_mix) {
    if (x_i.rows() != x_j.rows() || x_i.cols() != x_j.cols())
        throw ShapeError("mixup: pair shapes disagree");
    if (labels_i.size() != x_i.rows() || labels_j.size() != x_j.rows())
        throw ShapeError("mixup: label counts disagree");
    if (lambda_mix < 0.0 || lambda_mix > 1.0)
        throw ConfigError("mixup: lambda must be in [0,1]");
    for (std::size_t y : labels_i)
        if (y >= num_classes) throw ConfigError("mixup: label out of range");
    for (std::size_t y : labels_j)
        if (y >= num_classes) throw ConfigError("mixup: label out of range");

    MixupBatch out;
    out.lambda_mix = lambda_mix;
    out.x = RowMatrix(x_i.rows(), x_i.cols());
    for (std::size_t i = 0; i < out.x.data().size(); ++i)
        out.x.data()[i] = lambda_mix * x_i.data()[i] + (1.0 - lambda_mix) * x_j.data()[i];
    out.soft_labels = RowMatrix(x_i.rows(), num_classes, 0.0);
    for (std::size_t i = 0; i < x_i.rows(); ++i) {
        out.soft_labels.at(i, labels_i[i]) += lambda_mix;
        out.soft_labels.at(i, labels_j[i]) += 1.0 - lambda_mix;
    }
    return out;
}

MixupBatch mixup_batch(const RowMatrix& x_i, std::span<const std::size_t> labels_i,
                       const RowMatrix& x_j, std::span<const std::size_t> labels_j,
                       std::size_t num_classes, double alpha, std::uint64_t seed) {
    if (!(alpha > 0.0)) throw ConfigError("mixup: alpha must be positive");
    std::mt19937_64 gen(seed);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    const double g1 = gamma(gen), g2 = gamma(gen);
    const double lam = (g1 + g2) > 0.0 ? g1 / (g1 + g2) : 0.5;
    return mixup_combine(x_i, labels_i, x_j, labels_j, num_classes, lam);
}

}  // namespace lsp
