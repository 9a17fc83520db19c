#include "lsp/tape.hpp"

namespace lsp {

namespace {
thread_local GradTape* g_current = nullptr;
}

std::vector<double>& GradAccumulator::get(const Tensor& t) {
    auto it = buffers_.find(t.id());
    if (it == buffers_.end()) {
        it = buffers_.emplace(t.id(), std::vector<double>(t.size(), 0.0)).first;
        shapes_.emplace(t.id(), t.shape());
    }
    return it->second;
}

const std::vector<double>* GradAccumulator::find(std::uint64_t id) const {
    auto it = buffers_.find(id);
    return it == buffers_.end() ? nullptr : &it->second;
}

Tensor GradMap::grad_for(const Tensor& t) const {
    auto it = grads_.find(t.id());
    if (it == grads_.end()) return Tensor::zeros(t.shape());
    return Tensor(shapes_.at(t.id()), it->second);
}

bool GradMap::has(const Tensor& t) const { return grads_.count(t.id()) > 0; }

GradTape::Scope::Scope(GradTape* tape) : prev_(g_current) { g_current = tape; }
GradTape::Scope::~Scope() { g_current = prev_; }

GradTape::~GradTape() {
    if (g_current == this) g_current = nullptr;
}

GradTape* GradTape::current() { return g_current; }

bool GradTape::tracks(const Tensor& t) const {
    return t.requires_grad() || produced_.count(t.id()) > 0;
}

void GradTape::record(const Tensor& output, BackwardFn backward) {
    records_.push_back({output.id(), std::move(backward)});
    produced_.insert(output.id());
}

GradMap GradTape::backward(const Tensor& loss) {
    if (loss.size() != 1 || loss.rank() != 0)
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));

    GradAccumulator acc;
    GradMap out;
    if (produced_.count(loss.id()) == 0) {
        // Loss is a constant w.r.t. everything on this tape; all gradients
        // are zero and grad_for() materializes them on demand.
        return out;
    }

    acc.get(loss)[0] = 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        const std::vector<double>* g = acc.find(it->output_id);
        if (!g) continue;  // output not on the path from loss
        // Copy: the closure may create/rehash buffers while reading g.
        std::vector<double> gout = *g;
        it->backward(gout, acc);
    }

    out.grads_ = std::move(acc.buffers_);
    out.shapes_ = std::move(acc.shapes_);
    return out;
}

}  // namespace lsp
