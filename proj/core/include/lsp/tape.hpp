#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lsp/tensor.hpp"

namespace lsp {

// Gradient buffers keyed by tensor id, filled during tape replay.
class GradAccumulator {
  public:
    // Returns the buffer for t, created zero-filled on first access.
    std::vector<double>& get(const Tensor& t);
    const std::vector<double>* find(std::uint64_t id) const;

  private:
    friend class GradTape;
    std::unordered_map<std::uint64_t, std::vector<double>> buffers_;
    std::unordered_map<std::uint64_t, Shape> shapes_;
};

// Result of a backward pass. Tensors that never appeared on the loss path
// get a zero gradient.
class GradMap {
  public:
    Tensor grad_for(const Tensor& t) const;
    bool has(const Tensor& t) const;

  private:
    friend class GradTape;
    std::unordered_map<std::uint64_t, std::vector<double>> grads_;
    std::unordered_map<std::uint64_t, Shape> shapes_;
};

// Records one forward pass worth of primitive ops. A tape is owned by one
// logical step: activate it, run the forward, call backward once, drop it.
class GradTape {
  public:
    using BackwardFn = std::function<void(const std::vector<double>& out_grad, GradAccumulator&)>;

    GradTape() = default;
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;
    ~GradTape();

    class Scope {
      public:
        explicit Scope(GradTape* tape);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

      private:
        GradTape* prev_;
    };

    [[nodiscard]] Scope activate() { return Scope(this); }
    static GradTape* current();

    // A tensor is live if it is a requires_grad leaf or was produced by a
    // recorded op on this tape.
    bool tracks(const Tensor& t) const;
    void record(const Tensor& output, BackwardFn backward);

    // Replays the tape in reverse, seeding d(loss)/d(loss) = 1.
    GradMap backward(const Tensor& loss);

    std::size_t num_records() const { return records_.size(); }

  private:
    struct Record {
        std::uint64_t output_id;
        BackwardFn backward;
    };
    std::vector<Record> records_;
    std::unordered_set<std::uint64_t> produced_;
};

}  // namespace lsp
