#pragma once

#include <limits>
#include <span>
#include <vector>

#include "lsp/tape.hpp"
#include "lsp/tensor.hpp"

namespace lsp {

// Differentiable primitives. Every op validates shapes, checks its output
// for non-finite entries (NumericError) and records a backward closure on
// the active tape when any input is live.
//
// Broadcasting is deliberately narrow: `add`/`sub` accept a [k] right-hand
// side against an [n,k] left-hand side (replicated over the leading batch
// axis) and `add`/`sub`/`mul`/`div` accept a scalar right-hand side.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor offset(const Tensor& a, double c);

Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);    // NumericError on non-positive entries
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);

Tensor sum(const Tensor& a);    // -> scalar
Tensor mean(const Tensor& a);   // -> scalar
Tensor l2_norm(const Tensor& a);        // Euclidean norm of all entries -> scalar
Tensor l2_norm_rows(const Tensor& a);   // [n,k] -> [n]

Tensor softmax(const Tensor& a);        // over the last axis; rows sum to 1
Tensor clamp(const Tensor& a, double lo, double hi);
inline Tensor clamp_min(const Tensor& a, double lo) {
    return clamp(a, lo, std::numeric_limits<double>::infinity());
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> ids);
Tensor normalize_rows(const Tensor& a);  // unit L2 per row; NumericError on zero rows
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);       // [n,k] -> [k,n]

}  // namespace lsp
