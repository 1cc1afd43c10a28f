#pragma once

#include <span>
#include <vector>

#include "v2st/numerics/autograd.hpp"

// Differentiable operations on 2-D tensors. Rank-1 inputs are treated as a
// single row. Every op checks shapes and throws ShapeError on mismatch.
namespace v2st::inline V2ST_REAL_NS::ops {

Var matmul(const Var& a, const Var& b);           // [m,k] x [k,n]
Var matmul_nt(const Var& a, const Var& b);        // [m,k] x [n,k]^T
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);              // elementwise
Var scale(const Var& a, Real factor);
Var add_scalar(const Var& a, Real value);
Var mul_scalar(const Var& a, const Var& s);       // s is [1,1]
Var add_row(const Var& a, const Var& row);        // broadcast [1,n] over rows

Var gelu(const Var& a);
Var silu(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);

Var sum(const Var& a);                            // -> [1,1]
Var mean(const Var& a);                           // -> [1,1]
Var mean_rows(const Var& a);                      // [m,n] -> [1,n]

Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int begin, int end);
Var slice_cols(const Var& a, int begin, int end);
Var repeat_row(const Var& row, int times);
Var gather_rows(const Var& table, std::span<const int> ids);

// y = x / sqrt(mean(x^2) + eps) * gain, per row.
Var rms_norm(const Var& x, const Var& gain, Real eps = Real(1e-5));
Var l2_normalize_rows(const Var& x, Real eps = Real(1e-8));

// Mean of squared differences over all elements.
Var mse(const Var& a, const Var& b);

}  // namespace v2st::inline V2ST_REAL_NS::ops
