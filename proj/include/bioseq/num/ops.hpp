#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bioseq/num/tensor.hpp"

namespace bioseq::num {

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// x[T,in] * w[in,out] (+ b[out])
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = {});
// Batched a[B,m,k] * b[B,k,n]; with trans_b, b is [B,n,k]. Result scaled by alpha.
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false, float alpha = 1.0f);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
// [T, H*D] -> [H, T, D] and back.
Tensor split_heads(const Tensor& x, std::size_t heads);
Tensor merge_heads(const Tensor& x);

// ---- element-wise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float s);
// Broadcast a vector over the last dimension.
Tensor add_row(const Tensor& x, const Tensor& row);
Tensor mul_row(const Tensor& x, const Tensor& row);
Tensor exp(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// ---- indexing ---------------------------------------------------------------

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);
// Copy of x[T,d] with the listed rows replaced by row[d].
Tensor replace_rows(const Tensor& x, std::span<const std::size_t> rows, const Tensor& row);

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean of the first n_valid rows of x[T,d] -> [1,d].
Tensor mean_rows(const Tensor& x, std::size_t n_valid);

// ---- normalization ------------------------------------------------------------

// Softmax over the last dimension.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
Tensor rmsnorm(const Tensor& x, const Tensor& gain, float eps = 1e-5f);
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps = 1e-5f);
// Per-channel normalization of x[T,C] over time, statistics taken from the
// first valid_rows rows only (rows past that are normalized with the same
// statistics but do not influence them).
Tensor group_norm_time(const Tensor& x, const Tensor& gain, const Tensor& bias, std::size_t valid_rows,
                       float eps = 1e-5f);

// ---- convolution --------------------------------------------------------------

struct Conv1dOptions {
    std::size_t stride = 1;
    std::size_t groups = 1;
    // Left-pad by kernel-1 so output t only sees inputs <= t*stride.
    bool causal = false;
};

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride, bool causal);

// x[T,Cin], w[Cout, Cin/groups, K], bias[Cout] (optional) -> [T_out, Cout]
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv1dOptions& opt);

// ---- losses -------------------------------------------------------------------

// Mean negative log-likelihood of targets under softmax(logits) rows.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);
// Mean over all elements of binary cross-entropy with logits.
Tensor bce_with_logits(const Tensor& logits, std::span<const float> targets);

}  // namespace bioseq::num
