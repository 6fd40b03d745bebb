#pragma once

#include <cstddef>

#include "bioseq/num/tensor.hpp"

namespace bioseq::encoder {

using num::Tensor;

// Selective state-space scan with scalar-times-identity decay per head and a
// single B/C group shared by all heads:
//   h_t = exp(dt_t A) h_{t-1} + dt_t B_t x_t^T      (h is [N, P] per head)
//   y_t = C_t^T h_t + D x_t
// x [T, H*P], dt [T, H] (positive), A [H] (negative), B [T, N], C [T, N], D [H]
// -> y [T, H*P].

// Chunked form: within a chunk the output is a masked matmul against the
// decay kernel, and a [N, P] state per head is carried between chunks.
Tensor ssd_chunked(const Tensor& x, const Tensor& dt, const Tensor& A, const Tensor& B, const Tensor& C,
                   const Tensor& D, std::size_t chunk = 64);

// Step-by-step recurrence. Reference implementation; keeps every state.
Tensor ssd_recurrent(const Tensor& x, const Tensor& dt, const Tensor& A, const Tensor& B, const Tensor& C,
                     const Tensor& D);

}  // namespace bioseq::encoder
