#pragma once

#include <cstddef>

namespace bioseq::num {

// C[m,n] = alpha * op(A)[m,k] * op(B)[k,n] + beta * C, row-major with leading
// dimensions lda/ldb/ldc. op(X) is X or X^T per the trans flags.
//
// Every output element accumulates its k products in ascending k order, so a
// row of C does not depend on m or n. Callers rely on this for padding
// invariance and for bit-exact reproducibility.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
          std::size_t lda, const float* b, std::size_t ldb, float beta, float* c, std::size_t ldc);

}  // namespace bioseq::num
