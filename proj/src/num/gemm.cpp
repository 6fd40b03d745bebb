#include "bioseq/num/gemm.hpp"

#include <algorithm>
#include <vector>

namespace bioseq::num {

namespace {

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 512;

// C[m,n] += A[m,k] * B[k,n]; A element (i,p) at a[i*sa_i + p*sa_p].
void kernel(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t sa_i, std::size_t sa_p,
            const float* b, std::size_t ldb, float* c, std::size_t ldc) {
    for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
        const std::size_t jn = std::min(kColBlock, n - j0);
        std::size_t i = 0;
        for (; i + kRowBlock <= m; i += kRowBlock) {
            float* c0 = c + (i + 0) * ldc + j0;
            float* c1 = c + (i + 1) * ldc + j0;
            float* c2 = c + (i + 2) * ldc + j0;
            float* c3 = c + (i + 3) * ldc + j0;
            for (std::size_t p = 0; p < k; ++p) {
                const float a0 = a[(i + 0) * sa_i + p * sa_p];
                const float a1 = a[(i + 1) * sa_i + p * sa_p];
                const float a2 = a[(i + 2) * sa_i + p * sa_p];
                const float a3 = a[(i + 3) * sa_i + p * sa_p];
                const float* bp = b + p * ldb + j0;
                for (std::size_t j = 0; j < jn; ++j) {
                    const float bv = bp[j];
                    c0[j] += a0 * bv;
                    c1[j] += a1 * bv;
                    c2[j] += a2 * bv;
                    c3[j] += a3 * bv;
                }
            }
        }
        for (; i < m; ++i) {
            float* ci = c + i * ldc + j0;
            for (std::size_t p = 0; p < k; ++p) {
                const float av = a[i * sa_i + p * sa_p];
                const float* bp = b + p * ldb + j0;
                for (std::size_t j = 0; j < jn; ++j) ci[j] += av * bp[j];
            }
        }
    }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
          std::size_t lda, const float* b, std::size_t ldb, float beta, float* c, std::size_t ldc) {
    if (m == 0 || n == 0) return;

    std::vector<float> bt;
    const float* bp = b;
    std::size_t ldbp = ldb;
    if (trans_b && k > 0) {
        bt.resize(k * n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * ldb + p];
        }
        bp = bt.data();
        ldbp = n;
    }
    const std::size_t sa_i = trans_a ? 1 : lda;
    const std::size_t sa_p = trans_a ? lda : 1;

    if (alpha == 1.0f) {
        for (std::size_t i = 0; i < m; ++i) {
            float* ci = c + i * ldc;
            if (beta == 0.0f) {
                std::fill_n(ci, n, 0.0f);
            } else if (beta != 1.0f) {
                for (std::size_t j = 0; j < n; ++j) ci[j] *= beta;
            }
        }
        if (k > 0) kernel(m, n, k, a, sa_i, sa_p, bp, ldbp, c, ldc);
        return;
    }

    // General alpha: accumulate separately so alpha applies once per element.
    std::vector<float> acc(m * n, 0.0f);
    if (k > 0) kernel(m, n, k, a, sa_i, sa_p, bp, ldbp, acc.data(), n);
    for (std::size_t i = 0; i < m; ++i) {
        float* ci = c + i * ldc;
        const float* ai = acc.data() + i * n;
        if (beta == 0.0f) {
            for (std::size_t j = 0; j < n; ++j) ci[j] = alpha * ai[j];
        } else {
            for (std::size_t j = 0; j < n; ++j) ci[j] = alpha * ai[j] + beta * ci[j];
        }
    }
}

}  // namespace bioseq::num
