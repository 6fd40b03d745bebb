#include "bioseq/encoder/ssd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace bioseq::encoder {

using num::Buffer;
using num::Node;

namespace {

struct Dims {
    std::size_t T, H, P, N;
};

Dims check_shapes(const char* op, const Tensor& x, const Tensor& dt, const Tensor& A, const Tensor& B,
                  const Tensor& C, const Tensor& D) {
    auto fail = [op](const std::string& what) { throw std::invalid_argument(std::string(op) + ": " + what); };
    if (x.ndim() != 2 || dt.ndim() != 2 || B.ndim() != 2 || C.ndim() != 2) fail("x, dt, B, C must be matrices");
    Dims d{x.rows(), dt.cols(), 0, B.cols()};
    if (d.T == 0 || d.H == 0 || d.N == 0) fail("empty dimension");
    if (x.cols() % d.H != 0) fail("x width " + std::to_string(x.cols()) + " not divisible by heads " + std::to_string(d.H));
    d.P = x.cols() / d.H;
    if (dt.rows() != d.T || B.rows() != d.T || C.rows() != d.T) fail("time dimension mismatch");
    if (C.cols() != d.N) fail("B and C state sizes differ");
    if (A.numel() != d.H || D.numel() != d.H) fail("A and D need one value per head");
    return d;
}

}  // namespace

Tensor ssd_chunked(const Tensor& x, const Tensor& dt, const Tensor& A, const Tensor& B, const Tensor& C,
                   const Tensor& D, std::size_t chunk) {
    const Dims d = check_shapes("ssd_chunked", x, dt, A, B, C, D);
    if (chunk == 0) throw std::invalid_argument("ssd_chunked: chunk must be positive");
    const std::size_t T = d.T, H = d.H, P = d.P, N = d.N, W = H * P;
    const std::size_t n_chunks = (T + chunk - 1) / chunk;
    const bool keep_states = num::grad_enabled() && (x.requires_grad() || dt.requires_grad() || A.requires_grad() ||
                                                     B.requires_grad() || C.requires_grad() || D.requires_grad());

    const float* xv = x.data().data();
    const float* dtv = dt.data().data();
    const float* Av = A.data().data();
    const float* Bv = B.data().data();
    const float* Cv = C.data().data();
    const float* Dv = D.data().data();

    Buffer y(T * W);
    Buffer state(H * N * P);
    auto saved = std::make_shared<Buffer>(keep_states ? n_chunks * H * N * P : 0);
    Buffer G(chunk * chunk), L(chunk), Wm(chunk * chunk), f(chunk);

    for (std::size_t c = 0; c < n_chunks; ++c) {
        const std::size_t t0 = c * chunk, Q = std::min(chunk, T - t0);
        if (keep_states) std::copy(state.data(), state.data() + H * N * P, saved->data() + c * H * N * P);
        for (std::size_t i = 0; i < Q; ++i)
            for (std::size_t s = 0; s <= i; ++s) {
                float g = 0.0f;
                for (std::size_t n = 0; n < N; ++n) g += Cv[(t0 + i) * N + n] * Bv[(t0 + s) * N + n];
                G[i * chunk + s] = g;
            }
        for (std::size_t h = 0; h < H; ++h) {
            float acc = 0.0f;
            for (std::size_t i = 0; i < Q; ++i) {
                acc += dtv[(t0 + i) * H + h] * Av[h];
                L[i] = acc;
            }
            for (std::size_t i = 0; i < Q; ++i)
                for (std::size_t s = 0; s <= i; ++s)
                    Wm[i * chunk + s] = G[i * chunk + s] * std::exp(L[i] - L[s]) * dtv[(t0 + s) * H + h];
            float* S = state.data() + h * N * P;
            for (std::size_t i = 0; i < Q; ++i) {
                const float ei = std::exp(L[i]);
                float* yr = y.data() + (t0 + i) * W + h * P;
                const float* ci = Cv + (t0 + i) * N;
                for (std::size_t p = 0; p < P; ++p) {
                    float intra = 0.0f;
                    for (std::size_t s = 0; s <= i; ++s) intra += Wm[i * chunk + s] * xv[(t0 + s) * W + h * P + p];
                    float inter = 0.0f;
                    for (std::size_t n = 0; n < N; ++n) inter += ci[n] * S[n * P + p];
                    yr[p] = intra + ei * inter + Dv[h] * xv[(t0 + i) * W + h * P + p];
                }
            }
            const float eq = std::exp(L[Q - 1]);
            for (std::size_t s = 0; s < Q; ++s) f[s] = std::exp(L[Q - 1] - L[s]) * dtv[(t0 + s) * H + h];
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t p = 0; p < P; ++p) {
                    float acc2 = 0.0f;
                    for (std::size_t s = 0; s < Q; ++s)
                        acc2 += f[s] * Bv[(t0 + s) * N + n] * xv[(t0 + s) * W + h * P + p];
                    S[n * P + p] = eq * S[n * P + p] + acc2;
                }
        }
        for (std::size_t k = 0; k < H * N * P; ++k)
            if (!std::isfinite(state[k])) throw std::runtime_error("ssd_chunked: non-finite state");
    }

    return num::make_op(
        "ssd_chunked", {T, W}, std::move(y), {x, dt, A, B, C, D},
        [d, chunk, n_chunks, saved](const Node& self, std::span<const float> gy, std::span<float* const> gin) {
            const std::size_t T = d.T, H = d.H, P = d.P, N = d.N, W = H * P;
            const float* xv = self.inputs[0]->value.data();
            const float* dtv = self.inputs[1]->value.data();
            const float* Av = self.inputs[2]->value.data();
            const float* Bv = self.inputs[3]->value.data();
            const float* Cv = self.inputs[4]->value.data();
            const float* Dv = self.inputs[5]->value.data();
            float* gx = gin[0];
            float* gdt = gin[1];
            float* gA = gin[2];
            float* gB = gin[3];
            float* gC = gin[4];
            float* gD = gin[5];

            Buffer dS(H * N * P), dSprev(H * N * P);
            Buffer G(chunk * chunk), dG(chunk * chunk), L(chunk), dL(chunk), E(chunk * chunk);
            Buffer lx(chunk * P), ldt(chunk), lB(chunk * N), lC(chunk * N), ldx(chunk * P);

            for (std::size_t cc = n_chunks; cc-- > 0;) {
                const std::size_t t0 = cc * chunk, Q = std::min(chunk, T - t0);
                const float* Sprev_all = saved->data() + cc * H * N * P;
                for (std::size_t i = 0; i < Q; ++i)
                    for (std::size_t s = 0; s <= i; ++s) {
                        float g = 0.0f;
                        for (std::size_t n = 0; n < N; ++n) g += Cv[(t0 + i) * N + n] * Bv[(t0 + s) * N + n];
                        G[i * chunk + s] = g;
                    }
                dG.fill(0.0f);
                lB.fill(0.0f);
                lC.fill(0.0f);

                for (std::size_t h = 0; h < H; ++h) {
                    const float a = Av[h];
                    const float* Sprev = Sprev_all + h * N * P;
                    const float* dSh = dS.data() + h * N * P;
                    float* dSp = dSprev.data() + h * N * P;
                    float acc = 0.0f;
                    for (std::size_t i = 0; i < Q; ++i) {
                        acc += dtv[(t0 + i) * H + h] * a;
                        L[i] = acc;
                    }
                    dL.fill(0.0f);
                    ldt.fill(0.0f);
                    ldx.fill(0.0f);
                    for (std::size_t i = 0; i < Q; ++i)
                        for (std::size_t s = 0; s <= i; ++s) E[i * chunk + s] = std::exp(L[i] - L[s]);

                    // skip term
                    if (gD) {
                        float sd = 0.0f;
                        for (std::size_t i = 0; i < Q; ++i)
                            for (std::size_t p = 0; p < P; ++p)
                                sd += gy[(t0 + i) * W + h * P + p] * xv[(t0 + i) * W + h * P + p];
                        gD[h] += sd;
                    }
                    for (std::size_t i = 0; i < Q; ++i)
                        for (std::size_t p = 0; p < P; ++p) ldx[i * P + p] += Dv[h] * gy[(t0 + i) * W + h * P + p];

                    // intra-chunk term
                    for (std::size_t i = 0; i < Q; ++i) {
                        const float* gyi = gy.data() + (t0 + i) * W + h * P;
                        for (std::size_t s = 0; s <= i; ++s) {
                            const float* xs = xv + (t0 + s) * W + h * P;
                            const float dts = dtv[(t0 + s) * H + h];
                            const float e = E[i * chunk + s];
                            const float g = G[i * chunk + s];
                            const float w = g * e * dts;
                            float dw = 0.0f;
                            for (std::size_t p = 0; p < P; ++p) {
                                dw += gyi[p] * xs[p];
                                ldx[s * P + p] += w * gyi[p];
                            }
                            dG[i * chunk + s] += dw * e * dts;
                            ldt[s] += dw * g * e;
                            dL[i] += dw * w;
                            dL[s] -= dw * w;
                        }
                    }

                    // inter-chunk term
                    for (std::size_t i = 0; i < Q; ++i) {
                        const float ei = std::exp(L[i]);
                        const float* gyi = gy.data() + (t0 + i) * W + h * P;
                        const float* ci = Cv + (t0 + i) * N;
                        float dli = 0.0f;
                        for (std::size_t n = 0; n < N; ++n) {
                            float sg = 0.0f;
                            for (std::size_t p = 0; p < P; ++p) {
                                sg += Sprev[n * P + p] * gyi[p];
                                dSp[n * P + p] += ei * ci[n] * gyi[p];
                            }
                            lC[i * N + n] += ei * sg;
                            dli += ci[n] * sg;
                        }
                        dL[i] += ei * dli;
                    }

                    // carried state
                    const float eq = std::exp(L[Q - 1]);
                    float inner = 0.0f;
                    for (std::size_t k = 0; k < N * P; ++k) {
                        dSp[k] += eq * dSh[k];
                        inner += dSh[k] * Sprev[k];
                    }
                    dL[Q - 1] += eq * inner;
                    for (std::size_t s = 0; s < Q; ++s) {
                        const float fs = std::exp(L[Q - 1] - L[s]);
                        const float dts = dtv[(t0 + s) * H + h];
                        const float* xs = xv + (t0 + s) * W + h * P;
                        const float* bs = Bv + (t0 + s) * N;
                        float v = 0.0f;
                        for (std::size_t n = 0; n < N; ++n) {
                            float u = 0.0f;
                            for (std::size_t p = 0; p < P; ++p) u += dSh[n * P + p] * xs[p];
                            v += bs[n] * u;
                            lB[s * N + n] += fs * dts * u;
                        }
                        for (std::size_t p = 0; p < P; ++p) {
                            float bd = 0.0f;
                            for (std::size_t n = 0; n < N; ++n) bd += bs[n] * dSh[n * P + p];
                            ldx[s * P + p] += fs * dts * bd;
                        }
                        ldt[s] += fs * v;
                        const float tl = fs * dts * v;
                        dL[Q - 1] += tl;
                        dL[s] -= tl;
                    }

                    // L = cumsum(dt * A)
                    float da = 0.0f;
                    float gAh = 0.0f;
                    for (std::size_t i = Q; i-- > 0;) {
                        da += dL[i];
                        ldt[i] += a * da;
                        gAh += dtv[(t0 + i) * H + h] * da;
                    }
                    if (gA) gA[h] += gAh;
                    if (gdt)
                        for (std::size_t i = 0; i < Q; ++i) gdt[(t0 + i) * H + h] += ldt[i];
                    if (gx)
                        for (std::size_t i = 0; i < Q; ++i)
                            for (std::size_t p = 0; p < P; ++p) gx[(t0 + i) * W + h * P + p] += ldx[i * P + p];
                }

                // G = C B^T
                for (std::size_t i = 0; i < Q; ++i)
                    for (std::size_t s = 0; s <= i; ++s) {
                        const float g = dG[i * chunk + s];
                        if (g == 0.0f) continue;
                        for (std::size_t n = 0; n < N; ++n) {
                            lC[i * N + n] += g * Bv[(t0 + s) * N + n];
                            lB[s * N + n] += g * Cv[(t0 + i) * N + n];
                        }
                    }
                if (gB)
                    for (std::size_t k = 0; k < Q * N; ++k) gB[t0 * N + k] += lB[k];
                if (gC)
                    for (std::size_t k = 0; k < Q * N; ++k) gC[t0 * N + k] += lC[k];

                std::swap(dS, dSprev);
                dSprev.fill(0.0f);
            }
        });
}

Tensor ssd_recurrent(const Tensor& x, const Tensor& dt, const Tensor& A, const Tensor& B, const Tensor& C,
                     const Tensor& D) {
    const Dims d = check_shapes("ssd_recurrent", x, dt, A, B, C, D);
    const std::size_t T = d.T, H = d.H, P = d.P, N = d.N, W = H * P;
    const float* xv = x.data().data();
    const float* dtv = dt.data().data();
    const float* Av = A.data().data();
    const float* Bv = B.data().data();
    const float* Cv = C.data().data();
    const float* Dv = D.data().data();

    // states[t+1] = h_t, states[0] = 0
    auto states = std::make_shared<Buffer>((T + 1) * H * N * P);
    Buffer y(T * W);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t h = 0; h < H; ++h) {
            const float dth = dtv[t * H + h];
            const float alpha = std::exp(dth * Av[h]);
            const float* prev = states->data() + (t * H + h) * N * P;
            float* cur = states->data() + ((t + 1) * H + h) * N * P;
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t p = 0; p < P; ++p)
                    cur[n * P + p] = alpha * prev[n * P + p] + dth * Bv[t * N + n] * xv[t * W + h * P + p];
            for (std::size_t p = 0; p < P; ++p) {
                float acc = 0.0f;
                for (std::size_t n = 0; n < N; ++n) acc += Cv[t * N + n] * cur[n * P + p];
                y[t * W + h * P + p] = acc + Dv[h] * xv[t * W + h * P + p];
            }
        }
    }
    return num::make_op(
        "ssd_recurrent", {T, W}, std::move(y), {x, dt, A, B, C, D},
        [d, states](const Node& self, std::span<const float> gy, std::span<float* const> gin) {
            const std::size_t T = d.T, H = d.H, P = d.P, N = d.N, W = H * P;
            const float* xv = self.inputs[0]->value.data();
            const float* dtv = self.inputs[1]->value.data();
            const float* Av = self.inputs[2]->value.data();
            const float* Bv = self.inputs[3]->value.data();
            const float* Cv = self.inputs[4]->value.data();
            const float* Dv = self.inputs[5]->value.data();
            Buffer g(H * N * P), lam(N * P);
            for (std::size_t t = T; t-- > 0;) {
                for (std::size_t h = 0; h < H; ++h) {
                    const float dth = dtv[t * H + h];
                    const float alpha = std::exp(dth * Av[h]);
                    const float* prev = states->data() + (t * H + h) * N * P;
                    const float* cur = states->data() + ((t + 1) * H + h) * N * P;
                    const float* gyt = gy.data() + t * W + h * P;
                    const float* xt = xv + t * W + h * P;
                    float* gh = g.data() + h * N * P;
                    for (std::size_t p = 0; p < P; ++p) {
                        if (gin[0]) gin[0][t * W + h * P + p] += Dv[h] * gyt[p];
                        if (gin[5]) gin[5][h] += gyt[p] * xt[p];
                    }
                    for (std::size_t n = 0; n < N; ++n) {
                        float dc = 0.0f;
                        for (std::size_t p = 0; p < P; ++p) {
                            lam[n * P + p] = gh[n * P + p] + Cv[t * N + n] * gyt[p];
                            dc += cur[n * P + p] * gyt[p];
                        }
                        if (gin[4]) gin[4][t * N + n] += dc;
                    }
                    float dalpha = 0.0f, dinput = 0.0f;
                    for (std::size_t n = 0; n < N; ++n) {
                        float db = 0.0f;
                        for (std::size_t p = 0; p < P; ++p) {
                            dalpha += lam[n * P + p] * prev[n * P + p];
                            dinput += lam[n * P + p] * Bv[t * N + n] * xt[p];
                            db += lam[n * P + p] * xt[p];
                        }
                        if (gin[3]) gin[3][t * N + n] += dth * db;
                    }
                    if (gin[0])
                        for (std::size_t p = 0; p < P; ++p) {
                            float dx = 0.0f;
                            for (std::size_t n = 0; n < N; ++n) dx += lam[n * P + p] * Bv[t * N + n];
                            gin[0][t * W + h * P + p] += dth * dx;
                        }
                    if (gin[1]) gin[1][t * H + h] += dinput + dalpha * alpha * Av[h];
                    if (gin[2]) gin[2][h] += dalpha * alpha * dth;
                    for (std::size_t k = 0; k < N * P; ++k) gh[k] = alpha * lam[k];
                }
            }
        });
}

}  // namespace bioseq::encoder
