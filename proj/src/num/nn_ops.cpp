#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "bioseq/num/gemm.hpp"
#include "bioseq/num/ops.hpp"

namespace bioseq::num {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

std::size_t last_dim(const Tensor& x) { return x.shape().empty() ? 1 : x.shape().back(); }

}  // namespace

// ---- softmax ------------------------------------------------------------------

Tensor softmax(const Tensor& x) {
    const std::size_t n = last_dim(x), rows = x.numel() / n;
    Buffer out(x.numel());
    const float* xv = x.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = xv + r * n;
        float* o = out.data() + r * n;
        const float mx = *std::max_element(row, row + n);
        float z = 0.0f;
        for (std::size_t j = 0; j < n; ++j) {
            o[j] = std::exp(row[j] - mx);
            z += o[j];
        }
        const float inv = 1.0f / z;
        for (std::size_t j = 0; j < n; ++j) o[j] *= inv;
    }
    return make_op("softmax", x.shape(), std::move(out), {x},
                   [n, rows](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* y = self.value.data();
                       for (std::size_t r = 0; r < rows; ++r) {
                           float dot = 0.0f;
                           for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
                           for (std::size_t j = 0; j < n; ++j) gin[0][r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
                       }
                   });
}

Tensor log_softmax(const Tensor& x) {
    const std::size_t n = last_dim(x), rows = x.numel() / n;
    Buffer out(x.numel());
    const float* xv = x.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = xv + r * n;
        const float mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(static_cast<double>(row[j] - mx));
        const float lse = mx + static_cast<float>(std::log(z));
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = row[j] - lse;
    }
    return make_op("log_softmax", x.shape(), std::move(out), {x},
                   [n, rows](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* y = self.value.data();
                       for (std::size_t r = 0; r < rows; ++r) {
                           float gs = 0.0f;
                           for (std::size_t j = 0; j < n; ++j) gs += g[r * n + j];
                           for (std::size_t j = 0; j < n; ++j) gin[0][r * n + j] += g[r * n + j] - std::exp(y[r * n + j]) * gs;
                       }
                   });
}

// ---- normalization ------------------------------------------------------------

Tensor rmsnorm(const Tensor& x, const Tensor& gain, float eps) {
    const std::size_t n = last_dim(x), rows = x.numel() / n;
    require(gain.numel() == n, "rmsnorm: gain size " + std::to_string(gain.numel()) + " != " + std::to_string(n));
    Buffer out(x.numel());
    std::vector<float> inv_rms(rows);
    const float* xv = x.data().data();
    const float* gv = gain.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = xv + r * n;
        float ms = 0.0f;
        for (std::size_t j = 0; j < n; ++j) ms += row[j] * row[j];
        ms /= static_cast<float>(n);
        inv_rms[r] = 1.0f / std::sqrt(ms + eps);
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = row[j] * inv_rms[r] * gv[j];
    }
    return make_op("rmsnorm", x.shape(), std::move(out), {x, gain},
                   [n, rows, inv_rms](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* xv = self.inputs[0]->value.data();
                       const float* gv = self.inputs[1]->value.data();
                       for (std::size_t r = 0; r < rows; ++r) {
                           const float ir = inv_rms[r];
                           const float* row = xv + r * n;
                           const float* gr = g.data() + r * n;
                           if (gin[1]) {
                               for (std::size_t j = 0; j < n; ++j) gin[1][j] += gr[j] * row[j] * ir;
                           }
                           if (gin[0]) {
                               float dot = 0.0f;
                               for (std::size_t j = 0; j < n; ++j) dot += gr[j] * gv[j] * row[j] * ir;
                               dot /= static_cast<float>(n);
                               for (std::size_t j = 0; j < n; ++j) {
                                   gin[0][r * n + j] += ir * (gr[j] * gv[j] - row[j] * ir * dot);
                               }
                           }
                       }
                   });
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps) {
    const std::size_t n = last_dim(x), rows = x.numel() / n;
    require(gain.numel() == n && bias.numel() == n, "layernorm: gain/bias size mismatch");
    Buffer out(x.numel());
    std::vector<float> mean(rows), inv_std(rows);
    const float* xv = x.data().data();
    const float* gv = gain.data().data();
    const float* bv = bias.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = xv + r * n;
        float mu = 0.0f;
        for (std::size_t j = 0; j < n; ++j) mu += row[j];
        mu /= static_cast<float>(n);
        float var = 0.0f;
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<float>(n);
        mean[r] = mu;
        inv_std[r] = 1.0f / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = (row[j] - mu) * inv_std[r] * gv[j] + bv[j];
    }
    return make_op("layernorm", x.shape(), std::move(out), {x, gain, bias},
                   [n, rows, mean, inv_std](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* xv = self.inputs[0]->value.data();
                       const float* gv = self.inputs[1]->value.data();
                       for (std::size_t r = 0; r < rows; ++r) {
                           const float* row = xv + r * n;
                           const float* gr = g.data() + r * n;
                           const float is = inv_std[r], mu = mean[r];
                           if (gin[1]) for (std::size_t j = 0; j < n; ++j) gin[1][j] += gr[j] * (row[j] - mu) * is;
                           if (gin[2]) for (std::size_t j = 0; j < n; ++j) gin[2][j] += gr[j];
                           if (gin[0]) {
                               float s1 = 0.0f, s2 = 0.0f;
                               for (std::size_t j = 0; j < n; ++j) {
                                   const float dxh = gr[j] * gv[j];
                                   s1 += dxh;
                                   s2 += dxh * (row[j] - mu) * is;
                               }
                               s1 /= static_cast<float>(n);
                               s2 /= static_cast<float>(n);
                               for (std::size_t j = 0; j < n; ++j) {
                                   const float xh = (row[j] - mu) * is;
                                   gin[0][r * n + j] += is * (gr[j] * gv[j] - s1 - xh * s2);
                               }
                           }
                       }
                   });
}

Tensor group_norm_time(const Tensor& x, const Tensor& gain, const Tensor& bias, std::size_t valid_rows, float eps) {
    const std::size_t t = x.rows(), c = x.cols();
    require(gain.numel() == c && bias.numel() == c, "group_norm_time: gain/bias size mismatch");
    require(valid_rows >= 1 && valid_rows <= t, "group_norm_time: valid_rows " + std::to_string(valid_rows) +
                                                    " outside [1, " + std::to_string(t) + "]");
    const float* xv = x.data().data();
    std::vector<float> mean(c, 0.0f), inv_std(c, 0.0f);
    std::vector<double> acc(c, 0.0);
    for (std::size_t i = 0; i < valid_rows; ++i) {
        for (std::size_t j = 0; j < c; ++j) acc[j] += xv[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) mean[j] = static_cast<float>(acc[j] / static_cast<double>(valid_rows));
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < valid_rows; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double d = xv[i * c + j] - mean[j];
            acc[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < c; ++j) {
        inv_std[j] = static_cast<float>(1.0 / std::sqrt(acc[j] / static_cast<double>(valid_rows) + eps));
    }
    Buffer out(t * c);
    const float* gv = gain.data().data();
    const float* bv = bias.data().data();
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (xv[i * c + j] - mean[j]) * inv_std[j] * gv[j] + bv[j];
    }
    return make_op(
        "group_norm_time", x.shape(), std::move(out), {x, gain, bias},
        [t, c, valid_rows, mean, inv_std](const Node& self, std::span<const float> g, std::span<float* const> gin) {
            const float* xv = self.inputs[0]->value.data();
            const float* gv = self.inputs[1]->value.data();
            std::vector<double> s1(c, 0.0), s2(c, 0.0);
            for (std::size_t i = 0; i < t; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const float xh = (xv[i * c + j] - mean[j]) * inv_std[j];
                    const float gij = g[i * c + j];
                    if (gin[1]) gin[1][j] += gij * xh;
                    if (gin[2]) gin[2][j] += gij;
                    s1[j] += gij * gv[j];
                    s2[j] += gij * gv[j] * xh;
                }
            }
            if (!gin[0]) return;
            const double inv_v = 1.0 / static_cast<double>(valid_rows);
            for (std::size_t i = 0; i < t; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const float dxh = g[i * c + j] * gv[j];
                    if (i < valid_rows) {
                        const float xh = (xv[i * c + j] - mean[j]) * inv_std[j];
                        gin[0][i * c + j] += inv_std[j] * (dxh - static_cast<float>(s1[j] * inv_v) -
                                                          xh * static_cast<float>(s2[j] * inv_v));
                    } else {
                        gin[0][i * c + j] += inv_std[j] * dxh;
                    }
                }
            }
        });
}

// ---- convolution --------------------------------------------------------------

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride, bool causal) {
    const std::size_t padded = causal ? length + kernel - 1 : length;
    if (padded < kernel || stride == 0) return 0;
    return (padded - kernel) / stride + 1;
}

namespace {

// Input row feeding output t at tap k, or -1 when it falls in the padding.
inline long conv_source(std::size_t t, std::size_t k, std::size_t stride, std::size_t pad, std::size_t length) {
    const long pos = static_cast<long>(t * stride + k) - static_cast<long>(pad);
    return (pos < 0 || pos >= static_cast<long>(length)) ? -1 : pos;
}

void im2col(const float* x, std::size_t length, std::size_t cin, std::size_t kernel, std::size_t stride,
            std::size_t pad, std::size_t out_len, float* cols) {
    const std::size_t width = cin * kernel;
    for (std::size_t t = 0; t < out_len; ++t) {
        float* row = cols + t * width;
        for (std::size_t k = 0; k < kernel; ++k) {
            const long src = conv_source(t, k, stride, pad, length);
            for (std::size_t ci = 0; ci < cin; ++ci) row[ci * kernel + k] = src < 0 ? 0.0f : x[src * cin + ci];
        }
    }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv1dOptions& opt) {
    require(x.ndim() == 2 && w.ndim() == 3, "conv1d: expected x[T,Cin] and w[Cout,Cin/groups,K]");
    const std::size_t length = x.rows(), cin = x.cols();
    const std::size_t cout = w.dim(0), cin_g = w.dim(1), kernel = w.dim(2);
    const std::size_t groups = opt.groups, stride = opt.stride;
    require(groups >= 1 && cin % groups == 0 && cout % groups == 0 && cin / groups == cin_g,
            "conv1d: channel/group mismatch for x " + shape_str(x.shape()) + ", w " + shape_str(w.shape()) +
                ", groups " + std::to_string(groups));
    require(stride >= 1, "conv1d: stride must be positive");
    if (bias.defined()) require(bias.numel() == cout, "conv1d: bias size mismatch");
    const std::size_t out_len = conv1d_output_length(length, kernel, stride, opt.causal);
    require(out_len >= 1, "conv1d: input length " + std::to_string(length) + " shorter than kernel " +
                              std::to_string(kernel));
    const std::size_t pad = opt.causal ? kernel - 1 : 0;
    const std::size_t cout_g = cout / groups;

    Buffer out(out_len * cout);
    const float* xv = x.data().data();
    const float* wv = w.data().data();
    if (groups == 1) {
        Buffer cols(out_len * cin * kernel);
        im2col(xv, length, cin, kernel, stride, pad, out_len, cols.data());
        gemm(false, true, out_len, cout, cin * kernel, 1.0f, cols.data(), cin * kernel, wv, cin * kernel, 0.0f,
             out.data(), cout);
    } else {
        for (std::size_t t = 0; t < out_len; ++t) {
            for (std::size_t co = 0; co < cout; ++co) {
                const std::size_t ci0 = (co / cout_g) * cin_g;
                float acc = 0.0f;
                for (std::size_t cl = 0; cl < cin_g; ++cl) {
                    for (std::size_t k = 0; k < kernel; ++k) {
                        const long src = conv_source(t, k, stride, pad, length);
                        if (src >= 0) acc += wv[(co * cin_g + cl) * kernel + k] * xv[src * cin + ci0 + cl];
                    }
                }
                out[t * cout + co] = acc;
            }
        }
    }
    if (bias.defined()) {
        const float* bv = bias.data().data();
        for (std::size_t t = 0; t < out_len; ++t) {
            for (std::size_t co = 0; co < cout; ++co) out[t * cout + co] += bv[co];
        }
    }

    return make_op(
        "conv1d", {out_len, cout}, std::move(out), {x, w, bias},
        [=](const Node& self, std::span<const float> g, std::span<float* const> gin) {
            const float* xv = self.inputs[0]->value.data();
            const float* wv = self.inputs[1]->value.data();
            if (gin.size() > 2 && gin[2]) {
                for (std::size_t t = 0; t < out_len; ++t) {
                    for (std::size_t co = 0; co < cout; ++co) gin[2][co] += g[t * cout + co];
                }
            }
            if (groups == 1) {
                const std::size_t width = cin * kernel;
                Buffer cols(out_len * width);
                im2col(xv, length, cin, kernel, stride, pad, out_len, cols.data());
                if (gin[1]) gemm(true, false, cout, width, out_len, 1.0f, g.data(), cout, cols.data(), width, 1.0f, gin[1], width);
                if (gin[0]) {
                    gemm(false, false, out_len, width, cout, 1.0f, g.data(), cout, wv, width, 0.0f, cols.data(), width);
                    for (std::size_t t = 0; t < out_len; ++t) {
                        const float* row = cols.data() + t * width;
                        for (std::size_t k = 0; k < kernel; ++k) {
                            const long src = conv_source(t, k, stride, pad, length);
                            if (src < 0) continue;
                            for (std::size_t ci = 0; ci < cin; ++ci) gin[0][src * cin + ci] += row[ci * kernel + k];
                        }
                    }
                }
                return;
            }
            for (std::size_t t = 0; t < out_len; ++t) {
                for (std::size_t co = 0; co < cout; ++co) {
                    const float gv = g[t * cout + co];
                    const std::size_t ci0 = (co / cout_g) * cin_g;
                    for (std::size_t cl = 0; cl < cin_g; ++cl) {
                        for (std::size_t k = 0; k < kernel; ++k) {
                            const long src = conv_source(t, k, stride, pad, length);
                            if (src < 0) continue;
                            const std::size_t wi = (co * cin_g + cl) * kernel + k;
                            const std::size_t xi = src * cin + ci0 + cl;
                            if (gin[1]) gin[1][wi] += gv * xv[xi];
                            if (gin[0]) gin[0][xi] += gv * wv[wi];
                        }
                    }
                }
            }
        });
}

}  // namespace bioseq::num
