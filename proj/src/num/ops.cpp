#include "bioseq/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bioseq/num/gemm.hpp"

namespace bioseq::num {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(),
            std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

std::size_t last_dim(const Tensor& x) { return x.shape().empty() ? 1 : x.shape().back(); }

float sigmoid_scalar(float x) {
    if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
    const float e = std::exp(x);
    return e / (1.0f + e);
}

// Element-wise unary op with derivative dy/dx computed from (x, y).
template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
    Buffer out(x.numel());
    const float* xv = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
    return make_op(op, x.shape(), std::move(out), {x},
                   [df](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       if (gin[0] == nullptr) return;
                       const float* xv = self.inputs[0]->value.data();
                       const float* yv = self.value.data();
                       for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * df(xv[i], yv[i]);
                   });
}

}  // namespace

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2 && a.cols() == b.rows(),
            "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Buffer out(m * n);
    gemm(false, false, m, n, k, 1.0f, a.data().data(), k, b.data().data(), n, 0.0f, out.data(), n);
    return make_op("matmul", {m, n}, std::move(out), {a, b},
                   [m, k, n](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* av = self.inputs[0]->value.data();
                       const float* bv = self.inputs[1]->value.data();
                       if (gin[0]) gemm(false, true, m, k, n, 1.0f, g.data(), n, bv, n, 1.0f, gin[0], k);
                       if (gin[1]) gemm(true, false, k, n, m, 1.0f, av, k, g.data(), n, 1.0f, gin[1], n);
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.ndim() == 2 && w.ndim() == 2 && x.cols() == w.rows(),
            "linear: incompatible shapes " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
    const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
    if (b.defined()) require(b.numel() == n, "linear: bias size " + std::to_string(b.numel()) + " != " + std::to_string(n));
    Buffer out(m * n);
    gemm(false, false, m, n, k, 1.0f, x.data().data(), k, w.data().data(), n, 0.0f, out.data(), n);
    if (b.defined()) {
        const float* bv = b.data().data();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
        }
    }
    return make_op("linear", {m, n}, std::move(out), {x, w, b},
                   [m, k, n](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* xv = self.inputs[0]->value.data();
                       const float* wv = self.inputs[1]->value.data();
                       if (gin[0]) gemm(false, true, m, k, n, 1.0f, g.data(), n, wv, n, 1.0f, gin[0], k);
                       if (gin[1]) gemm(true, false, k, n, m, 1.0f, xv, k, g.data(), n, 1.0f, gin[1], n);
                       if (gin.size() > 2 && gin[2]) {
                           for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t j = 0; j < n; ++j) gin[2][j] += g[i * n + j];
                           }
                       }
                   });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b, float alpha) {
    require(a.ndim() == 3 && b.ndim() == 3 && a.dim(0) == b.dim(0),
            "bmm: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
    const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
    require((trans_b ? b.dim(2) : b.dim(1)) == k,
            "bmm: inner dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Buffer out(batch * m * n);
    const std::size_t bstride = k * n;
    for (std::size_t i = 0; i < batch; ++i) {
        gemm(false, trans_b, m, n, k, alpha, a.data().data() + i * m * k, k, b.data().data() + i * bstride,
             trans_b ? k : n, 0.0f, out.data() + i * m * n, n);
    }
    return make_op("bmm", {batch, m, n}, std::move(out), {a, b},
                   [batch, m, k, n, trans_b, alpha](const Node& self, std::span<const float> g,
                                                    std::span<float* const> gin) {
                       const float* av = self.inputs[0]->value.data();
                       const float* bv = self.inputs[1]->value.data();
                       for (std::size_t i = 0; i < batch; ++i) {
                           const float* gi = g.data() + i * m * n;
                           const float* ai = av + i * m * k;
                           const float* bi = bv + i * k * n;
                           if (gin[0]) {
                               float* da = gin[0] + i * m * k;
                               if (trans_b) {
                                   gemm(false, false, m, k, n, alpha, gi, n, bi, k, 1.0f, da, k);
                               } else {
                                   gemm(false, true, m, k, n, alpha, gi, n, bi, n, 1.0f, da, k);
                               }
                           }
                           if (gin[1]) {
                               float* db = gin[1] + i * k * n;
                               if (trans_b) {
                                   gemm(true, false, n, k, m, alpha, gi, n, ai, k, 1.0f, db, k);
                               } else {
                                   gemm(true, false, k, n, m, alpha, ai, k, gi, n, 1.0f, db, n);
                               }
                           }
                       }
                   });
}

Tensor transpose(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    Buffer out(r * c);
    const float* xv = x.data().data();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
    }
    return make_op("transpose", {c, r}, std::move(out), {x},
                   [r, c](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) gin[0][i * c + j] += g[j * r + i];
                       }
                   });
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(numel(shape) == x.numel(), "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    return make_op("reshape", std::move(shape), Buffer(x.data()), {x},
                   [](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                   });
}

Tensor split_heads(const Tensor& x, std::size_t heads) {
    const std::size_t t = x.rows(), width = x.cols();
    require(heads > 0 && width % heads == 0,
            "split_heads: width " + std::to_string(width) + " not divisible by " + std::to_string(heads));
    const std::size_t d = width / heads;
    Buffer out(x.numel());
    const float* xv = x.data().data();
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < t; ++i) {
            std::copy_n(xv + i * width + h * d, d, out.data() + (h * t + i) * d);
        }
    }
    return make_op("split_heads", {heads, t, d}, std::move(out), {x},
                   [heads, t, d, width](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t h = 0; h < heads; ++h) {
                           for (std::size_t i = 0; i < t; ++i) {
                               for (std::size_t j = 0; j < d; ++j) gin[0][i * width + h * d + j] += g[(h * t + i) * d + j];
                           }
                       }
                   });
}

Tensor merge_heads(const Tensor& x) {
    require(x.ndim() == 3, "merge_heads: expected [H,T,D], got " + shape_str(x.shape()));
    const std::size_t heads = x.dim(0), t = x.dim(1), d = x.dim(2), width = heads * d;
    Buffer out(x.numel());
    const float* xv = x.data().data();
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < t; ++i) {
            std::copy_n(xv + (h * t + i) * d, d, out.data() + i * width + h * d);
        }
    }
    return make_op("merge_heads", {t, width}, std::move(out), {x},
                   [heads, t, d, width](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t h = 0; h < heads; ++h) {
                           for (std::size_t i = 0; i < t; ++i) {
                               for (std::size_t j = 0; j < d; ++j) gin[0][(h * t + i) * d + j] += g[i * width + h * d + j];
                           }
                       }
                   });
}

// ---- element-wise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Buffer out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_op("add", a.shape(), std::move(out), {a, b},
                   [](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (float* s : gin) {
                           if (s) for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
                       }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Buffer out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_op("sub", a.shape(), std::move(out), {a, b},
                   [](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       if (gin[0]) for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                       if (gin[1]) for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Buffer out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_op("mul", a.shape(), std::move(out), {a, b},
                   [](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* av = self.inputs[0]->value.data();
                       const float* bv = self.inputs[1]->value.data();
                       if (gin[0]) for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * bv[i];
                       if (gin[1]) for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * av[i];
                   });
}

Tensor scale(const Tensor& x, float s) {
    Buffer out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * s;
    return make_op("scale", x.shape(), std::move(out), {x},
                   [s](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * s;
                   });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
    const std::size_t n = last_dim(x);
    require(row.numel() == n, "add_row: row size " + std::to_string(row.numel()) + " != " + std::to_string(n));
    Buffer out(x.numel());
    const float* xv = x.data().data();
    const float* rv = row.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + rv[i % n];
    return make_op("add_row", x.shape(), std::move(out), {x, row},
                   [n](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       if (gin[0]) for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                       if (gin[1]) for (std::size_t i = 0; i < g.size(); ++i) gin[1][i % n] += g[i];
                   });
}

Tensor mul_row(const Tensor& x, const Tensor& row) {
    const std::size_t n = last_dim(x);
    require(row.numel() == n, "mul_row: row size " + std::to_string(row.numel()) + " != " + std::to_string(n));
    Buffer out(x.numel());
    const float* xv = x.data().data();
    const float* rv = row.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * rv[i % n];
    return make_op("mul_row", x.shape(), std::move(out), {x, row},
                   [n](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* xv = self.inputs[0]->value.data();
                       const float* rv = self.inputs[1]->value.data();
                       if (gin[0]) for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * rv[i % n];
                       if (gin[1]) for (std::size_t i = 0; i < g.size(); ++i) gin[1][i % n] += g[i] * xv[i];
                   });
}

Tensor exp(const Tensor& x) {
    return unary("exp", x, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor silu(const Tensor& x) {
    return unary(
        "silu", x, [](float v) { return v * sigmoid_scalar(v); },
        [](float v, float) {
            const float s = sigmoid_scalar(v);
            return s * (1.0f + v * (1.0f - s));
        });
}

Tensor gelu(const Tensor& x) {
    constexpr float kInvSqrt2 = 0.70710678118654752f;
    constexpr float kInvSqrt2Pi = 0.39894228040143268f;
    return unary(
        "gelu", x, [](float v) { return 0.5f * v * (1.0f + std::erf(v * kInvSqrt2)); },
        [](float v, float) { return 0.5f * (1.0f + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5f * v * v); });
}

Tensor softplus(const Tensor& x) {
    return unary(
        "softplus", x, [](float v) { return v > 20.0f ? v : std::log1p(std::exp(v)); },
        [](float v, float) { return sigmoid_scalar(v); });
}

Tensor sigmoid(const Tensor& x) {
    return unary("sigmoid", x, sigmoid_scalar, [](float, float y) { return y * (1.0f - y); });
}

// ---- indexing ---------------------------------------------------------------

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
    const std::size_t r = x.rows(), c = x.cols();
    require(start + count <= c, "slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                                    ") out of range for " + shape_str(x.shape()));
    Buffer out(r * count);
    const float* xv = x.data().data();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(xv + i * c + start, count, out.data() + i * count);
    return make_op("slice_cols", {r, count}, std::move(out), {x},
                   [r, c, start, count](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < count; ++j) gin[0][i * c + start + j] += g[i * count + j];
                       }
                   });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
    const std::size_t r = x.rows(), c = x.cols();
    require(start + count <= r, "slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                                    ") out of range for " + shape_str(x.shape()));
    Buffer out(x.data().subspan(start * c, count * c));
    return make_op("slice_rows", {count, c}, std::move(out), {x},
                   [start, c](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t i = 0; i < g.size(); ++i) gin[0][start * c + i] += g[i];
                   });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t r = parts[0].rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.rows() == r, "concat_cols: row count mismatch");
        widths.push_back(p.cols());
        total += p.cols();
    }
    Buffer out(r * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const float* pv = parts[k].data().data();
        for (std::size_t i = 0; i < r; ++i) std::copy_n(pv + i * widths[k], widths[k], out.data() + i * total + offset);
        offset += widths[k];
    }
    return make_op("concat_cols", {r, total}, std::move(out), parts,
                   [r, total, widths](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                           if (gin[k]) {
                               for (std::size_t i = 0; i < r; ++i) {
                                   for (std::size_t j = 0; j < widths[k]; ++j) gin[k][i * widths[k] + j] += g[i * total + offset + j];
                               }
                           }
                           offset += widths[k];
                       }
                   });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    Buffer out(idx.size() * c);
    const float* xv = x.data().data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] < r, "gather_rows: row " + std::to_string(idx[i]) + " out of range for " + shape_str(x.shape()));
        std::copy_n(xv + idx[i] * c, c, out.data() + i * c);
    }
    return make_op("gather_rows", {idx.size(), c}, std::move(out), {x},
                   [idx, c](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                           for (std::size_t j = 0; j < c; ++j) gin[0][idx[i] * c + j] += g[i * c + j];
                       }
                   });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
    require(table.ndim() == 2, "embedding_lookup: table must be [V,d]");
    for (auto id : ids) {
        require(id < table.rows(), "embedding_lookup: id " + std::to_string(id) + " >= vocabulary size " +
                                       std::to_string(table.rows()));
    }
    return gather_rows(table, ids);
}

Tensor replace_rows(const Tensor& x, std::span<const std::size_t> rows, const Tensor& row) {
    const std::size_t r = x.rows(), c = x.cols();
    require(row.numel() == c, "replace_rows: row size " + std::to_string(row.numel()) + " != " + std::to_string(c));
    std::vector<char> mask(r, 0);
    for (auto i : rows) {
        require(i < r, "replace_rows: row " + std::to_string(i) + " out of range");
        mask[i] = 1;
    }
    Buffer out(x.data());
    const float* rv = row.data().data();
    for (std::size_t i = 0; i < r; ++i) {
        if (mask[i]) std::copy_n(rv, c, out.data() + i * c);
    }
    return make_op("replace_rows", x.shape(), std::move(out), {x, row},
                   [mask, c](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       for (std::size_t i = 0; i < mask.size(); ++i) {
                           float* dst = mask[i] ? gin[1] : (gin[0] ? gin[0] + i * c : nullptr);
                           if (dst == nullptr) continue;
                           for (std::size_t j = 0; j < c; ++j) dst[j] += g[i * c + j];
                       }
                   });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    return make_op("sum", {1}, Buffer(1, static_cast<float>(acc)), {x},
                   [](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const std::size_t n = self.inputs[0]->value.size();
                       for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[0];
                   });
}

Tensor mean(const Tensor& x) {
    require(x.numel() > 0, "mean: empty tensor");
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    const std::size_t n = x.numel();
    return make_op("mean", {1}, Buffer(1, static_cast<float>(acc / static_cast<double>(n))), {x},
                   [n](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       const float s = g[0] / static_cast<float>(n);
                       for (std::size_t i = 0; i < n; ++i) gin[0][i] += s;
                   });
}

Tensor mean_rows(const Tensor& x, std::size_t n_valid) {
    const std::size_t r = x.rows(), c = x.cols();
    require(n_valid >= 1 && n_valid <= r,
            "mean_rows: n_valid " + std::to_string(n_valid) + " outside [1, " + std::to_string(r) + "]");
    std::vector<double> acc(c, 0.0);
    const float* xv = x.data().data();
    for (std::size_t i = 0; i < n_valid; ++i) {
        for (std::size_t j = 0; j < c; ++j) acc[j] += xv[i * c + j];
    }
    Buffer out(c);
    for (std::size_t j = 0; j < c; ++j) out[j] = static_cast<float>(acc[j] / static_cast<double>(n_valid));
    return make_op("mean_rows", {1, c}, std::move(out), {x},
                   [n_valid, c](const Node&, std::span<const float> g, std::span<float* const> gin) {
                       const float inv = 1.0f / static_cast<float>(n_valid);
                       for (std::size_t i = 0; i < n_valid; ++i) {
                           for (std::size_t j = 0; j < c; ++j) gin[0][i * c + j] += g[j] * inv;
                       }
                   });
}

// ---- losses -------------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
    const std::size_t n = logits.rows(), k = logits.cols();
    require(n > 0, "cross_entropy: no rows");
    require(targets.size() == n, "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                     std::to_string(n) + " rows");
    std::vector<int> tgt(targets.begin(), targets.end());
    for (int t : tgt) {
        require(t >= 0 && static_cast<std::size_t>(t) < k,
                "cross_entropy: label " + std::to_string(t) + " outside [0, " + std::to_string(k) + ")");
    }
    const float* xv = logits.data().data();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = xv + i * k;
        const float mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j] - mx));
        total += std::log(z) + mx - row[tgt[i]];
    }
    return make_op("cross_entropy", {1}, Buffer(1, static_cast<float>(total / static_cast<double>(n))), {logits},
                   [n, k, tgt](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* xv = self.inputs[0]->value.data();
                       const float s = g[0] / static_cast<float>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                           const float* row = xv + i * k;
                           const float mx = *std::max_element(row, row + k);
                           double z = 0.0;
                           for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j] - mx));
                           for (std::size_t j = 0; j < k; ++j) {
                               const float p = static_cast<float>(std::exp(static_cast<double>(row[j] - mx)) / z);
                               gin[0][i * k + j] += s * (p - (static_cast<int>(j) == tgt[i] ? 1.0f : 0.0f));
                           }
                       }
                   });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const float> targets) {
    const std::size_t n = logits.numel();
    require(n > 0, "bce_with_logits: empty input");
    require(targets.size() == n, "bce_with_logits: " + std::to_string(targets.size()) + " targets for " +
                                     std::to_string(n) + " logits");
    std::vector<float> tgt(targets.begin(), targets.end());
    const float* xv = logits.data().data();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = xv[i];
        total += std::max(x, 0.0) - x * tgt[i] + std::log1p(std::exp(-std::abs(x)));
    }
    return make_op("bce_with_logits", {1}, Buffer(1, static_cast<float>(total / static_cast<double>(n))), {logits},
                   [n, tgt](const Node& self, std::span<const float> g, std::span<float* const> gin) {
                       const float* xv = self.inputs[0]->value.data();
                       const float s = g[0] / static_cast<float>(n);
                       for (std::size_t i = 0; i < n; ++i) gin[0][i] += s * (sigmoid_scalar(xv[i]) - tgt[i]);
                   });
}

}  // namespace bioseq::num
