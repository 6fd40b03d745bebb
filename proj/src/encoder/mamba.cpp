#include <cmath>

#include "bioseq/encoder/layers.hpp"
#include "bioseq/encoder/ssd.hpp"
#include "bioseq/num/ops.hpp"
#include "init.hpp"

namespace bioseq::encoder {

using namespace bioseq::num;

MambaLayer::MambaLayer(const EncoderConfig& cfg, Rng& rng)
    : d_(cfg.d), d_inner_(cfg.d_inner()), n_state_(cfg.mamba.state_dim), n_heads_(cfg.n_heads()), chunk_(cfg.mamba.chunk) {
    const std::size_t conv_dim = d_inner_ + 2 * n_state_;
    const std::size_t k = cfg.mamba.conv_width;
    norm_gain = init::constant({d_}, 1.0f);
    in_proj = init::normal({d_, 2 * d_inner_ + 2 * n_state_ + n_heads_}, 1.0 / std::sqrt(static_cast<double>(d_)), rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(k));
    conv_w = init::uniform({conv_dim, 1, k}, -bound, bound, rng);
    conv_b = init::uniform({conv_dim}, -bound, bound, rng);

    // dt log-uniform in [1e-3, 1e-1]; stored through the inverse softplus
    std::vector<float> dtb(n_heads_), alog(n_heads_);
    for (std::size_t h = 0; h < n_heads_; ++h) {
        const double dt = std::exp(std::log(1e-3) + (std::log(1e-1) - std::log(1e-3)) * uniform01(rng));
        dtb[h] = static_cast<float>(dt + std::log(-std::expm1(-dt)));
        alog[h] = static_cast<float>(std::log(1.0 + 15.0 * uniform01(rng)));
    }
    dt_bias = Tensor::from({n_heads_}, dtb, true);
    A_log = Tensor::from({n_heads_}, alog, true);
    D = init::constant({n_heads_}, 1.0f);
    gate_norm = init::constant({d_inner_}, 1.0f);
    out_proj = init::normal({d_inner_, d_}, 1.0 / std::sqrt(static_cast<double>(d_inner_)), rng);
}

Tensor MambaLayer::forward(const Tensor& u, ScanPath path) const {
    if (u.ndim() != 2 || u.cols() != d_)
        throw std::invalid_argument("mamba layer: expected [T, " + std::to_string(d_) + "], got " + shape_str(u.shape()));
    const std::size_t conv_dim = d_inner_ + 2 * n_state_;
    const Tensor proj = matmul(rmsnorm(u, norm_gain), in_proj);
    const Tensor z = slice_cols(proj, 0, d_inner_);
    Conv1dOptions opt;
    opt.groups = conv_dim;
    opt.causal = true;
    const Tensor xbc = silu(conv1d(slice_cols(proj, d_inner_, conv_dim), conv_w, conv_b, opt));
    const Tensor x = slice_cols(xbc, 0, d_inner_);
    const Tensor B = slice_cols(xbc, d_inner_, n_state_);
    const Tensor C = slice_cols(xbc, d_inner_ + n_state_, n_state_);
    const Tensor dt = softplus(add_row(slice_cols(proj, d_inner_ + conv_dim, n_heads_), dt_bias));
    const Tensor A = scale(exp(A_log), -1.0f);
    const Tensor y = path == ScanPath::chunked ? ssd_chunked(x, dt, A, B, C, D, chunk_) : ssd_recurrent(x, dt, A, B, C, D);
    return add(u, matmul(rmsnorm(mul(y, silu(z)), gate_norm), out_proj));
}

void MambaLayer::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "norm_gain", norm_gain});
    out.push_back({prefix + "in_proj", in_proj});
    out.push_back({prefix + "conv_w", conv_w});
    out.push_back({prefix + "conv_b", conv_b});
    out.push_back({prefix + "dt_bias", dt_bias});
    out.push_back({prefix + "A_log", A_log});
    out.push_back({prefix + "D", D});
    out.push_back({prefix + "gate_norm", gate_norm});
    out.push_back({prefix + "out_proj", out_proj});
}

}  // namespace bioseq::encoder
