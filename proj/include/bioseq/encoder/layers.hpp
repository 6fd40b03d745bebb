#pragma once

#include <cstddef>
#include <string>

#include "bioseq/encoder/config.hpp"
#include "bioseq/num/optim.hpp"
#include "bioseq/num/random.hpp"
#include "bioseq/num/tensor.hpp"

namespace bioseq::encoder {

using num::ParamList;
using num::Tensor;

enum class ScanPath { chunked, recurrent };

// Pre-norm Mamba2 block:
//   u -> rmsnorm -> in_proj -> [z | xBC | dt]
//   xBC -> causal depthwise conv -> silu -> [x | B | C]
//   y = ssd(x, softplus(dt + dt_bias), -exp(A_log), B, C, D)
//   out = u + out_proj(rmsnorm(y * silu(z)))
class MambaLayer {
public:
    MambaLayer() = default;
    MambaLayer(const EncoderConfig& cfg, num::Rng& rng);

    Tensor forward(const Tensor& u, ScanPath path = ScanPath::chunked) const;
    void collect(ParamList& out, const std::string& prefix) const;

    Tensor norm_gain, in_proj, conv_w, conv_b, dt_bias, A_log, D, gate_norm, out_proj;

private:
    std::size_t d_ = 0, d_inner_ = 0, n_state_ = 0, n_heads_ = 0, chunk_ = 64;
};

// Captured attention probabilities [H, T, T] of the last forward.
struct AttentionTrace {
    Tensor probs;
};

// Pre-norm multi-head self-attention + GELU MLP (4d), non-causal, with the
// full score matrix materialized.
class AttentionLayer {
public:
    AttentionLayer() = default;
    AttentionLayer(const EncoderConfig& cfg, num::Rng& rng);

    Tensor forward(const Tensor& x, AttentionTrace* trace = nullptr) const;
    void collect(ParamList& out, const std::string& prefix) const;

    Tensor ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_1, b_1, w_2, b_2;

private:
    std::size_t d_ = 0, heads_ = 1;
};

struct FrontendOutput {
    Tensor frames;            // [T, d]
    std::size_t valid = 0;    // frames computed from real (non-padding) samples only
};

// Strided conv stack (no bias, GELU, group norm over time after the first
// layer) followed by layernorm and a linear projection to d.
class CnnFrontend {
public:
    CnnFrontend() = default;
    CnnFrontend(const EncoderConfig& cfg, num::Rng& rng);

    // wave [L, 1]; samples past valid_samples are padding.
    FrontendOutput forward(const Tensor& wave, std::size_t valid_samples) const;
    void collect(ParamList& out, const std::string& prefix) const;

    std::vector<Tensor> conv_w;
    Tensor gn_g, gn_b, ln_g, ln_b, proj_w, proj_b;

private:
    CnnFrontendConfig cfg_;
};

}  // namespace bioseq::encoder
