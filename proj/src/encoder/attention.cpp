#include <cmath>

#include "bioseq/encoder/layers.hpp"
#include "bioseq/num/ops.hpp"
#include "init.hpp"

namespace bioseq::encoder {

using namespace bioseq::num;

AttentionLayer::AttentionLayer(const EncoderConfig& cfg, Rng& rng) : d_(cfg.d), heads_(cfg.attention_heads) {
    const double s = 1.0 / std::sqrt(static_cast<double>(d_));
    ln1_g = init::constant({d_}, 1.0f);
    ln1_b = init::constant({d_}, 0.0f);
    w_qkv = init::normal({d_, 3 * d_}, s, rng);
    b_qkv = init::constant({3 * d_}, 0.0f);
    w_o = init::normal({d_, d_}, s, rng);
    b_o = init::constant({d_}, 0.0f);
    ln2_g = init::constant({d_}, 1.0f);
    ln2_b = init::constant({d_}, 0.0f);
    w_1 = init::normal({d_, 4 * d_}, s, rng);
    b_1 = init::constant({4 * d_}, 0.0f);
    w_2 = init::normal({4 * d_, d_}, 0.5 * s, rng);
    b_2 = init::constant({d_}, 0.0f);
}

Tensor AttentionLayer::forward(const Tensor& x, AttentionTrace* trace) const {
    if (x.ndim() != 2 || x.cols() != d_)
        throw std::invalid_argument("attention layer: expected [T, " + std::to_string(d_) + "], got " + shape_str(x.shape()));
    const std::size_t dh = d_ / heads_;
    const Tensor qkv = linear(layernorm(x, ln1_g, ln1_b), w_qkv, b_qkv);
    const Tensor q = split_heads(slice_cols(qkv, 0, d_), heads_);
    const Tensor k = split_heads(slice_cols(qkv, d_, d_), heads_);
    const Tensor v = split_heads(slice_cols(qkv, 2 * d_, d_), heads_);
    const Tensor probs = softmax(bmm(q, k, true, static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)))));
    if (trace) trace->probs = probs;
    const Tensor h = add(x, linear(merge_heads(bmm(probs, v)), w_o, b_o));
    return add(h, linear(gelu(linear(layernorm(h, ln2_g, ln2_b), w_1, b_1)), w_2, b_2));
}

void AttentionLayer::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "ln1_g", ln1_g});
    out.push_back({prefix + "ln1_b", ln1_b});
    out.push_back({prefix + "w_qkv", w_qkv});
    out.push_back({prefix + "b_qkv", b_qkv});
    out.push_back({prefix + "w_o", w_o});
    out.push_back({prefix + "b_o", b_o});
    out.push_back({prefix + "ln2_g", ln2_g});
    out.push_back({prefix + "ln2_b", ln2_b});
    out.push_back({prefix + "w_1", w_1});
    out.push_back({prefix + "b_1", b_1});
    out.push_back({prefix + "w_2", w_2});
    out.push_back({prefix + "b_2", b_2});
}

}  // namespace bioseq::encoder
