#pragma once

#include <cstddef>
#include <cstdint>

#include "bioseq/encoder/encoder.hpp"
#include "bioseq/pretrain/mask.hpp"

namespace bioseq::pretrain {

// Encoder plus a learned mask embedding and a linear d -> k prediction head.
class PretrainModel {
public:
    PretrainModel(encoder::Encoder enc, std::size_t k, std::uint64_t seed);

    const encoder::Encoder& encoder() const { return enc_; }
    std::size_t k() const { return k_; }

    // Frontend features with the masked rows replaced by the mask embedding.
    Tensor masked_features(const Tensor& feats, const MaskSpec* mask) const;
    // wave [L,1] -> logits [T,k]
    Tensor logits(const Tensor& wave, const MaskSpec* mask) const;

    // Drops the head for a fresh zero head over k classes.
    void reset_head(std::size_t k);

    num::ParamList params() const;

    // Encoder entries plus "pretrain.head_w", "pretrain.head_b", "pretrain.mask_emb".
    void save(num::Checkpoint& ckpt) const;
    static PretrainModel load(const num::Checkpoint& ckpt);

    const Tensor& mask_embedding() const { return mask_emb_; }
    const Tensor& head_weight() const { return head_w_; }

private:
    encoder::Encoder enc_;
    std::size_t k_;
    Tensor mask_emb_;
    Tensor head_w_;
    Tensor head_b_;
};

}  // namespace bioseq::pretrain
