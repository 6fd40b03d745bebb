#include "bioseq/pretrain/model.hpp"

#include <stdexcept>

#include "bioseq/num/ops.hpp"
#include "bioseq/num/random.hpp"

namespace bioseq::pretrain {

PretrainModel::PretrainModel(encoder::Encoder enc, std::size_t k, std::uint64_t seed)
    : enc_(std::move(enc)), k_(0) {
    const std::size_t d = enc_.config().d;
    auto rng = num::make_rng(seed, {0x3e3b});
    std::vector<float> emb(d);
    for (auto& v : emb) v = static_cast<float>(num::uniform01(rng));
    mask_emb_ = Tensor::from({d}, emb, true);
    reset_head(k);
}

void PretrainModel::reset_head(std::size_t k) {
    if (k < 2) throw std::invalid_argument("prediction head needs k >= 2");
    k_ = k;
    head_w_ = Tensor::zeros({enc_.config().d, k}, true);
    head_b_ = Tensor::zeros({k}, true);
}

Tensor PretrainModel::masked_features(const Tensor& feats, const MaskSpec* mask) const {
    if (mask == nullptr || mask->indices.empty()) return feats;
    if (mask->frames != feats.rows())
        throw std::invalid_argument("mask covers " + std::to_string(mask->frames) + " frames, features have " +
                                    std::to_string(feats.rows()));
    return num::replace_rows(feats, mask->indices, mask_emb_);
}

Tensor PretrainModel::logits(const Tensor& wave, const MaskSpec* mask) const {
    const auto f = enc_.features(wave, wave.rows());
    return num::linear(enc_.layers(masked_features(f.frames, mask)), head_w_, head_b_);
}

num::ParamList PretrainModel::params() const {
    auto p = enc_.params();
    p.push_back({"pretrain.mask_emb", mask_emb_});
    p.push_back({"pretrain.head_w", head_w_});
    p.push_back({"pretrain.head_b", head_b_});
    return p;
}

void PretrainModel::save(num::Checkpoint& ckpt) const {
    enc_.save(ckpt);
    ckpt.put_f32("pretrain.mask_emb", mask_emb_.shape(), mask_emb_.data());
    ckpt.put_f32("pretrain.head_w", head_w_.shape(), head_w_.data());
    ckpt.put_f32("pretrain.head_b", head_b_.shape(), head_b_.data());
    ckpt.config()["pretrain_head"] = {{"k", k_}};
}

PretrainModel PretrainModel::load(const num::Checkpoint& ckpt) {
    if (!ckpt.config().contains("pretrain_head")) throw std::runtime_error("checkpoint has no prediction head");
    const std::size_t k = ckpt.config().at("pretrain_head").at("k").get<std::size_t>();
    PretrainModel m(encoder::Encoder::load(ckpt), k, 0);
    for (const auto& p : m.params()) {
        if (p.name.rfind("pretrain.", 0) != 0) continue;
        if (!ckpt.has(p.name)) throw std::runtime_error("checkpoint is missing '" + p.name + "'");
        if (ckpt.shape(p.name) != p.tensor.shape())
            throw std::runtime_error("checkpoint entry '" + p.name + "' has the wrong shape");
        const auto v = ckpt.get_f32(p.name);
        auto t = p.tensor;
        std::copy(v.begin(), v.end(), t.mutable_data().begin());
    }
    return m;
}

}  // namespace bioseq::pretrain
