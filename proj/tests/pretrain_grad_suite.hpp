#pragma once

#include "bioseq/pretrain/model.hpp"
#include "model_grad_suite.hpp"

namespace grad_suite {

// masked prediction loss through mask embedding, head and encoder
inline double pretrain_model_worst(std::uint64_t seeds = 20) {
    namespace pre = bioseq::pretrain;
    const auto cfg = tiny_config();
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        const pre::PretrainModel model(enc::Encoder(cfg, seed), 5, seed + 1);
        auto rng = num::make_rng(seed, {0x9d});
        auto head = model.head_weight();
        for (auto& v : head.mutable_data()) v = static_cast<float>(0.1 * num::normal01(rng));
        auto w = noise(400 + 320 * (3 + seed % 4), seed);
        const Tensor wave = enc::waveform_tensor(w);
        const std::size_t T = cfg.cnn.output_length(w.size());
        const auto mask = pre::sample_mask(T, 0.3, 2, seed);
        std::vector<int> labels(T);
        for (auto& z : labels) z = static_cast<int>(rng() % 5);
        worst = std::max(worst, composite([&](const auto&) {
                             return pre::masked_prediction_loss(model.logits(wave, &mask), labels, mask);
                         },
                                          tensors_of(model.params()), seed));
    }
    return worst;
}

}  // namespace grad_suite
