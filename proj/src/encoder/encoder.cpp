#include "bioseq/encoder/encoder.hpp"

#include <stdexcept>
#include <string>

namespace bioseq::encoder {

using namespace bioseq::num;

Tensor waveform_tensor(const signal::Waveform& w) { return Tensor::from({w.size(), 1}, w.samples); }

Encoder::Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng front_rng = make_rng(seed, {0xf20});
    frontend_ = CnnFrontend(cfg_, front_rng);
    for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
        Rng rng = make_rng(seed, {0x1a7e, i});
        if (cfg_.kind == LayerKind::mamba)
            mamba_.emplace_back(cfg_, rng);
        else
            attention_.emplace_back(cfg_, rng);
    }
}

FrontendOutput Encoder::features(const Tensor& wave, std::size_t valid_samples) const {
    return frontend_.forward(wave, valid_samples);
}

FrontendOutput Encoder::features(const signal::Waveform& w) const {
    if (w.sample_rate_hz != signal::kTargetRateHz)
        throw std::invalid_argument("encoder expects " + std::to_string(signal::kTargetRateHz) + " Hz audio");
    return features(waveform_tensor(w), w.size());
}

Tensor Encoder::layers(const Tensor& feats, std::optional<std::size_t> return_layer, ScanPath path) const {
    const std::size_t stop = return_layer.value_or(cfg_.n_layers);
    if (stop < 1 || stop > cfg_.n_layers)
        throw std::invalid_argument("return_layer " + std::to_string(stop) + " outside [1, " +
                                    std::to_string(cfg_.n_layers) + "]");
    Tensor h = feats;
    for (std::size_t i = 0; i < stop; ++i)
        h = cfg_.kind == LayerKind::mamba ? mamba_[i].forward(h, path) : attention_[i].forward(h);
    return h;
}

Tensor Encoder::forward(const signal::Waveform& w, std::optional<std::size_t> return_layer) const {
    return layers(features(w).frames, return_layer);
}

ParamList Encoder::frontend_params() const {
    ParamList out;
    frontend_.collect(out, "encoder.frontend.");
    return out;
}

ParamList Encoder::layer_params() const {
    ParamList out;
    for (std::size_t i = 0; i < mamba_.size(); ++i) mamba_[i].collect(out, "encoder.layers." + std::to_string(i) + ".");
    for (std::size_t i = 0; i < attention_.size(); ++i)
        attention_[i].collect(out, "encoder.layers." + std::to_string(i) + ".");
    return out;
}

ParamList Encoder::params() const {
    ParamList out = frontend_params();
    for (auto& p : layer_params()) out.push_back(std::move(p));
    return out;
}

void Encoder::save(Checkpoint& ckpt) const {
    for (const auto& p : params()) ckpt.put_f32(p.name, p.tensor.shape(), p.tensor.data());
    ckpt.config()["encoder"] = to_json(cfg_);
}

Encoder Encoder::load(const Checkpoint& ckpt) {
    if (!ckpt.config().contains("encoder")) throw std::runtime_error("checkpoint has no encoder config");
    Encoder enc(encoder_config_from_json(ckpt.config().at("encoder")), 0);
    for (auto& p : enc.params()) {
        if (!ckpt.has(p.name)) throw std::runtime_error("checkpoint is missing '" + p.name + "'");
        if (ckpt.shape(p.name) != p.tensor.shape())
            throw std::runtime_error("checkpoint entry '" + p.name + "' has shape " + shape_str(ckpt.shape(p.name)) +
                                     ", config expects " + shape_str(p.tensor.shape()));
        const auto values = ckpt.get_f32(p.name);
        std::copy(values.begin(), values.end(), p.tensor.mutable_data().begin());
    }
    return enc;
}

}  // namespace bioseq::encoder
