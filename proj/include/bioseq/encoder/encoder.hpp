#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bioseq/encoder/config.hpp"
#include "bioseq/encoder/layers.hpp"
#include "bioseq/num/checkpoint.hpp"
#include "bioseq/signal/audio.hpp"

namespace bioseq::encoder {

class Encoder {
public:
    Encoder(const EncoderConfig& cfg, std::uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }

    // wave [L, 1] -> [T, d] frontend features.
    FrontendOutput features(const Tensor& wave, std::size_t valid_samples) const;
    FrontendOutput features(const signal::Waveform& w) const;

    // Runs layers 1..return_layer (default: all) over frontend features and
    // returns that layer's post-residual output.
    Tensor layers(const Tensor& feats, std::optional<std::size_t> return_layer = std::nullopt,
                  ScanPath path = ScanPath::chunked) const;

    Tensor forward(const signal::Waveform& w, std::optional<std::size_t> return_layer = std::nullopt) const;

    ParamList params() const;
    ParamList frontend_params() const;
    ParamList layer_params() const;

    // Parameters go under "encoder.*" entries, the config under config()["encoder"].
    void save(num::Checkpoint& ckpt) const;
    static Encoder load(const num::Checkpoint& ckpt);

    const CnnFrontend& frontend() const { return frontend_; }
    const std::vector<MambaLayer>& mamba_layers() const { return mamba_; }
    const std::vector<AttentionLayer>& attention_layers() const { return attention_; }

private:
    EncoderConfig cfg_;
    CnnFrontend frontend_;
    std::vector<MambaLayer> mamba_;
    std::vector<AttentionLayer> attention_;
};

Tensor waveform_tensor(const signal::Waveform& w);

}  // namespace bioseq::encoder
