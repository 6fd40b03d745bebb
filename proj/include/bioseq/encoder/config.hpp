#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <json.hpp>

namespace bioseq::encoder {

struct ConvSpec {
    std::size_t kernel;
    std::size_t stride;
};

struct CnnFrontendConfig {
    std::vector<ConvSpec> layers = {{10, 5}, {3, 2}, {3, 2}, {3, 2}, {3, 2}, {2, 2}, {2, 2}};
    std::size_t channels = 512;

    std::size_t total_stride() const;
    std::size_t receptive_field() const;
    // Frames produced from `samples` inputs; 0 below the receptive field.
    std::size_t output_length(std::size_t samples) const;
};

struct MambaConfig {
    std::size_t state_dim = 64;
    std::size_t head_dim = 32;
    std::size_t expand = 2;
    std::size_t conv_width = 4;
    std::size_t chunk = 64;
};

enum class LayerKind { mamba, attention };

struct EncoderConfig {
    LayerKind kind = LayerKind::mamba;
    std::size_t n_layers = 12;
    std::size_t d = 768;
    std::size_t phase2_feature_layer = 6;
    std::size_t attention_heads = 12;
    CnnFrontendConfig cnn;
    MambaConfig mamba;

    std::size_t d_inner() const { return mamba.expand * d; }
    std::size_t n_heads() const { return d_inner() / mamba.head_dim; }

    // Every problem is listed in one std::invalid_argument.
    void validate() const;

    static EncoderConfig full();
    static EncoderConfig desk();
};

nlohmann::json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

const char* to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

}  // namespace bioseq::encoder
