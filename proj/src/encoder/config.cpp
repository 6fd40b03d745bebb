#include "bioseq/encoder/config.hpp"

#include <stdexcept>
#include <string>

namespace bioseq::encoder {

std::size_t CnnFrontendConfig::total_stride() const {
    std::size_t s = 1;
    for (const auto& l : layers) s *= l.stride;
    return s;
}

std::size_t CnnFrontendConfig::receptive_field() const {
    std::size_t rf = 1, jump = 1;
    for (const auto& l : layers) {
        rf += (l.kernel - 1) * jump;
        jump *= l.stride;
    }
    return rf;
}

std::size_t CnnFrontendConfig::output_length(std::size_t samples) const {
    std::size_t n = samples;
    for (const auto& l : layers) {
        if (n < l.kernel) return 0;
        n = (n - l.kernel) / l.stride + 1;
    }
    return n;
}

void EncoderConfig::validate() const {
    std::string bad;
    auto need = [&bad](bool ok, const char* what) {
        if (!ok) bad += std::string(" ") + what + ";";
    };
    need(n_layers >= 1, "n_layers must be >= 1");
    need(d >= 1, "d must be >= 1");
    need(phase2_feature_layer >= 1 && phase2_feature_layer <= n_layers, "phase2_feature_layer must be in [1, n_layers]");
    need(!cnn.layers.empty(), "cnn.layers must not be empty");
    for (const auto& l : cnn.layers) need(l.kernel >= 1 && l.stride >= 1, "cnn kernel and stride must be >= 1");
    need(cnn.channels >= 1, "cnn.channels must be >= 1");
    if (kind == LayerKind::mamba) {
        need(mamba.state_dim >= 1, "mamba.state_dim must be >= 1");
        need(mamba.expand >= 1, "mamba.expand must be >= 1");
        need(mamba.head_dim >= 1 && d_inner() % mamba.head_dim == 0, "mamba.head_dim must divide expand * d");
        need(mamba.conv_width >= 1, "mamba.conv_width must be >= 1");
        need(mamba.chunk >= 1, "mamba.chunk must be >= 1");
    } else {
        need(attention_heads >= 1 && d % attention_heads == 0, "attention_heads must divide d");
    }
    if (!bad.empty()) throw std::invalid_argument("invalid encoder config:" + bad);
}

EncoderConfig EncoderConfig::full() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::desk() {
    EncoderConfig c;
    c.n_layers = 8;
    c.d = 64;
    c.attention_heads = 8;
    c.cnn.channels = 32;
    c.mamba.state_dim = 16;
    c.mamba.head_dim = 8;
    return c;
}

const char* to_string(LayerKind k) { return k == LayerKind::mamba ? "mamba" : "attention"; }

LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "mamba") return LayerKind::mamba;
    if (s == "attention") return LayerKind::attention;
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

nlohmann::json to_json(const EncoderConfig& c) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : c.cnn.layers) layers.push_back({l.kernel, l.stride});
    return {{"kind", to_string(c.kind)},
            {"n_layers", c.n_layers},
            {"d", c.d},
            {"phase2_feature_layer", c.phase2_feature_layer},
            {"attention_heads", c.attention_heads},
            {"cnn", {{"layers", layers}, {"channels", c.cnn.channels}}},
            {"mamba",
             {{"state_dim", c.mamba.state_dim},
              {"head_dim", c.mamba.head_dim},
              {"expand", c.mamba.expand},
              {"conv_width", c.mamba.conv_width},
              {"chunk", c.mamba.chunk}}}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.kind = layer_kind_from_string(j.value("kind", std::string("mamba")));
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d = j.value("d", c.d);
    c.phase2_feature_layer = j.value("phase2_feature_layer", c.phase2_feature_layer);
    c.attention_heads = j.value("attention_heads", c.attention_heads);
    if (j.contains("cnn")) {
        const auto& cj = j.at("cnn");
        c.cnn.channels = cj.value("channels", c.cnn.channels);
        if (cj.contains("layers")) {
            c.cnn.layers.clear();
            for (const auto& l : cj.at("layers")) c.cnn.layers.push_back({l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>()});
        }
    }
    if (j.contains("mamba")) {
        const auto& mj = j.at("mamba");
        c.mamba.state_dim = mj.value("state_dim", c.mamba.state_dim);
        c.mamba.head_dim = mj.value("head_dim", c.mamba.head_dim);
        c.mamba.expand = mj.value("expand", c.mamba.expand);
        c.mamba.conv_width = mj.value("conv_width", c.mamba.conv_width);
        c.mamba.chunk = mj.value("chunk", c.mamba.chunk);
    }
    return c;
}

}  // namespace bioseq::encoder
