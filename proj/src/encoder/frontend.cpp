#include <cmath>

#include "bioseq/encoder/layers.hpp"
#include "bioseq/num/ops.hpp"
#include "init.hpp"

namespace bioseq::encoder {

using namespace bioseq::num;

CnnFrontend::CnnFrontend(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg.cnn) {
    const std::size_t c = cfg_.channels;
    std::size_t in = 1;
    for (const auto& l : cfg_.layers) {
        const double fan_in = static_cast<double>(in * l.kernel);
        conv_w.push_back(init::normal({c, in, l.kernel}, std::sqrt(2.0 / fan_in), rng));
        in = c;
    }
    gn_g = init::constant({c}, 1.0f);
    gn_b = init::constant({c}, 0.0f);
    ln_g = init::constant({c}, 1.0f);
    ln_b = init::constant({c}, 0.0f);
    proj_w = init::normal({c, cfg.d}, 1.0 / std::sqrt(static_cast<double>(c)), rng);
    proj_b = init::constant({cfg.d}, 0.0f);
}

FrontendOutput CnnFrontend::forward(const Tensor& wave, std::size_t valid_samples) const {
    if (wave.ndim() != 2 || wave.cols() != 1)
        throw std::invalid_argument("cnn frontend: expected [L, 1] waveform, got " + shape_str(wave.shape()));
    if (valid_samples > wave.rows()) throw std::invalid_argument("cnn frontend: valid length exceeds input");
    const std::size_t rf = cfg_.receptive_field();
    if (valid_samples < rf)
        throw std::invalid_argument("cnn frontend: input of " + std::to_string(valid_samples) +
                                    " samples is shorter than the receptive field (" + std::to_string(rf) + ")");
    Tensor h = wave;
    std::size_t valid = valid_samples;
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
        Conv1dOptions opt;
        opt.stride = cfg_.layers[i].stride;
        h = conv1d(h, conv_w[i], Tensor{}, opt);
        valid = conv1d_output_length(valid, cfg_.layers[i].kernel, cfg_.layers[i].stride, false);
        if (i == 0) h = group_norm_time(h, gn_g, gn_b, valid);
        h = gelu(h);
    }
    return {linear(layernorm(h, ln_g, ln_b), proj_w, proj_b), valid};
}

void CnnFrontend::collect(ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < conv_w.size(); ++i) out.push_back({prefix + "conv" + std::to_string(i), conv_w[i]});
    out.push_back({prefix + "gn_g", gn_g});
    out.push_back({prefix + "gn_b", gn_b});
    out.push_back({prefix + "ln_g", ln_g});
    out.push_back({prefix + "ln_b", ln_b});
    out.push_back({prefix + "proj_w", proj_w});
    out.push_back({prefix + "proj_b", proj_b});
}

}  // namespace bioseq::encoder
