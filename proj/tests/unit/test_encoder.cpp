#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "bioseq/encoder/encoder.hpp"
#include "bioseq/encoder/ssd.hpp"
#include "bioseq/num/ops.hpp"
#include "model_grad_suite.hpp"

using namespace bioseq;
using namespace bioseq::encoder;
using num::Tensor;

using grad_suite::noise;
using grad_suite::tiny_config;

TEST_CASE("frontend geometry") {
    const CnnFrontendConfig cnn;
    CHECK(cnn.total_stride() == 320);
    CHECK(cnn.receptive_field() == 400);
    CHECK(cnn.output_length(16000) == 49);
    CHECK(cnn.output_length(399) == 0);
    CHECK(cnn.output_length(400) == 1);
    for (std::size_t k = 1; k <= 50; ++k) {
        CHECK(cnn.output_length(400 + 320 * k) == k + 1);
        CHECK(cnn.output_length(400 + 320 * k + 319) == k + 1);
    }
    auto rng = num::make_rng(11);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t len = rng() % 2000000;
        const std::size_t expect = len < 400 ? 0 : (len - 400) / 320 + 1;
        CHECK(cnn.output_length(len) == expect);
    }
}

TEST_CASE("frontend forward") {
    const EncoderConfig cfg = EncoderConfig::desk();
    const Encoder enc(cfg, 5);
    num::NoGradGuard ng;

    SUBCASE("one second gives 49 frames") {
        const auto out = enc.features(noise(16000, 1));
        CHECK(out.frames.shape() == num::Shape{49, 64});
        CHECK(out.valid == 49);
        for (std::size_t len : {400u, 719u, 720u, 5000u}) CHECK(enc.features(noise(len, 2)).frames.rows() == cfg.cnn.output_length(len));
    }
    SUBCASE("zero waveform gives identical frames") {
        signal::Waveform w;
        w.samples.assign(8000, 0.0f);
        const Tensor f = enc.features(w).frames;
        for (std::size_t t = 1; t < f.rows(); ++t)
            for (std::size_t j = 0; j < f.cols(); ++j) CHECK(f.at(t, j) == f.at(0, j));
    }
    SUBCASE("zero padding leaves valid frames untouched") {
        const auto w = noise(7000, 3);
        auto padded = w;
        padded.samples.resize(12000, 0.0f);
        const auto a = enc.features(w);
        const auto b = enc.features(waveform_tensor(padded), w.size());
        REQUIRE(b.valid == a.valid);
        for (std::size_t t = 0; t < a.valid; ++t)
            for (std::size_t j = 0; j < 64; ++j) CHECK(a.frames.at(t, j) == b.frames.at(t, j));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(enc.features(noise(399, 4)), std::invalid_argument);
        signal::Waveform w = noise(1000, 4);
        w.sample_rate_hz = 8000;
        CHECK_THROWS_AS(enc.features(w), std::invalid_argument);
    }
}

TEST_CASE("chunked scan matches the recurrence") {
    double worst_fwd = 0.0, worst_bwd = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto c = ssd_fixture::make_case(seed, 256);
        worst_fwd = std::max(worst_fwd, ssd_fixture::forward_max_abs_diff(c));
        if (c.inputs[0].rows() <= 128) worst_bwd = std::max(worst_bwd, ssd_fixture::backward_rel_diff(c, seed));
    }
    CHECK(worst_fwd < 1e-4);
    CHECK(worst_bwd < 1e-3);
}

TEST_CASE("single step") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        auto c = ssd_fixture::make_case(seed, 1);
        num::NoGradGuard ng;
        const Tensor a = ssd_fixture::run(c, true), b = ssd_fixture::run(c, false);
        for (std::size_t i = 0; i < a.numel(); ++i)
            CHECK(std::abs(a.data()[i] - b.data()[i]) <= 1e-6 * std::max(1.0f, std::abs(b.data()[i])));
    }
}

TEST_CASE("scan gradients match finite differences") {
    const double worst_c = grad_suite::scan_worst(true), worst_r = grad_suite::scan_worst(false);
    CHECK_MESSAGE(worst_c < 1e-3, "chunked " << worst_c);
    CHECK_MESSAGE(worst_r < 1e-3, "recurrent " << worst_r);
}

TEST_CASE("scan rejects bad shapes") {
    const auto c = ssd_fixture::make_case(1, 8);
    const auto& in = c.inputs;
    CHECK_THROWS_AS(ssd_chunked(in[0], in[1], in[2], in[3], in[4], in[5], 0), std::invalid_argument);
    CHECK_THROWS_AS(ssd_chunked(in[0], in[1], in[5], in[3], Tensor::zeros({in[0].rows(), in[3].cols() + 1}), in[5]),
                    std::invalid_argument);
    CHECK_THROWS_AS(ssd_recurrent(in[0], in[1], Tensor::zeros({in[2].numel() + 1}), in[3], in[4], in[5]),
                    std::invalid_argument);
}

TEST_CASE("causality") {
    const EncoderConfig cfg = EncoderConfig::desk();
    const Encoder enc(cfg, 9);
    num::NoGradGuard ng;
    auto rng = num::make_rng(4);
    Tensor x = gradcheck::random_tensor({150, cfg.d}, rng, 1.0, false);
    const std::size_t t0 = 77;

    SUBCASE("scan") {
        auto c = ssd_fixture::make_case(3, 200);
        const Tensor before = ssd_fixture::run(c, true);
        const std::size_t t = c.inputs[0].rows() / 2;
        c.inputs[0].mutable_data()[t * c.inputs[0].cols()] += 1.0f;
        c.inputs[3].mutable_data()[t * c.inputs[3].cols()] += 1.0f;
        const Tensor after = ssd_fixture::run(c, true);
        for (std::size_t i = 0; i < t * before.cols(); ++i) CHECK(before.data()[i] == after.data()[i]);
        bool changed = false;
        for (std::size_t i = t * before.cols(); i < before.numel(); ++i) changed |= before.data()[i] != after.data()[i];
        CHECK(changed);
    }
    SUBCASE("every layer and the stack") {
        const Tensor base = enc.layers(x);
        std::vector<Tensor> per_layer;
        for (const auto& l : enc.mamba_layers()) per_layer.push_back(l.forward(x));
        Tensor y = x.clone();
        for (std::size_t j = 0; j < cfg.d; ++j) y.mutable_data()[t0 * cfg.d + j] += 0.5f;
        const Tensor pert = enc.layers(y);
        for (std::size_t i = 0; i < t0 * cfg.d; ++i) REQUIRE(base.data()[i] == pert.data()[i]);
        CHECK(base.data()[t0 * cfg.d] != pert.data()[t0 * cfg.d]);
        for (std::size_t l = 0; l < per_layer.size(); ++l) {
            const Tensor p = enc.mamba_layers()[l].forward(y);
            for (std::size_t i = 0; i < t0 * cfg.d; ++i) REQUIRE(per_layer[l].data()[i] == p.data()[i]);
        }
    }
}

TEST_CASE("mamba layer") {
    EncoderConfig cfg = tiny_config();
    auto rng = num::make_rng(21);
    const MambaLayer layer(cfg, rng);

    SUBCASE("chunked and recurrent paths agree") {
        num::NoGradGuard ng;
        auto xr = num::make_rng(22);
        const Tensor x = gradcheck::random_tensor({37, cfg.d}, xr, 1.0, false);
        const Tensor a = layer.forward(x, ScanPath::chunked), b = layer.forward(x, ScanPath::recurrent);
        for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-4);
    }
    SUBCASE("decay is negative and step sizes positive") {
        const Tensor a = num::scale(num::exp(layer.A_log), -1.0f);
        const Tensor dt = num::softplus(layer.dt_bias);
        for (float v : a.data()) CHECK(v < 0.0f);
        for (float v : dt.data()) CHECK(v > 0.0f);
    }
    SUBCASE("gradients match finite differences") {
        const double worst = grad_suite::mamba_layer_worst();
        CHECK_MESSAGE(worst < 1e-3, "mamba layer " << worst);
    }
    SUBCASE("shape errors") {
        CHECK_THROWS_AS(layer.forward(Tensor::zeros({3, cfg.d + 1})), std::invalid_argument);
    }
}

TEST_CASE("attention layer") {
    EncoderConfig cfg = tiny_config();
    cfg.kind = LayerKind::attention;
    cfg.d = 8;
    auto rng = num::make_rng(31);
    const AttentionLayer layer(cfg, rng);

    SUBCASE("single token attends to itself") {
        num::NoGradGuard ng;
        auto xr = num::make_rng(1);
        const Tensor x = gradcheck::random_tensor({1, 8}, xr, 1.0, false);
        AttentionTrace trace;
        const Tensor y = layer.forward(x, &trace);
        for (float p : trace.probs.data()) CHECK(p == 1.0f);
        // value path by hand
        const Tensor v = num::slice_cols(num::linear(num::layernorm(x, layer.ln1_g, layer.ln1_b), layer.w_qkv, layer.b_qkv), 16, 8);
        const Tensor h = num::add(x, num::linear(v, layer.w_o, layer.b_o));
        const Tensor expect = num::add(
            h, num::linear(num::gelu(num::linear(num::layernorm(h, layer.ln2_g, layer.ln2_b), layer.w_1, layer.b_1)),
                           layer.w_2, layer.b_2));
        for (std::size_t i = 0; i < 8; ++i) CHECK(y.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-6));
    }
    SUBCASE("identical tokens give uniform weights") {
        num::NoGradGuard ng;
        std::vector<float> row = {0.3f, -1.0f, 0.2f, 0.9f, 0.0f, 0.5f, -0.4f, 1.1f};
        std::vector<float> all;
        for (int t = 0; t < 6; ++t) all.insert(all.end(), row.begin(), row.end());
        AttentionTrace trace;
        layer.forward(Tensor::from({6, 8}, all), &trace);
        CHECK(trace.probs.shape() == num::Shape{2, 6, 6});
        for (float p : trace.probs.data()) CHECK(p == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
    }
    SUBCASE("gradients match finite differences at T=4, d=8") {
        const double worst = grad_suite::attention_layer_worst();
        CHECK_MESSAGE(worst < 1e-3, "attention layer " << worst);
    }
}

TEST_CASE("full encoder gradients match finite differences") {
    const double worst = grad_suite::encoder_worst();
    CHECK_MESSAGE(worst < 1e-3, "encoder " << worst);
}

TEST_CASE("encoder forward") {
    const EncoderConfig cfg = EncoderConfig::desk();
    const Encoder enc(cfg, 13);
    num::NoGradGuard ng;
    const auto w = noise(16000, 5);

    SUBCASE("return_layer") {
        const Tensor full = enc.forward(w);
        CHECK(enc.forward(w, cfg.n_layers).to_vector() == full.to_vector());
        CHECK(enc.forward(w, 6).shape() == num::Shape{49, 64});
        CHECK(enc.forward(w, 6).to_vector() != full.to_vector());
        CHECK_THROWS_AS(enc.forward(w, 0), std::invalid_argument);
        CHECK_THROWS_AS(enc.forward(w, 9), std::invalid_argument);
    }
    SUBCASE("different inputs give different encodings") {
        const Tensor a = enc.forward(w), b = enc.forward(noise(16000, 6));
        double d2 = 0.0;
        for (std::size_t i = 0; i < a.numel(); ++i) d2 += std::pow(a.data()[i] - b.data()[i], 2);
        CHECK(d2 > 0.0);
    }
    SUBCASE("deterministic per seed") {
        const Encoder again(cfg, 13);
        CHECK(again.forward(w).to_vector() == enc.forward(w).to_vector());
        const Encoder other(cfg, 14);
        CHECK(other.forward(w).to_vector() != enc.forward(w).to_vector());
    }
    SUBCASE("checkpoint round trip") {
        const auto dir = std::filesystem::temp_directory_path() / "bioseq_test_encoder";
        std::filesystem::create_directories(dir);
        num::Checkpoint ck;
        enc.save(ck);
        ck.save(dir / "enc.bmck");
        const Encoder back = Encoder::load(num::Checkpoint::load(dir / "enc.bmck"));
        CHECK(back.forward(w).to_vector() == enc.forward(w).to_vector());
        EncoderConfig wider = cfg;
        wider.d = 32;
        ck.config()["encoder"] = to_json(wider);
        CHECK_THROWS_AS(Encoder::load(ck), std::runtime_error);
    }
    SUBCASE("config json round trip and validation") {
        const auto j = to_json(cfg);
        CHECK(to_json(encoder_config_from_json(j)) == j);
        EncoderConfig bad = cfg;
        bad.phase2_feature_layer = 9;
        bad.mamba.head_dim = 7;
        try {
            bad.validate();
            FAIL("expected failure");
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find("phase2_feature_layer") != std::string::npos);
            CHECK(std::string(e.what()).find("head_dim") != std::string::npos);
        }
    }
}
