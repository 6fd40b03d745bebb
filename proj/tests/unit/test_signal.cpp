#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "bioseq/signal/audio.hpp"
#include "bioseq/signal/mfcc.hpp"
#include "wav_fixture.hpp"

using namespace bioseq::signal;

namespace {

double rms(const std::vector<float>& v, std::size_t skip = 0) {
    double s = 0.0;
    for (std::size_t i = skip; i < v.size() - skip; ++i) s += static_cast<double>(v[i]) * v[i];
    return std::sqrt(s / static_cast<double>(v.size() - 2 * skip));
}

// brute-force DFT magnitude peak in Hz
double dft_peak_hz(const std::vector<float>& v, int rate) {
    const std::size_t n = v.size();
    double best = -1.0;
    std::size_t best_k = 0;
    for (std::size_t k = 1; k < n / 2; ++k) {
        std::complex<double> acc = 0.0;
        const double w = -2.0 * 3.14159265358979323846 * static_cast<double>(k) / static_cast<double>(n);
        std::complex<double> step(std::cos(w), std::sin(w)), ph = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += ph * static_cast<double>(v[i]);
            ph *= step;
            if ((i & 1023) == 1023) ph /= std::abs(ph);
        }
        if (std::abs(acc) > best) {
            best = std::abs(acc);
            best_k = k;
        }
    }
    return static_cast<double>(best_k) * rate / static_cast<double>(n);
}

double mean_row_distance(const FrameSequence& a, const FrameSequence& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.dim; ++j) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t t = 0; t < a.frames; ++t) ma += a.at(t, j);
        for (std::size_t t = 0; t < b.frames; ++t) mb += b.at(t, j);
        ma /= static_cast<double>(a.frames);
        mb /= static_cast<double>(b.frames);
        d += (ma - mb) * (ma - mb);
    }
    return std::sqrt(d);
}

}  // namespace

TEST_CASE("wav reading") {
    const auto dir = fixture::temp_dir("signal_wav");

    SUBCASE("pcm16 mono at the target rate is passed through") {
        fixture::write_wav(dir / "a.wav", fixture::sine(440, 16000, 16000), 1, 16000, fixture::Encoding::pcm16);
        const Waveform w = load_audio(dir / "a.wav", 16000);
        CHECK(w.size() == 16000);
        CHECK(w.sample_rate_hz == 16000);
        CHECK(w.samples[4] == doctest::Approx(0.5 * std::sin(2 * M_PI * 440 * 4 / 16000.0)).epsilon(1e-4));
    }
    SUBCASE("32 kHz input is decimated 2:1") {
        fixture::write_wav(dir / "b.wav", fixture::sine(300, 32000, 32000), 1, 32000, fixture::Encoding::pcm16);
        CHECK(load_audio(dir / "b.wav", 16000).size() == 16000);
        fixture::write_wav(dir / "c.wav", fixture::sine(300, 32000, 16000), 1, 32000, fixture::Encoding::pcm16);
        CHECK(load_audio(dir / "c.wav", 16000).size() == 8000);
    }
    SUBCASE("float32 stereo is averaged to mono") {
        std::vector<float> inter;
        for (int i = 0; i < 100; ++i) {
            inter.push_back(0.25f);
            inter.push_back(-0.75f);
        }
        fixture::write_wav(dir / "d.wav", inter, 2, 16000, fixture::Encoding::float32);
        const Waveform w = read_wav(dir / "d.wav");
        REQUIRE(w.size() == 100);
        for (float s : w.samples) CHECK(s == -0.25f);
    }
    SUBCASE("extensible pcm16") {
        fixture::write_wav(dir / "e.wav", std::vector<float>(50, 0.5f), 1, 8000, fixture::Encoding::pcm16_extensible);
        const Waveform w = read_wav(dir / "e.wav");
        CHECK(w.size() == 50);
        CHECK(w.sample_rate_hz == 8000);
        CHECK(w.samples[0] == doctest::Approx(0.5).epsilon(1e-4));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(read_wav(dir / "missing.wav"), std::runtime_error);
        fixture::write_wav(dir / "f.wav", std::vector<float>(10, 0.1f), 1, 16000, fixture::Encoding::pcm24);
        CHECK_THROWS_WITH_AS(read_wav(dir / "f.wav"), doctest::Contains("unsupported"), std::runtime_error);
        fixture::write_wav(dir / "g.wav", {}, 1, 16000, fixture::Encoding::pcm16);
        CHECK_THROWS_WITH_AS(read_wav(dir / "g.wav"), doctest::Contains("zero-length"), std::runtime_error);
        std::ofstream(dir / "h.wav") << "not audio";
        CHECK_THROWS_AS(read_wav(dir / "h.wav"), std::runtime_error);
        fixture::write_wav(dir / "i.wav", std::vector<float>(10, 0.1f), 1, 16000, fixture::Encoding::pcm16);
        CHECK_THROWS_AS(load_audio(dir / "i.wav", 0), std::invalid_argument);
    }
}

TEST_CASE("wav writing") {
    const auto dir = fixture::temp_dir("wav_write");
    Waveform w;
    w.samples = fixture::sine(440.0, 16000, 4000, 0.7);
    w.samples[10] = 1.5f;   // clipped
    w.samples[11] = -1.5f;
    write_wav(dir / "a.wav", w);
    const auto back = read_wav(dir / "a.wav");
    CHECK(back.sample_rate_hz == 16000);
    REQUIRE(back.size() == w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const float expect = std::clamp(w.samples[i], -1.0f, 1.0f);
        CHECK(std::abs(back.samples[i] - expect) <= 1.5f / 32767.0f);
    }
    CHECK(std::filesystem::file_size(dir / "a.wav") == 44 + 2 * w.size());
    write_wav(dir / "b.wav", w);
    CHECK(fixture::read_bytes(dir / "a.wav") == fixture::read_bytes(dir / "b.wav"));
    CHECK_THROWS_AS(write_wav(dir / "c.wav", Waveform{}), std::invalid_argument);
}

TEST_CASE("resample") {
    SUBCASE("same rate is the identity") {
        Waveform w{fixture::sine(123, 16000, 16000), 16000};
        const Waveform r = resample(w, 16000);
        REQUIRE(r.size() == w.size());
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1e-6);
    }
    SUBCASE("output length rounds len * target / source") {
        for (int src : {8000, 11025, 22050, 32000, 44100, 48000, 96000}) {
            for (std::size_t len : {1u, 7u, 441u, 1000u, 12345u}) {
                Waveform w{std::vector<float>(len, 0.1f), src};
                const auto expect = static_cast<std::size_t>(std::llround(static_cast<double>(len) * 16000.0 / src));
                CHECK(resample(w, 16000).size() == expect);
            }
        }
    }
    SUBCASE("440 Hz at 48 kHz keeps its spectral peak") {
        Waveform w{fixture::sine(440, 48000, 48000), 48000};
        const Waveform r = resample(w, 16000);
        REQUIRE(r.size() == 16000);
        CHECK(std::abs(dft_peak_hz(r.samples, 16000) - 440.0) <= 1.0);
    }
    SUBCASE("1 kHz unit sine at 44.1 kHz keeps its RMS within 1%") {
        Waveform w{fixture::sine(1000, 44100, 44100, 1.0), 44100};
        const Waveform r = resample(w, 16000);
        CHECK(std::abs(rms(r.samples) / rms(w.samples) - 1.0) < 0.01);
    }
    SUBCASE("upsampling keeps band-limited energy") {
        Waveform w{fixture::sine(700, 8000, 8000, 1.0), 8000};
        const Waveform r = resample(w, 16000);
        CHECK(r.size() == 16000);
        CHECK(std::abs(rms(r.samples, 200) / rms(w.samples, 100) - 1.0) < 0.01);
    }
    SUBCASE("content above the output Nyquist is rejected") {
        Waveform w{fixture::sine(12000, 48000, 48000, 1.0), 48000};
        CHECK(rms(resample(w, 16000).samples, 100) < 0.01);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(resample(Waveform{{0.1f}, 16000}, 0), std::invalid_argument);
        CHECK_THROWS_AS(resample(Waveform{{}, 16000}, 8000), std::invalid_argument);
    }
}

TEST_CASE("mfcc") {
    const MfccConfig cfg;
    CHECK(cfg.window_samples(16000) == 400);
    CHECK(cfg.hop_samples(16000) == 160);
    CHECK(cfg.output_dim() == 39);

    SUBCASE("one second gives 98 frames of 39 values") {
        const FrameSequence f = mfcc(Waveform{fixture::sine(500, 16000, 16000), 16000}, cfg);
        CHECK(f.frames == 98);
        CHECK(f.dim == 39);
        CHECK(f.frame_rate_hz == 100.0);
        for (float v : f.values) CHECK(std::isfinite(v));
    }
    SUBCASE("frame count follows the closed form") {
        for (std::size_t len = 400; len < 5000; len += 37) {
            const std::size_t expect = (len - 400) / 160 + 1;
            CHECK(mfcc_frame_count(len, cfg) == expect);
            if (len % 5 == 0) CHECK(mfcc(Waveform{std::vector<float>(len, 0.01f), 16000}, cfg).frames == expect);
        }
    }
    SUBCASE("silence gives identical frames") {
        const FrameSequence f = mfcc(Waveform{std::vector<float>(8000, 0.0f), 16000}, cfg);
        for (std::size_t t = 1; t < f.frames; ++t)
            for (std::size_t j = 0; j < f.dim; ++j) CHECK(f.at(t, j) == f.at(0, j));
    }
    SUBCASE("tones at 500 Hz and 4 kHz differ") {
        const FrameSequence lo = mfcc(Waveform{fixture::sine(500, 16000, 16000), 16000}, cfg);
        const FrameSequence hi = mfcc(Waveform{fixture::sine(4000, 16000, 16000), 16000}, cfg);
        CHECK(mean_row_distance(lo, hi) > 1.0);
    }
    SUBCASE("deterministic") {
        const Waveform w{fixture::sine(777, 16000, 9000), 16000};
        CHECK(mfcc(w, cfg).values == mfcc(w, cfg).values);
    }
    SUBCASE("deltas of a stationary tone are near zero in the interior") {
        const FrameSequence f = mfcc(Waveform{fixture::sine(1000, 16000, 16000), 16000}, cfg);
        for (std::size_t t = 5; t + 5 < f.frames; ++t)
            for (std::size_t j = 13; j < 39; ++j) CHECK(std::abs(f.at(t, j)) < 0.05);
    }
    SUBCASE("without deltas") {
        MfccConfig c = cfg;
        c.add_deltas = false;
        CHECK(mfcc(Waveform{std::vector<float>(400, 0.1f), 16000}, c).dim == 13);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(mfcc(Waveform{std::vector<float>(399, 0.1f), 16000}, cfg), std::invalid_argument);
        CHECK_THROWS_AS(mfcc(Waveform{std::vector<float>(1000, 0.1f), 8000}, cfg), std::invalid_argument);
        MfccConfig bad = cfg;
        bad.hop_ms = 0;
        bad.n_coeffs = 40;
        CHECK_THROWS_WITH_AS(mfcc(Waveform{std::vector<float>(1000, 0.1f), 16000}, bad),
                             doctest::Contains("n_coeffs"), std::invalid_argument);
    }
}
