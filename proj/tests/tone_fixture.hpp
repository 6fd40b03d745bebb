#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bioseq/num/random.hpp"
#include "bioseq/pseudolabel/labels.hpp"

// Utterances of one or two steady tones with light noise.
namespace fixture {

inline std::vector<bioseq::pseudolabel::Utterance> tone_corpus(std::size_t n, std::uint64_t seed, double min_s,
                                                                double max_s) {
    const double freqs[] = {300, 800, 1800, 3600};
    std::vector<bioseq::pseudolabel::Utterance> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = bioseq::num::make_rng(seed, {0x70e, i});
        const auto len = static_cast<std::size_t>((min_s + (max_s - min_s) * bioseq::num::uniform01(rng)) * 16000);
        const double f1 = freqs[i % 4];
        const double f2 = freqs[(i / 4 + i) % 4];
        const std::size_t cut = i % 2 ? len / 2 : len;
        bioseq::signal::Waveform w;
        w.samples.resize(len);
        double phase = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            phase += 2.0 * 3.14159265358979323846 * (t < cut ? f1 : f2) / 16000.0;
            w.samples[t] = static_cast<float>(0.5 * std::sin(phase) + 0.01 * bioseq::num::normal01(rng));
        }
        out.push_back({"utt" + std::to_string(i), std::move(w)});
    }
    return out;
}

}  // namespace fixture
