#pragma once

#include <cstddef>

#include "bioseq/signal/audio.hpp"
#include "bioseq/signal/frames.hpp"

namespace bioseq::signal {

struct MfccConfig {
    double window_ms = 25.0;
    double hop_ms = 10.0;
    int n_mels = 26;
    int n_coeffs = 13;
    bool add_deltas = true;
    double preemphasis = 0.97;
    double log_floor = 1e-10;

    void validate() const;
    std::size_t window_samples(int rate_hz) const;
    std::size_t hop_samples(int rate_hz) const;
    std::size_t output_dim() const { return static_cast<std::size_t>(add_deltas ? 3 * n_coeffs : n_coeffs); }
};

// floor((len - window) / hop) + 1, or 0 when len < window.
std::size_t mfcc_frame_count(std::size_t length, const MfccConfig& cfg, int rate_hz = kTargetRateHz);

// pre-emphasis -> Hann -> |FFT|^2 -> HTK mel bank -> log(max(e, floor)) ->
// orthonormal DCT-II, then +/-2 frame regression deltas and delta-deltas.
// Requires 16 kHz input at least one window long.
FrameSequence mfcc(const Waveform& w, const MfccConfig& cfg = {});

}  // namespace bioseq::signal
