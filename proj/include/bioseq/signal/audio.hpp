#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace bioseq::signal {

inline constexpr int kTargetRateHz = 16000;

struct Waveform {
    std::vector<float> samples;
    int sample_rate_hz = kTargetRateHz;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

// Throws std::invalid_argument on an empty waveform, a non-positive rate, or
// non-finite samples.
void validate(const Waveform& w);

// RIFF/WAVE with 16-bit integer or 32-bit float samples (plain or
// WAVE_FORMAT_EXTENSIBLE). Channels are averaged to mono.
Waveform read_wav(const std::filesystem::path& path);

// Mono 16-bit PCM; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& w);

// read_wav followed by resample to target_rate_hz.
Waveform load_audio(const std::filesystem::path& path, int target_rate_hz = kTargetRateHz);

// Kaiser-windowed sinc interpolation at the reduced ratio target/source, low-pass
// at the lower of the two Nyquist rates. Output length is
// round(len * target / source); a same-rate call returns a copy.
Waveform resample(const Waveform& w, int target_rate_hz);

}  // namespace bioseq::signal
