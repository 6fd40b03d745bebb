#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace bioseq::signal {

// Row-major [frames, dim] feature matrix at a fixed frame rate.
struct FrameSequence {
    std::size_t frames = 0;
    std::size_t dim = 0;
    double frame_rate_hz = 0.0;
    std::vector<float> values;

    FrameSequence() = default;
    FrameSequence(std::size_t t, std::size_t d, double rate)
        : frames(t), dim(d), frame_rate_hz(rate), values(t * d, 0.0f) {}

    std::span<float> row(std::size_t t) { return {values.data() + t * dim, dim}; }
    std::span<const float> row(std::size_t t) const { return {values.data() + t * dim, dim}; }
    float& at(std::size_t t, std::size_t j) { return values[t * dim + j]; }
    float at(std::size_t t, std::size_t j) const { return values[t * dim + j]; }
};

}  // namespace bioseq::signal
