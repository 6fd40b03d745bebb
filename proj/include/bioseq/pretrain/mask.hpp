#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bioseq/num/tensor.hpp"

namespace bioseq::pretrain {

using num::Tensor;

struct MaskSpec {
    std::size_t frames = 0;
    std::vector<std::size_t> indices;  // sorted, unique
    double mask_prob = 0.08;
    std::size_t span_len = 10;

    bool contains(std::size_t t) const;
    double fraction() const { return frames ? static_cast<double>(indices.size()) / frames : 0.0; }
};

// Every frame starts a span of span_len with probability p; spans are merged
// and truncated at T. When nothing is drawn, one span of min(l, T) frames is
// placed uniformly.
MaskSpec sample_mask(std::size_t T, double p, std::size_t span_len, std::uint64_t seed);

// Mean negative log-likelihood of labels over the masked rows of logits[T,k].
Tensor masked_prediction_loss(const Tensor& logits, std::span<const int> labels, const MaskSpec& mask);

// Number of masked rows whose argmax equals the label.
std::size_t masked_correct(const Tensor& logits, std::span<const int> labels, const MaskSpec& mask);

}  // namespace bioseq::pretrain
