#include "bioseq/pretrain/mask.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "bioseq/num/ops.hpp"
#include "bioseq/num/random.hpp"

namespace bioseq::pretrain {

bool MaskSpec::contains(std::size_t t) const { return std::binary_search(indices.begin(), indices.end(), t); }

MaskSpec sample_mask(std::size_t T, double p, std::size_t span_len, std::uint64_t seed) {
    if (T == 0) throw std::invalid_argument("sample_mask: T must be at least 1");
    if (span_len == 0) throw std::invalid_argument("sample_mask: span_len must be at least 1");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sample_mask: mask_prob must be in [0, 1]");

    MaskSpec m;
    m.frames = T;
    m.mask_prob = p;
    m.span_len = span_len;

    auto rng = num::make_rng(seed, {0x3a5c});
    std::vector<char> hit(T, 0);
    bool any = false;
    for (std::size_t t = 0; t < T; ++t) {
        if (num::uniform01(rng) < p) {
            std::fill(hit.begin() + static_cast<std::ptrdiff_t>(t), hit.begin() + static_cast<std::ptrdiff_t>(std::min(T, t + span_len)), 1);
            any = true;
        }
    }
    if (!any) {
        const std::size_t len = std::min(span_len, T);
        const std::size_t start = static_cast<std::size_t>(num::uniform01(rng) * static_cast<double>(T - len + 1));
        std::fill_n(hit.begin() + static_cast<std::ptrdiff_t>(start), len, 1);
    }
    for (std::size_t t = 0; t < T; ++t)
        if (hit[t]) m.indices.push_back(t);
    return m;
}

namespace {

std::vector<int> masked_targets(const Tensor& logits, std::span<const int> labels, const MaskSpec& mask) {
    if (mask.indices.empty()) throw std::invalid_argument("masked prediction: empty mask");
    if (labels.size() != logits.rows())
        throw std::invalid_argument("masked prediction: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(logits.rows()) + " frames");
    std::vector<int> out;
    out.reserve(mask.indices.size());
    for (std::size_t t : mask.indices) {
        if (t >= labels.size()) throw std::invalid_argument("masked prediction: mask index out of range");
        const int z = labels[t];
        if (z < 0 || static_cast<std::size_t>(z) >= logits.cols())
            throw std::invalid_argument("masked prediction: label " + std::to_string(z) + " outside [0, " +
                                        std::to_string(logits.cols()) + ")");
        out.push_back(z);
    }
    return out;
}

}  // namespace

Tensor masked_prediction_loss(const Tensor& logits, std::span<const int> labels, const MaskSpec& mask) {
    const auto targets = masked_targets(logits, labels, mask);
    return num::cross_entropy(num::gather_rows(logits, mask.indices), targets);
}

std::size_t masked_correct(const Tensor& logits, std::span<const int> labels, const MaskSpec& mask) {
    const auto targets = masked_targets(logits, labels, mask);
    const std::size_t k = logits.cols();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const float* row = logits.data().data() + mask.indices[i] * k;
        const auto best = static_cast<int>(std::max_element(row, row + k) - row);
        if (best == targets[i]) ++correct;
    }
    return correct;
}

}  // namespace bioseq::pretrain
