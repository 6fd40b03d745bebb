#pragma once

#include <cmath>
#include <vector>

#include "bioseq/num/random.hpp"
#include "bioseq/num/tensor.hpp"

namespace bioseq::encoder::init {

inline num::Tensor normal(num::Shape shape, double stddev, num::Rng& rng) {
    std::vector<float> v(num::numel(shape));
    for (auto& x : v) x = static_cast<float>(stddev * num::normal01(rng));
    return num::Tensor::from(std::move(shape), v, true);
}

inline num::Tensor uniform(num::Shape shape, double lo, double hi, num::Rng& rng) {
    std::vector<float> v(num::numel(shape));
    for (auto& x : v) x = static_cast<float>(lo + (hi - lo) * num::uniform01(rng));
    return num::Tensor::from(std::move(shape), v, true);
}

inline num::Tensor constant(num::Shape shape, float value) { return num::Tensor::full(std::move(shape), value, true); }

}  // namespace bioseq::encoder::init
