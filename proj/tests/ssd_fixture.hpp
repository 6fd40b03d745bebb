#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bioseq/encoder/ssd.hpp"
#include "bioseq/num/ops.hpp"
#include "bioseq/num/random.hpp"

namespace ssd_fixture {

using bioseq::num::Tensor;

struct Case {
    std::vector<Tensor> inputs;  // x, dt, A, B, C, D
    std::size_t chunk = 64;
};

inline Tensor draw(bioseq::num::Shape shape, bioseq::num::Rng& rng, double lo, double hi, bool grad) {
    std::vector<float> v(bioseq::num::numel(shape));
    for (auto& x : v) x = static_cast<float>(lo + (hi - lo) * bioseq::num::uniform01(rng));
    return Tensor::from(std::move(shape), v, grad);
}

// T in [1, t_max]; dt in (0.01, 0.5), A in (-2, -0.1) so decays stay in a
// realistic range.
inline Case make_case(std::uint64_t seed, std::size_t t_max, std::size_t dim_max = 6) {
    auto rng = bioseq::num::make_rng(seed, {0x55d});
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
    const std::size_t T = pick(1, t_max), H = pick(1, 4), P = pick(1, dim_max), N = pick(1, dim_max);
    const std::size_t chunks[] = {1, 3, 7, 16, 64};
    Case c;
    c.chunk = chunks[rng() % 5];
    c.inputs = {draw({T, H * P}, rng, -1, 1, true), draw({T, H}, rng, 0.01, 0.5, true), draw({H}, rng, -2, -0.1, true),
                draw({T, N}, rng, -1, 1, true),      draw({T, N}, rng, -1, 1, true),       draw({H}, rng, -1, 1, true)};
    return c;
}

inline Tensor run(const Case& c, bool chunked) {
    const auto& in = c.inputs;
    return chunked ? bioseq::encoder::ssd_chunked(in[0], in[1], in[2], in[3], in[4], in[5], c.chunk)
                   : bioseq::encoder::ssd_recurrent(in[0], in[1], in[2], in[3], in[4], in[5]);
}

inline double forward_max_abs_diff(const Case& c) {
    bioseq::num::NoGradGuard ng;
    const Tensor a = run(c, true), b = run(c, false);
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
    return m;
}

// Worst over inputs of ||g_chunked - g_recurrent|| / max(||g_recurrent||, 1e-6)
// for the scalar loss sum(w * y) with fixed random w.
inline double backward_rel_diff(const Case& c, std::uint64_t seed) {
    auto rng = bioseq::num::make_rng(seed, {0x9e7});
    const std::size_t n = c.inputs[0].numel();
    std::vector<float> w(n);
    for (auto& v : w) v = static_cast<float>(bioseq::num::normal01(rng));
    const Tensor wt = Tensor::from(c.inputs[0].shape(), w);
    auto ga = bioseq::num::backward(bioseq::num::sum(bioseq::num::mul(run(c, true), wt)));
    auto gb = bioseq::num::backward(bioseq::num::sum(bioseq::num::mul(run(c, false), wt)));
    double worst = 0.0;
    for (const auto& in : c.inputs) {
        const auto a = ga.at(in), b = gb.at(in);
        double d2 = 0.0, b2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            d2 += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
            b2 += static_cast<double>(b[i]) * b[i];
        }
        worst = std::max(worst, std::sqrt(d2) / std::max(std::sqrt(b2), 1e-6));
    }
    return worst;
}

}  // namespace ssd_fixture
