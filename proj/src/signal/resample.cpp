#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "bioseq/signal/audio.hpp"

namespace bioseq::signal {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kZeroCrossings = 32;
constexpr double kKaiserBeta = 8.6;

double sinc(double x) {
    if (x == 0.0) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

Waveform resample(const Waveform& w, int target_rate_hz) {
    if (target_rate_hz <= 0) throw std::invalid_argument("target rate must be positive");
    validate(w);
    if (target_rate_hz == w.sample_rate_hz) return w;

    const std::int64_t g = std::gcd(target_rate_hz, w.sample_rate_hz);
    const std::int64_t up = target_rate_hz / g;
    const std::int64_t down = w.sample_rate_hz / g;
    const std::int64_t len = static_cast<std::int64_t>(w.samples.size());
    const std::int64_t out_len = (2 * len * target_rate_hz + w.sample_rate_hz) / (2 * static_cast<std::int64_t>(w.sample_rate_hz));

    // cutoff as a fraction of the input Nyquist rate
    const double fc = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
    const double half_width = kZeroCrossings / fc;
    const std::int64_t reach = static_cast<std::int64_t>(std::ceil(half_width));
    const std::int64_t taps = 2 * reach + 1;
    const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);

    // one filter per output phase r: taps at input offsets -reach..reach from floor(t)
    std::vector<double> bank(static_cast<std::size_t>(up * taps));
    for (std::int64_t r = 0; r < up; ++r) {
        const double frac = static_cast<double>(r) / static_cast<double>(up);
        for (std::int64_t i = 0; i < taps; ++i) {
            const double x = static_cast<double>(i - reach) - frac;
            double v = 0.0;
            if (std::abs(x) < half_width) {
                const double q = x / half_width;
                v = fc * sinc(fc * x) * std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - q * q)) / i0_beta;
            }
            bank[static_cast<std::size_t>(r * taps + i)] = v;
        }
    }

    Waveform out;
    out.sample_rate_hz = target_rate_hz;
    out.samples.resize(static_cast<std::size_t>(out_len));
    for (std::int64_t n = 0; n < out_len; ++n) {
        const std::int64_t pos = n * down;
        const std::int64_t base = pos / up;
        const std::int64_t r = pos % up;
        const double* h = bank.data() + r * taps;
        double acc = 0.0;
        const std::int64_t lo = std::max<std::int64_t>(0, base - reach);
        const std::int64_t hi = std::min<std::int64_t>(len - 1, base + reach);
        for (std::int64_t j = lo; j <= hi; ++j) acc += h[j - base + reach] * w.samples[static_cast<std::size_t>(j)];
        out.samples[static_cast<std::size_t>(n)] = static_cast<float>(acc);
    }
    return out;
}

}  // namespace bioseq::signal
