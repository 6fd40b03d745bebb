#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>

#include <fftw3.h>

#include "bioseq/signal/mfcc.hpp"

namespace bioseq::signal {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// the FFTW planner is not re-entrant
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* input() { return in_; }
    void power(std::vector<double>& out) {
        fftw_execute(plan_);
        out.resize(n_ / 2 + 1);
        for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }

private:
    std::size_t n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

// [n_mels, n_fft/2+1] triangles with edges on the mel scale between 0 and Nyquist
std::vector<double> mel_bank(int n_mels, std::size_t n_fft, int rate) {
    const std::size_t bins = n_fft / 2 + 1;
    const double mel_hi = hz_to_mel(rate / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(n_mels + 1));
    std::vector<double> bank(static_cast<std::size_t>(n_mels) * bins, 0.0);
    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * rate / static_cast<double>(n_fft);
            double v = 0.0;
            if (f > lo && f <= mid) v = (f - lo) / (mid - lo);
            else if (f > mid && f < hi) v = (hi - f) / (hi - mid);
            bank[static_cast<std::size_t>(m) * bins + k] = v;
        }
    }
    return bank;
}

// delta[t] = sum_{n=1..2} n (c[t+n] - c[t-n]) / (2 sum n^2), edges replicated
void regression_deltas(const std::vector<double>& src, std::vector<double>& dst, std::size_t frames, std::size_t dim) {
    constexpr int kReach = 2;
    constexpr double kDenom = 2.0 * (1 * 1 + 2 * 2);
    dst.assign(frames * dim, 0.0);
    const auto last = static_cast<std::ptrdiff_t>(frames) - 1;
    for (std::size_t t = 0; t < frames; ++t) {
        for (int n = 1; n <= kReach; ++n) {
            const auto ahead = static_cast<std::size_t>(std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + n, last));
            const auto behind = static_cast<std::size_t>(std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) - n, 0));
            for (std::size_t j = 0; j < dim; ++j)
                dst[t * dim + j] += n * (src[ahead * dim + j] - src[behind * dim + j]);
        }
        for (std::size_t j = 0; j < dim; ++j) dst[t * dim + j] /= kDenom;
    }
}

}  // namespace

void MfccConfig::validate() const {
    std::string bad;
    if (!(hop_ms > 0.0)) bad += " hop_ms must be > 0;";
    if (!(window_ms >= hop_ms)) bad += " window_ms must be >= hop_ms;";
    if (n_mels < 1) bad += " n_mels must be >= 1;";
    if (n_coeffs < 1 || n_coeffs > n_mels) bad += " n_coeffs must be in [1, n_mels];";
    if (!(log_floor > 0.0)) bad += " log_floor must be > 0;";
    if (!bad.empty()) throw std::invalid_argument("invalid mfcc config:" + bad);
}

std::size_t MfccConfig::window_samples(int rate_hz) const {
    return static_cast<std::size_t>(std::llround(window_ms * rate_hz / 1000.0));
}

std::size_t MfccConfig::hop_samples(int rate_hz) const {
    return static_cast<std::size_t>(std::llround(hop_ms * rate_hz / 1000.0));
}

std::size_t mfcc_frame_count(std::size_t length, const MfccConfig& cfg, int rate_hz) {
    const std::size_t win = cfg.window_samples(rate_hz);
    const std::size_t hop = cfg.hop_samples(rate_hz);
    if (length < win) return 0;
    return (length - win) / hop + 1;
}

FrameSequence mfcc(const Waveform& w, const MfccConfig& cfg) {
    cfg.validate();
    validate(w);
    if (w.sample_rate_hz != kTargetRateHz)
        throw std::invalid_argument("mfcc expects " + std::to_string(kTargetRateHz) + " Hz audio, got " +
                                    std::to_string(w.sample_rate_hz));
    const int rate = w.sample_rate_hz;
    const std::size_t win = cfg.window_samples(rate);
    const std::size_t hop = cfg.hop_samples(rate);
    const std::size_t frames = mfcc_frame_count(w.size(), cfg, rate);
    if (frames == 0)
        throw std::invalid_argument("audio shorter than one analysis window (" + std::to_string(w.size()) + " < " +
                                    std::to_string(win) + " samples)");

    const std::size_t n_fft = next_pow2(win);
    const std::size_t bins = n_fft / 2 + 1;
    const auto n_mels = static_cast<std::size_t>(cfg.n_mels);
    const auto n_coeffs = static_cast<std::size_t>(cfg.n_coeffs);

    std::vector<double> emph(w.size());
    emph[0] = w.samples[0];
    for (std::size_t i = 1; i < w.size(); ++i) emph[i] = w.samples[i] - cfg.preemphasis * w.samples[i - 1];

    std::vector<double> hann(win);
    for (std::size_t i = 0; i < win; ++i)
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(win - 1));

    const std::vector<double> bank = mel_bank(cfg.n_mels, n_fft, rate);

    std::vector<double> dct(n_coeffs * n_mels);
    for (std::size_t k = 0; k < n_coeffs; ++k) {
        const double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n_mels));
        for (std::size_t m = 0; m < n_mels; ++m)
            dct[k * n_mels + m] = norm * std::cos(kPi * static_cast<double>(k) * (m + 0.5) / static_cast<double>(n_mels));
    }

    RealFft fft(n_fft);
    std::vector<double> power, logmel(n_mels);
    std::vector<double> ceps(frames * n_coeffs);
    for (std::size_t t = 0; t < frames; ++t) {
        double* in = fft.input();
        const double* src = emph.data() + t * hop;
        for (std::size_t i = 0; i < win; ++i) in[i] = src[i] * hann[i];
        std::fill(in + win, in + n_fft, 0.0);
        fft.power(power);
        for (std::size_t m = 0; m < n_mels; ++m) {
            double e = 0.0;
            const double* row = bank.data() + m * bins;
            for (std::size_t k = 0; k < bins; ++k) e += row[k] * power[k];
            logmel[m] = std::log(std::max(e, cfg.log_floor));
        }
        for (std::size_t k = 0; k < n_coeffs; ++k) {
            double c = 0.0;
            for (std::size_t m = 0; m < n_mels; ++m) c += dct[k * n_mels + m] * logmel[m];
            ceps[t * n_coeffs + k] = c;
        }
    }

    FrameSequence out(frames, cfg.output_dim(), static_cast<double>(rate) / static_cast<double>(hop));
    std::vector<double> d1, d2;
    if (cfg.add_deltas) {
        regression_deltas(ceps, d1, frames, n_coeffs);
        regression_deltas(d1, d2, frames, n_coeffs);
    }
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t k = 0; k < n_coeffs; ++k) {
            out.at(t, k) = static_cast<float>(ceps[t * n_coeffs + k]);
            if (cfg.add_deltas) {
                out.at(t, n_coeffs + k) = static_cast<float>(d1[t * n_coeffs + k]);
                out.at(t, 2 * n_coeffs + k) = static_cast<float>(d2[t * n_coeffs + k]);
            }
        }
    }
    return out;
}

}  // namespace bioseq::signal
