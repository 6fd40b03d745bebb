#include "bioseq/bench/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "bioseq/encoder/encoder.hpp"
#include "bioseq/num/accountant.hpp"
#include "bioseq/num/random.hpp"

namespace bioseq::bench {

using encoder::EncoderConfig;
using encoder::LayerKind;
using num::Tensor;

namespace {

std::vector<std::string> encoder_problems(const EncoderConfig& c, const std::string& field) {
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        return {field + ": " + e.what()};
    }
    return {};
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

double mib(std::size_t bytes) { return static_cast<double>(bytes) / (1024.0 * 1024.0); }

// 1, 2, 5 x 10^k step giving at most ~max_ticks ticks over [0, hi].
double tick_step(double hi, int max_ticks) {
    if (hi <= 0.0) return 1.0;
    const double raw = hi / max_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) return m * mag;
    return 10.0 * mag;
}

}  // namespace

std::vector<double> duration_grid(double first, double last, double step) {
    if (!(step > 0.0) || !(first > 0.0) || last < first)
        throw std::invalid_argument("duration grid needs 0 < first <= last and step > 0");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) out.push_back(first + static_cast<double>(i) * step);
    return out;
}

std::vector<std::string> BenchConfig::validate() const {
    std::vector<std::string> errs;
    if (durations.empty()) errs.push_back("durations: empty");
    for (std::size_t i = 0; i < durations.size(); ++i) {
        if (!(durations[i] > 0.0) || !std::isfinite(durations[i]))
            errs.push_back(fmt::format("durations[{}]: must be positive and finite", i));
        if (i > 0 && !(durations[i] > durations[i - 1]))
            errs.push_back(fmt::format("durations[{}]: not strictly increasing", i));
    }
    if (sample_rate != 16000) errs.push_back("sample_rate: must be 16000");
    if (memory_cap_bytes == 0) errs.push_back("memory_cap_bytes: must be positive");
    auto m = encoder_problems(mamba, "mamba");
    auto a = encoder_problems(attention, "attention");
    errs.insert(errs.end(), m.begin(), m.end());
    errs.insert(errs.end(), a.begin(), a.end());
    if (mamba.kind != LayerKind::mamba) errs.push_back("mamba.kind: must be mamba");
    if (attention.kind != LayerKind::attention) errs.push_back("attention.kind: must be attention");
    if (mamba.d != attention.d) errs.push_back("attention.d: must equal mamba.d");
    if (mamba.n_layers != attention.n_layers) errs.push_back("attention.n_layers: must equal mamba.n_layers");
    return errs;
}

BenchConfig BenchConfig::desk() {
    BenchConfig c;
    c.durations = duration_grid(1.0, 30.0, 1.0);
    c.mamba = EncoderConfig::desk();
    c.attention = EncoderConfig::desk();
    c.attention.kind = LayerKind::attention;
    return c;
}

BenchConfig BenchConfig::full() {
    BenchConfig c;
    c.durations = duration_grid(5.0, 1000.0, 5.0);
    c.mamba = EncoderConfig::full();
    c.attention = EncoderConfig::full();
    c.attention.kind = LayerKind::attention;
    c.memory_cap_bytes = std::size_t{64} << 30;
    return c;
}

nlohmann::json to_json(const BenchConfig& c) {
    return {{"durations", c.durations},
            {"sample_rate", c.sample_rate},
            {"mamba", encoder::to_json(c.mamba)},
            {"attention", encoder::to_json(c.attention)},
            {"memory_cap_bytes", c.memory_cap_bytes},
            {"seed", c.seed}};
}

BenchConfig bench_config_from_json(const nlohmann::json& j, const BenchConfig& defaults) {
    BenchConfig c = defaults;
    if (!j.is_object()) throw std::invalid_argument("bench config: expected an object");
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        c.durations = duration_grid(g.at("first").get<double>(), g.at("last").get<double>(), g.at("step").get<double>());
    }
    c.durations = j.value("durations", c.durations);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    if (j.contains("mamba")) {
        nlohmann::json base = encoder::to_json(c.mamba);
        base.merge_patch(j.at("mamba"));
        c.mamba = encoder::encoder_config_from_json(base);
    }
    if (j.contains("attention")) {
        nlohmann::json base = encoder::to_json(c.attention);
        base.merge_patch(j.at("attention"));
        c.attention = encoder::encoder_config_from_json(base);
    }
    c.memory_cap_bytes = j.value("memory_cap_bytes", c.memory_cap_bytes);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::vector<float> synthetic_wave(std::size_t samples, std::size_t sample_rate, std::uint64_t seed) {
    std::vector<float> w(samples);
    num::Rng rng = num::make_rng(seed, {0xbe7c, samples});
    const double fs = static_cast<double>(sample_rate);
    const double span = std::max(1.0, static_cast<double>(samples) / fs);
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / fs;
        // 200 Hz -> 4 kHz linear sweep over the clip
        const double phase = 2.0 * std::numbers::pi * (200.0 * t + 0.5 * (3800.0 / span) * t * t);
        w[i] = static_cast<float>(0.4 * std::sin(phase) + 0.02 * num::normal01(rng));
    }
    return w;
}

LengthRecord measure_length(const EncoderConfig& cfg, double duration_s, std::size_t sample_rate,
                            std::uint64_t seed) {
    const auto samples = static_cast<std::size_t>(std::llround(duration_s * static_cast<double>(sample_rate)));
    const encoder::Encoder enc(cfg, seed);
    num::NoGradGuard no_grad;
    const Tensor wave = Tensor::from({samples, 1}, synthetic_wave(samples, sample_rate, seed));
    const encoder::FrontendOutput front = enc.features(wave, samples);
    if (front.frames.rows() == 0)
        throw std::invalid_argument(fmt::format("bench: {} s is shorter than the frontend receptive field", duration_s));
    auto [out, stats] = num::accountant_scope([&] { return enc.layers(front.frames); });
    (void)out;
    return {duration_s, front.frames.rows(), stats.peak_allocated_bytes, stats.peak_reserved_bytes};
}

BenchResult run_bench(const BenchConfig& cfg, const WarningFn& on_warning) {
    if (auto errs = cfg.validate(); !errs.empty()) {
        std::string msg = "invalid bench config:";
        for (const auto& e : errs) msg += " " + e + ";";
        throw std::invalid_argument(msg);
    }
    BenchResult r;
    auto warn = [&](std::string msg) {
        if (on_warning) on_warning(msg);
        r.warnings.push_back(std::move(msg));
    };
    auto sweep = [&](const EncoderConfig& ecfg, MemoryProfile& prof) {
        prof.kind = ecfg.kind;
        const double expo = ecfg.kind == LayerKind::attention ? 2.0 : 1.0;
        for (std::size_t i = 0; i < cfg.durations.size(); ++i) {
            const double dur = cfg.durations[i];
            if (!prof.records.empty()) {
                const LengthRecord& last = prof.records.back();
                const double predicted = static_cast<double>(last.peak_reserved_bytes) *
                                         std::pow(dur / last.duration_s, expo);
                if (predicted > static_cast<double>(cfg.memory_cap_bytes)) {
                    prof.truncated = true;
                    warn(fmt::format("{}: sweep stopped before {} s, projected peak {:.1f} MiB exceeds cap {:.1f} MiB",
                                     encoder::to_string(ecfg.kind), dur, mib(static_cast<std::size_t>(predicted)),
                                     mib(cfg.memory_cap_bytes)));
                    return;
                }
            }
            prof.records.push_back(measure_length(ecfg, dur, cfg.sample_rate, cfg.seed));
            if (prof.records.back().peak_reserved_bytes > cfg.memory_cap_bytes) {
                prof.truncated = i + 1 < cfg.durations.size();
                warn(fmt::format("{}: peak {:.1f} MiB at {} s exceeds cap {:.1f} MiB{}", encoder::to_string(ecfg.kind),
                                 mib(prof.records.back().peak_reserved_bytes), dur, mib(cfg.memory_cap_bytes),
                                 prof.truncated ? ", sweep stopped" : ""));
                return;
            }
        }
    };
    sweep(cfg.mamba, r.mamba);
    sweep(cfg.attention, r.attention);
    return r;
}

double fit_scaling_exponent(const MemoryProfile& profile) {
    const auto& rec = profile.records;
    if (rec.size() < 5)
        throw std::invalid_argument(fmt::format("fit_scaling_exponent: need at least 5 points, got {}", rec.size()));
    const std::size_t start = rec.size() / 2;
    double sx = 0, sy = 0;
    const auto n = static_cast<double>(rec.size() - start);
    for (std::size_t i = start; i < rec.size(); ++i) {
        if (rec[i].frames == 0 || rec[i].peak_allocated_bytes == 0)
            throw std::invalid_argument("fit_scaling_exponent: frames and peaks must be positive");
        sx += std::log(static_cast<double>(rec[i].frames));
        sy += std::log(static_cast<double>(rec[i].peak_allocated_bytes));
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = start; i < rec.size(); ++i) {
        const double dx = std::log(static_cast<double>(rec[i].frames)) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(static_cast<double>(rec[i].peak_allocated_bytes)) - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("fit_scaling_exponent: frame counts in the upper half are all equal");
    return sxy / sxx;
}

bool peaks_monotone(const MemoryProfile& p) {
    for (std::size_t i = 1; i < p.records.size(); ++i) {
        if (p.records[i].peak_allocated_bytes < p.records[i - 1].peak_allocated_bytes) return false;
        if (p.records[i].peak_reserved_bytes < p.records[i - 1].peak_reserved_bytes) return false;
    }
    return true;
}

BenchSummary summarize(const BenchResult& r) {
    BenchSummary s;
    if (r.mamba.records.size() >= 5) s.mamba_exponent = fit_scaling_exponent(r.mamba);
    if (r.attention.records.size() >= 5) s.attention_exponent = fit_scaling_exponent(r.attention);
    s.mamba_monotone = peaks_monotone(r.mamba);
    s.attention_monotone = peaks_monotone(r.attention);
    for (const auto& a : r.attention.records) {
        for (const auto& m : r.mamba.records) {
            if (m.duration_s != a.duration_s) continue;
            if (a.frames >= 500 && a.peak_allocated_bytes < m.peak_allocated_bytes) s.attention_dominates_from_500 = false;
            s.longest_common_duration_s = a.duration_s;
            s.longest_common_frames = a.frames;
            s.attention_over_mamba_allocated =
                static_cast<double>(a.peak_allocated_bytes) / static_cast<double>(m.peak_allocated_bytes);
            s.attention_over_mamba_reserved =
                static_cast<double>(a.peak_reserved_bytes) / static_cast<double>(m.peak_reserved_bytes);
        }
    }
    return s;
}

std::string profiles_csv(const BenchResult& r) {
    std::string out = "model,duration_s,frames,peak_alloc_bytes,peak_reserved_bytes\n";
    for (const MemoryProfile* p : {&r.mamba, &r.attention})
        for (const auto& rec : p->records)
            out += fmt::format("{},{},{},{},{}\n", encoder::to_string(p->kind), rec.duration_s, rec.frames,
                               rec.peak_allocated_bytes, rec.peak_reserved_bytes);
    return out;
}

std::string profiles_svg(const BenchResult& r) {
    constexpr double W = 800, H = 480, left = 80, right = 200, top = 40, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;
    double xmax = 0, ymax = 0;
    for (const MemoryProfile* p : {&r.mamba, &r.attention})
        for (const auto& rec : p->records) {
            xmax = std::max(xmax, rec.duration_s);
            ymax = std::max(ymax, mib(std::max(rec.peak_allocated_bytes, rec.peak_reserved_bytes)));
        }
    const double xstep = tick_step(xmax, 10), ystep = tick_step(ymax, 8);
    xmax = std::max(xstep, std::ceil(xmax / xstep) * xstep);
    ymax = std::max(ystep, std::ceil(ymax / ystep) * ystep);
    auto px = [&](double x) { return left + pw * x / xmax; };
    auto py = [&](double y) { return top + ph * (1.0 - y / ymax); };

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        W, H, W, H);
    s += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">Peak memory of the layer stack "
                     "(forward, no grad)</text>\n",
                     left + pw / 2);
    for (double x = 0; x <= xmax + 1e-9; x += xstep) {
        s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#ddd\"/>\n", px(x),
                         top, top + ph);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:g}</text>\n", px(x), top + ph + 18, x);
    }
    for (double y = 0; y <= ymax + 1e-9; y += ystep) {
        s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>\n", left,
                         py(y), left + pw);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:g}</text>\n", left - 6, py(y) + 4, y);
    }
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left, top,
                     pw, ph);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">sequence length (s of 16 kHz audio)</text>\n",
                     left + pw / 2, H - 15);
    s += fmt::format("<text transform=\"translate(20,{:.2f}) rotate(-90)\" text-anchor=\"middle\">MiB</text>\n",
                     top + ph / 2);

    struct Series {
        const MemoryProfile* p;
        bool reserved;
        const char* color;
        const char* label;
    };
    const Series series[] = {{&r.mamba, false, "#1f77b4", "mamba allocated"},
                             {&r.mamba, true, "#1f77b4", "mamba reserved"},
                             {&r.attention, false, "#d62728", "attention allocated"},
                             {&r.attention, true, "#d62728", "attention reserved"}};
    double ly = top + 10;
    for (const auto& se : series) {
        const char* dash = se.reserved ? " stroke-dasharray=\"6,4\"" : "";
        std::string pts;
        for (const auto& rec : se.p->records) {
            const std::size_t b = se.reserved ? rec.peak_reserved_bytes : rec.peak_allocated_bytes;
            pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", px(rec.duration_s), py(mib(b)));
        }
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{} points=\"{}\"/>\n", se.color, dash,
                         pts);
        s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"{3}\" "
                         "stroke-width=\"2\"{4}/>\n",
                         left + pw + 15, ly, left + pw + 45, se.color, dash);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", left + pw + 52, ly + 4, se.label);
        ly += 20;
    }
    s += "</svg>\n";
    return s;
}

namespace {

nlohmann::json profile_json(const MemoryProfile& p) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : p.records)
        rows.push_back({{"duration_s", r.duration_s},
                        {"frames", r.frames},
                        {"peak_alloc_bytes", r.peak_allocated_bytes},
                        {"peak_reserved_bytes", r.peak_reserved_bytes}});
    return {{"model", encoder::to_string(p.kind)}, {"truncated", p.truncated}, {"records", rows}};
}

std::string comparison_note(const BenchSummary& s) {
    std::string note =
        "The attention comparator is plain softmax attention that materializes the [heads, T, T] score and "
        "probability matrices, so its activation memory is expected to grow quadratically in T. Published GPU "
        "measurements of this comparison ran the attention model with FlashAttention, which never stores those "
        "matrices and gives a near-linear attention curve. That curve is not reproduced here. No relative VRAM "
        "figure from those measurements is asserted.";
    if (s.longest_common_duration_s)
        note += fmt::format(" Measured here at {} s ({} frames): attention peak allocated is {:.2f}x the Mamba peak "
                            "({:.2f}x reserved).",
                            *s.longest_common_duration_s, s.longest_common_frames, s.attention_over_mamba_allocated,
                            s.attention_over_mamba_reserved);
    return note;
}

}  // namespace

nlohmann::json report_json(const BenchConfig& cfg, const BenchResult& r) {
    const BenchSummary s = summarize(r);
    nlohmann::json j;
    j["config"] = to_json(cfg);
    j["mode"] = "forward, no grad, layer stack only";
    j["profiles"] = {profile_json(r.mamba), profile_json(r.attention)};
    j["fitted_exponent"] = {{"mamba", r.mamba.records.size() >= 5 ? nlohmann::json(s.mamba_exponent) : nlohmann::json()},
                            {"attention",
                             r.attention.records.size() >= 5 ? nlohmann::json(s.attention_exponent) : nlohmann::json()}};
    j["monotone"] = {{"mamba", s.mamba_monotone}, {"attention", s.attention_monotone}};
    j["attention_dominates_from_500_frames"] = s.attention_dominates_from_500;
    if (s.longest_common_duration_s)
        j["ratio_at_longest_common_length"] = {{"duration_s", *s.longest_common_duration_s},
                                               {"frames", s.longest_common_frames},
                                               {"attention_over_mamba_allocated", s.attention_over_mamba_allocated},
                                               {"attention_over_mamba_reserved", s.attention_over_mamba_reserved}};
    j["attention_baseline"] = "naive (materialized scores), not FlashAttention";
    j["comparison_note"] = comparison_note(s);
    j["warnings"] = r.warnings;
    return j;
}

std::string report_markdown(const BenchConfig& cfg, const BenchResult& r) {
    const BenchSummary s = summarize(r);
    std::string md = "# Layer-stack memory scaling\n\n";
    md += fmt::format("Forward pass without gradients, frontend excluded. {} layers, d = {}, {} lengths from {} s to {} s.\n\n",
                      cfg.mamba.n_layers, cfg.mamba.d, cfg.durations.size(), cfg.durations.front(),
                      cfg.durations.back());
    md += "| model | fitted exponent (upper half) | peaks monotone | points |\n|---|---|---|---|\n";
    auto expo = [](const MemoryProfile& p, double e) {
        return p.records.size() >= 5 ? fmt::format("{:.3f}", e) : std::string("n/a");
    };
    md += fmt::format("| mamba | {} | {} | {}{} |\n", expo(r.mamba, s.mamba_exponent), s.mamba_monotone ? "yes" : "no",
                      r.mamba.records.size(), r.mamba.truncated ? " (truncated)" : "");
    md += fmt::format("| attention | {} | {} | {}{} |\n", expo(r.attention, s.attention_exponent),
                      s.attention_monotone ? "yes" : "no", r.attention.records.size(),
                      r.attention.truncated ? " (truncated)" : "");
    md += "\n## Attention baseline\n\n" + comparison_note(s) + "\n";
    if (!r.warnings.empty()) {
        md += "\n## Warnings\n\n";
        for (const auto& w : r.warnings) md += "- " + w + "\n";
    }
    return md;
}

BenchArtifacts write_artifacts(const BenchConfig& cfg, const BenchResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    BenchArtifacts a{dir / "bench_memory.csv", dir / "bench_memory.svg", dir / "bench_report.json",
                     dir / "bench_report.md"};
    write_text(a.csv, profiles_csv(r));
    write_text(a.svg, profiles_svg(r));
    write_text(a.report_json, report_json(cfg, r).dump(2) + "\n");
    write_text(a.report_md, report_markdown(cfg, r));
    return a;
}

}  // namespace bioseq::bench
