#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "bioseq/bench/bench.hpp"
#include "wav_fixture.hpp"

using namespace bioseq;
using bench::BenchConfig;
using bench::LengthRecord;
using bench::MemoryProfile;
using encoder::EncoderConfig;
using encoder::LayerKind;

namespace {

MemoryProfile power_profile(double expo, double coef, std::size_t n, double offset_low_half = 0.0) {
    MemoryProfile p;
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t T = 50 * i;
        double bytes = coef * std::pow(static_cast<double>(T), expo);
        if (i <= n / 2) bytes += offset_low_half;
        p.records.push_back({static_cast<double>(i), T, static_cast<std::size_t>(std::llround(bytes)), 0});
    }
    return p;
}

EncoderConfig small(LayerKind kind, std::size_t layers) {
    EncoderConfig c = EncoderConfig::desk();
    c.kind = kind;
    c.n_layers = layers;
    c.phase2_feature_layer = 1;
    return c;
}

BenchConfig small_bench(std::vector<double> durations) {
    BenchConfig c = BenchConfig::desk();
    c.durations = std::move(durations);
    c.mamba = small(LayerKind::mamba, 2);
    c.attention = small(LayerKind::attention, 2);
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("exponent fit on constructed profiles") {
    CHECK(bench::fit_scaling_exponent(power_profile(1.0, 3000.0, 30)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(bench::fit_scaling_exponent(power_profile(2.0, 64.0, 30)) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(bench::fit_scaling_exponent(power_profile(1.5, 100.0, 5)) == doctest::Approx(1.5).epsilon(1e-6));
    // only the upper half enters the fit
    CHECK(bench::fit_scaling_exponent(power_profile(1.0, 3000.0, 30, 1e9)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(bench::fit_scaling_exponent(power_profile(1.0, 1.0, 4)), std::invalid_argument);
    MemoryProfile flat;
    for (int i = 0; i < 6; ++i) flat.records.push_back({1.0 + i, 100, 1000, 0});
    CHECK_THROWS_AS(bench::fit_scaling_exponent(flat), std::invalid_argument);
}

TEST_CASE("bench config") {
    const BenchConfig d = BenchConfig::desk();
    REQUIRE(d.durations.size() == 30);
    CHECK(d.durations.front() == 1.0);
    CHECK(d.durations.back() == 30.0);
    CHECK(d.validate().empty());
    CHECK(d.mamba.d == d.attention.d);
    CHECK(d.mamba.n_layers == d.attention.n_layers);
    const BenchConfig f = BenchConfig::full();
    CHECK(f.durations.size() == 200);
    CHECK(f.durations.back() == 1000.0);
    CHECK(f.validate().empty());

    BenchConfig bad = d;
    bad.durations = {1.0, 3.0, 2.0, -1.0};
    bad.attention.d = 32;
    bad.attention.n_layers = 4;
    bad.mamba.kind = LayerKind::attention;
    bad.sample_rate = 8000;
    const auto errs = bad.validate();
    CHECK(errs.size() >= 6);
    CHECK_THROWS_AS(bench::run_bench(bad), std::invalid_argument);

    const auto j = bench::to_json(d);
    const BenchConfig back = bench::bench_config_from_json(j);
    CHECK(bench::to_json(back) == j);
    const BenchConfig g = bench::bench_config_from_json({{"grid", {{"first", 2}, {"last", 10}, {"step", 2}}}});
    CHECK(g.durations == std::vector<double>{2, 4, 6, 8, 10});
    CHECK_THROWS_AS(bench::duration_grid(1, 0.5, 1), std::invalid_argument);
}

TEST_CASE("synthetic wave is deterministic and bounded") {
    const auto a = bench::synthetic_wave(16000, 16000, 3);
    const auto b = bench::synthetic_wave(16000, 16000, 3);
    CHECK(a == b);
    CHECK(a != bench::synthetic_wave(16000, 16000, 4));
    for (float v : a) CHECK(std::abs(v) < 1.0f);
}

TEST_CASE("attention score buffers give an exact quadratic term") {
    // Forward through one attention layer keeps the [H, T, T] scores and
    // probabilities alive together: 2 * H * 4 bytes per T^2.
    const EncoderConfig cfg = small(LayerKind::attention, 1);
    const double a_expected = 2.0 * static_cast<double>(cfg.attention_heads) * sizeof(float);
    const auto r3 = bench::measure_length(cfg, 3.0, 16000, 0);
    const auto r4 = bench::measure_length(cfg, 4.0, 16000, 0);
    const auto r5 = bench::measure_length(cfg, 5.0, 16000, 0);
    REQUIRE(r4.frames - r3.frames == r5.frames - r4.frames);
    const double dT = static_cast<double>(r4.frames - r3.frames);
    const double second = static_cast<double>(r5.peak_allocated_bytes) - 2.0 * static_cast<double>(r4.peak_allocated_bytes) +
                          static_cast<double>(r3.peak_allocated_bytes);
    const double a_measured = second / (2.0 * dT * dT);
    CHECK(a_measured == doctest::Approx(a_expected).epsilon(1e-9));

    // doubling the duration scales that contribution by ~4
    const auto r8 = bench::measure_length(cfg, 8.0, 16000, 0);
    const double q4 = a_measured * std::pow(static_cast<double>(r4.frames), 2);
    const double q8 = a_measured * std::pow(static_cast<double>(r8.frames), 2);
    CHECK(q8 / q4 == doctest::Approx(4.0).epsilon(0.02));
    // and it dominates the measured growth
    const double growth = static_cast<double>(r8.peak_allocated_bytes - r4.peak_allocated_bytes);
    CHECK((q8 - q4) / growth > 0.8);
    CHECK((q8 - q4) <= growth);
}

TEST_CASE("mamba peak grows at most affinely") {
    const EncoderConfig cfg = small(LayerKind::mamba, 2);
    const auto r4 = bench::measure_length(cfg, 4.0, 16000, 0);
    const auto r8 = bench::measure_length(cfg, 8.0, 16000, 0);
    const double ratio = static_cast<double>(r8.peak_allocated_bytes) / static_cast<double>(r4.peak_allocated_bytes);
    CHECK(ratio > 1.0);
    CHECK(ratio <= 2.3);
}

TEST_CASE("frontend is not charged") {
    EncoderConfig a = small(LayerKind::mamba, 2);
    EncoderConfig b = a;
    b.cnn.channels = 8;
    const auto ra = bench::measure_length(a, 3.0, 16000, 0);
    const auto rb = bench::measure_length(b, 3.0, 16000, 0);
    CHECK(ra.frames == rb.frames);
    CHECK(ra.peak_allocated_bytes == rb.peak_allocated_bytes);
    CHECK(ra.peak_reserved_bytes == rb.peak_reserved_bytes);
    CHECK(ra.peak_reserved_bytes >= ra.peak_allocated_bytes);
}

TEST_CASE("sweep: monotone peaks, dominance, artifacts, determinism") {
    const BenchConfig cfg = small_bench({1, 2, 3, 4, 5, 6, 11, 12});
    const auto r = bench::run_bench(cfg);
    REQUIRE(r.mamba.records.size() == 8);
    REQUIRE(r.attention.records.size() == 8);
    CHECK(r.warnings.empty());
    CHECK(bench::peaks_monotone(r.mamba));
    CHECK(bench::peaks_monotone(r.attention));
    for (const auto& p : {r.mamba, r.attention})
        for (const auto& rec : p.records) {
            CHECK(rec.peak_allocated_bytes > 0);
            CHECK(rec.peak_reserved_bytes >= rec.peak_allocated_bytes);
        }
    CHECK(r.attention.records[6].frames >= 500);
    const auto s = bench::summarize(r);
    CHECK(s.attention_dominates_from_500);
    CHECK(s.longest_common_duration_s == 12.0);
    CHECK(s.attention_over_mamba_allocated > 1.0);

    const std::string csv = bench::profiles_csv(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 16);
    CHECK(csv.rfind("model,duration_s,frames,peak_alloc_bytes,peak_reserved_bytes\n", 0) == 0);
    CHECK(csv.find("attention,11,549,") != std::string::npos);

    const std::string svg = bench::profiles_svg(r);
    std::size_t lines = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
    CHECK(lines == 4);

    const auto report = bench::report_json(cfg, r);
    const std::string note = report.at("comparison_note");
    CHECK(note.find("FlashAttention") != std::string::npos);
    CHECK(note.find("near-linear") != std::string::npos);
    CHECK(note.find("x the Mamba peak") != std::string::npos);
    CHECK(report.at("ratio_at_longest_common_length").at("frames") == 599);

    const auto dir = fixture::temp_dir("bench_artifacts");
    const auto art = bench::write_artifacts(cfg, r, dir / "a");
    const auto art2 = bench::write_artifacts(cfg, bench::run_bench(cfg), dir / "b");
    CHECK(slurp(art.csv) == csv);
    CHECK(slurp(art.csv) == slurp(art2.csv));
    CHECK(slurp(art.svg) == slurp(art2.svg));
    CHECK(slurp(art.report_json) == slurp(art2.report_json));
    CHECK(slurp(art.report_md).find("FlashAttention") != std::string::npos);
}

TEST_CASE("memory cap truncates the sweep with a warning") {
    BenchConfig cfg = small_bench({1, 2, 3, 4, 5, 6, 7, 8});
    cfg.memory_cap_bytes = std::size_t{4} << 20;
    std::vector<std::string> seen;
    const auto r = bench::run_bench(cfg, [&](const std::string& w) { seen.push_back(w); });
    CHECK(!r.mamba.truncated);
    CHECK(r.mamba.records.size() == 8);
    CHECK(r.attention.truncated);
    CHECK(r.attention.records.size() < 8);
    CHECK(!r.attention.records.empty());
    for (const auto& rec : r.attention.records) CHECK(rec.peak_reserved_bytes <= cfg.memory_cap_bytes);
    REQUIRE(seen.size() == 1);
    CHECK(seen == r.warnings);
    CHECK(seen[0].find("attention") != std::string::npos);
    CHECK(bench::report_json(cfg, r).at("profiles")[1].at("truncated") == true);

    // a cap below the first measurement still reports that point
    cfg.memory_cap_bytes = 1;
    const auto tiny = bench::run_bench(cfg);
    CHECK(tiny.mamba.records.size() == 1);
    CHECK(tiny.attention.records.size() == 1);
    CHECK(tiny.warnings.size() == 2);
}
