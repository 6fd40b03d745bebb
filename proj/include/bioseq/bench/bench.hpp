#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioseq/encoder/config.hpp"

namespace bioseq::bench {

struct BenchConfig {
    std::vector<double> durations;  // seconds, strictly increasing
    std::size_t sample_rate = 16000;
    encoder::EncoderConfig mamba;
    encoder::EncoderConfig attention;
    // Applies to peak reserved bytes of the layer stack.
    std::size_t memory_cap_bytes = std::size_t{8} << 30;
    std::uint64_t seed = 0;

    std::vector<std::string> validate() const;

    // 1..30 s step 1 on the desk encoder.
    static BenchConfig desk();
    // 5..1000 s step 5 on the full encoder.
    static BenchConfig full();
};

nlohmann::json to_json(const BenchConfig& c);
BenchConfig bench_config_from_json(const nlohmann::json& j, const BenchConfig& defaults = BenchConfig::desk());

// Evenly spaced grid first, first + step, ... <= last.
std::vector<double> duration_grid(double first, double last, double step);

struct LengthRecord {
    double duration_s = 0.0;
    std::size_t frames = 0;
    std::size_t peak_allocated_bytes = 0;
    std::size_t peak_reserved_bytes = 0;
};

struct MemoryProfile {
    encoder::LayerKind kind = encoder::LayerKind::mamba;
    std::vector<LengthRecord> records;
    bool truncated = false;
};

struct BenchResult {
    MemoryProfile mamba;
    MemoryProfile attention;
    std::vector<std::string> warnings;
};

// Deterministic test signal: a slow chirp over seeded low-level noise.
std::vector<float> synthetic_wave(std::size_t samples, std::size_t sample_rate, std::uint64_t seed);

// Peak bytes of one forward pass through the layer stack (frontend excluded)
// for `samples` of synthetic audio.
LengthRecord measure_length(const encoder::EncoderConfig& cfg, double duration_s, std::size_t sample_rate,
                            std::uint64_t seed);

using WarningFn = std::function<void(const std::string&)>;

// Stops a model's sweep before any length whose extrapolated reserved peak
// (exponent 1 for mamba, 2 for attention) would pass the cap, or right after
// a measurement that did.
BenchResult run_bench(const BenchConfig& cfg, const WarningFn& on_warning = {});

// Least-squares slope of log(peak allocated) against log(frames) over the
// upper half of the records.
double fit_scaling_exponent(const MemoryProfile& profile);

struct BenchSummary {
    double mamba_exponent = 0.0;
    double attention_exponent = 0.0;
    std::optional<double> longest_common_duration_s;
    std::size_t longest_common_frames = 0;
    double attention_over_mamba_allocated = 0.0;  // at the longest common length
    double attention_over_mamba_reserved = 0.0;
    bool mamba_monotone = true;
    bool attention_monotone = true;
    bool attention_dominates_from_500 = true;  // attention peak >= mamba peak wherever frames >= 500
};

bool peaks_monotone(const MemoryProfile& p);
BenchSummary summarize(const BenchResult& r);

std::string profiles_csv(const BenchResult& r);
std::string profiles_svg(const BenchResult& r);
nlohmann::json report_json(const BenchConfig& cfg, const BenchResult& r);
std::string report_markdown(const BenchConfig& cfg, const BenchResult& r);

struct BenchArtifacts {
    std::filesystem::path csv;
    std::filesystem::path svg;
    std::filesystem::path report_json;
    std::filesystem::path report_md;
};

BenchArtifacts write_artifacts(const BenchConfig& cfg, const BenchResult& r, const std::filesystem::path& dir);

}  // namespace bioseq::bench
