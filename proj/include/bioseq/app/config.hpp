#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bioseq/app/synth.hpp"
#include "bioseq/bench/bench.hpp"
#include "bioseq/downstream/finetune.hpp"
#include "bioseq/pretrain/train.hpp"

namespace bioseq::app {

// Everything a run needs. The top-level seed drives the model-side seeds of
// every stage; synth.seed only drives the generated audio.
struct RunConfig {
    std::string preset = "desk";
    std::string out_dir = "runs";
    std::uint64_t seed = 0;
    SynthOptions synth;
    std::string pretrain_manifest;
    pretrain::TwoPhaseConfig pretrain;
    std::string finetune_checkpoint;
    std::string finetune_train;
    std::string finetune_valid;
    std::string finetune_test;  // optional
    downstream::TaskSpec task;
    downstream::FinetuneConfig sweep;
    std::string eval_model;
    std::string eval_manifest;
    bench::BenchConfig bench;
};

// Canonical, complete serialization. Section seeds are omitted since they
// derive from the top-level seed.
nlohmann::json to_json(const RunConfig& c);

// Defaults of a preset ("desk" or "full") in the to_json layout.
nlohmann::json default_config_json(const std::string& preset);

struct ConfigError {
    std::string field;
    std::string message;
};

class ConfigErrors : public std::runtime_error {
public:
    explicit ConfigErrors(std::vector<ConfigError> errors);
    ConfigErrors(std::string field, std::string message);
    const std::vector<ConfigError>& errors() const { return errors_; }

private:
    std::vector<ConfigError> errors_;
};

// Precedence, lowest first: preset defaults, file, environment, flags.
struct ConfigLayers {
    std::optional<nlohmann::json> file = {};
    std::vector<std::pair<std::string, std::string>> env = {};  // raw NAME=value pairs; only BIOSEQ_* are used
    std::vector<std::string> sets = {};                         // "a.b.c=value", applied in order
};

// BIOSEQ_PRETRAIN__PHASE1__STEPS -> "pretrain.phase1.steps"; nullopt for other names.
std::optional<std::string> env_key_path(const std::string& name);

// Values parse as JSON when they can, otherwise they are taken as strings.
nlohmann::json parse_override_value(const std::string& text);

// Reads and parses a JSON config file; errors are reported against "config".
nlohmann::json read_config_file(const std::filesystem::path& path);

// Merges the layers over the chosen preset and validates the result. Throws
// ConfigErrors listing every unknown key, type mismatch and invalid value.
RunConfig resolve_config(const ConfigLayers& layers);

// Seed plumbing applied by resolve_config.
void apply_seed(RunConfig& c);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace bioseq::app
