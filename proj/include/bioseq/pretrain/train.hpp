#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioseq/num/optim.hpp"
#include "bioseq/pretrain/model.hpp"
#include "bioseq/pseudolabel/labels.hpp"

namespace bioseq::pretrain {

using pseudolabel::PseudoLabelSet;
using pseudolabel::Utterance;

struct PhaseConfig {
    std::size_t k = 100;
    std::int64_t steps = 2000;
    double batch_seconds = 20.0;
    double peak_lr = 5e-4;
    double warmup_fraction = 0.05;
    double mask_prob = 0.08;
    std::size_t span_len = 10;
    std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
    std::uint64_t seed = 0;
    num::AdamWConfig adamw;

    std::vector<std::string> validate() const;
};

nlohmann::json to_json(const PhaseConfig& cfg);
PhaseConfig phase_config_from_json(const nlohmann::json& j, const PhaseConfig& defaults = {});

struct StepRecord {
    std::int64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double masked_accuracy = 0.0;
    std::size_t masked_frames = 0;
    std::size_t utterances = 0;
};

struct PhaseReport {
    std::string name;
    std::size_t k = 0;
    std::vector<StepRecord> steps;
    double final_masked_accuracy = 0.0;
    PhaseConfig config;

    nlohmann::json to_json() const;
};

struct PhaseOutput {
    std::filesystem::path dir;
    std::string name = "phase";
    std::function<void(const StepRecord&)> on_step;
};

struct PhaseResult {
    PretrainModel model;
    PhaseReport report;
    std::filesystem::path checkpoint;
};

// Batch indices for one step: a seeded shuffle of the corpus packed greedily
// up to batch_seconds (always at least one utterance).
std::vector<std::size_t> pack_batch(const std::vector<double>& durations, double batch_seconds, std::uint64_t seed,
                                    std::int64_t step);

// Trains from step 1 to cfg.steps. Checkpoints go to
// <dir>/<name>_step<N>.bmck every checkpoint_every steps and <dir>/<name>.bmck
// at the end, each with model, optimizer state and the records so far.
PhaseResult pretrain_phase(PretrainModel model, const std::vector<Utterance>& corpus, const PseudoLabelSet& labels,
                           const PhaseConfig& cfg, const PhaseOutput& out);

// Continues a run from one of its checkpoints.
PhaseResult resume_phase(const std::filesystem::path& checkpoint, const std::vector<Utterance>& corpus,
                         const PseudoLabelSet& labels, const PhaseConfig& cfg, const PhaseOutput& out);

// Gradient-free masked accuracy over whole utterances with per-utterance masks.
double masked_accuracy(const PretrainModel& model, const std::vector<Utterance>& corpus, const PseudoLabelSet& labels,
                       double mask_prob, std::size_t span_len, std::uint64_t seed);

struct TwoPhaseConfig {
    encoder::EncoderConfig encoder = encoder::EncoderConfig::desk();
    signal::MfccConfig mfcc;
    std::size_t kmeans_max_iter = 100;
    std::size_t kmeans_frame_budget = 100000;
    std::size_t kmeans_n_init = 8;
    PhaseConfig phase1;
    PhaseConfig phase2;
    std::uint64_t seed = 0;

    static TwoPhaseConfig desk();
    static TwoPhaseConfig full();
    std::vector<std::string> validate() const;
};

nlohmann::json to_json(const TwoPhaseConfig& cfg);
TwoPhaseConfig two_phase_config_from_json(const nlohmann::json& j, const TwoPhaseConfig& defaults = {});

struct TwoPhaseResult {
    std::filesystem::path phase1_checkpoint;
    std::filesystem::path phase2_checkpoint;
    std::filesystem::path phase1_codebook;
    std::filesystem::path phase2_codebook;
    std::filesystem::path report_path;
    PhaseReport phase1;
    PhaseReport phase2;
};

// MFCC labels -> phase 1 -> labels from phase2_feature_layer -> new head ->
// phase 2. Writes codebooks, label files, checkpoints and pretrain_report.json
// under out_dir.
TwoPhaseResult run_two_phase(const std::vector<Utterance>& corpus, const TwoPhaseConfig& cfg,
                             const std::filesystem::path& out_dir,
                             const std::function<void(const std::string&, const StepRecord&)>& on_step = {});

}  // namespace bioseq::pretrain
