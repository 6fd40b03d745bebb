#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bioseq/encoder/encoder.hpp"
#include "bioseq/pseudolabel/kmeans.hpp"
#include "bioseq/signal/audio.hpp"
#include "bioseq/signal/mfcc.hpp"

namespace bioseq::pseudolabel {

struct Utterance {
    std::string id;
    signal::Waveform wave;
};

struct UtteranceLabels {
    std::string utterance_id;
    std::vector<int> labels;

    bool operator==(const UtteranceLabels&) const = default;
};

struct PseudoLabelSet {
    std::size_t k = 0;
    std::vector<UtteranceLabels> items;  // corpus order

    const UtteranceLabels& find(const std::string& id) const;
    bool operator==(const PseudoLabelSet&) const = default;
};

// JSON-lines {utterance_id, labels}
void write_labels(const std::filesystem::path& path, const PseudoLabelSet& set);
PseudoLabelSet read_labels(const std::filesystem::path& path, std::size_t k);

struct LabelingOptions {
    std::size_t k = 100;
    std::size_t max_iter = 100;
    std::size_t frame_budget = 100000;
    std::size_t n_init = 1;
    std::uint64_t seed = 0;
};

struct LabelingResult {
    Codebook codebook;
    PseudoLabelSet labels;
    KmeansResult fit;
};

// MFCC k-means labels, strided down to the encoder frame rate.
LabelingResult build_phase1_labels(const std::vector<Utterance>& corpus, const encoder::CnnFrontendConfig& cnn,
                                   const signal::MfccConfig& mfcc_cfg, const LabelingOptions& opt);

// k-means on the post-residual output of `layer` (gradient-free); labels are
// already at the encoder frame rate.
LabelingResult build_phase2_labels(const encoder::Encoder& model, std::size_t layer,
                                   const std::vector<Utterance>& corpus, const LabelingOptions& opt);

// Loads the encoder from a checkpoint and uses its phase2_feature_layer.
LabelingResult build_phase2_labels(const std::filesystem::path& checkpoint, const std::vector<Utterance>& corpus,
                                   const LabelingOptions& opt);

std::vector<Utterance> load_corpus(const std::filesystem::path& manifest);

}  // namespace bioseq::pseudolabel
