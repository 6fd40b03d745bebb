#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace bioseq::app {

struct SynthOptions {
    std::size_t n_utterances = 30;  // per corpus
    std::uint64_t seed = 7;
    std::size_t classes = 3;        // classification, at most 8
    std::size_t event_classes = 4;  // detection, at most 8
    double pretrain_min_s = 4.0;
    double pretrain_max_s = 6.0;
    double clip_seconds = 2.0;
    double detection_seconds = 3.0;

    std::vector<std::string> validate() const;
};

nlohmann::json to_json(const SynthOptions& o);
SynthOptions synth_options_from_json(const nlohmann::json& j, const SynthOptions& defaults = {});

struct SynthEvent {
    std::size_t cls = 0;
    double onset_s = 0.0;
    double duration_s = 0.0;
    double freq_hz = 0.0;
    double amplitude = 0.0;
};

struct SynthManifests {
    std::filesystem::path pretrain;
    std::filesystem::path classification_train, classification_valid, classification_test;
    std::filesystem::path detection_train, detection_valid, detection_test;
    std::filesystem::path detection_events;  // JSON lines {utterance_id, events: [...]}
};

// Frequencies used for each classification class (two tones) and detection
// event class (one tone).
std::vector<double> class_tones(std::size_t cls);
double event_tone(std::size_t cls);

// One 0/1 entry per event class: present iff an event of that class was mixed in.
std::vector<int> presence_from_events(const std::vector<SynthEvent>& events, std::size_t event_classes);

std::vector<SynthEvent> read_event_log_entry(const nlohmann::json& line);

// Writes pretrain/, classification/ and detection/ under out_dir. Output is a
// pure function of the options.
SynthManifests synth_corpus(const std::filesystem::path& out_dir, const SynthOptions& opt);

}  // namespace bioseq::app
