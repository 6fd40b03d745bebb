#include "bioseq/app/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "bioseq/num/random.hpp"
#include "bioseq/signal/audio.hpp"
#include "bioseq/signal/manifest.hpp"

namespace bioseq::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kRate = 16000.0;
constexpr double kPretrainTones[] = {300, 500, 800, 1200, 1800, 2600, 3600, 5000};
constexpr double kClassTones[8][2] = {{400, 1000}, {700, 2200}, {1500, 3300}, {600, 4200},
                                      {900, 2800}, {1200, 5000}, {2000, 450}, {3000, 800}};
constexpr double kEventTones[] = {500, 1100, 2300, 4100, 700, 1600, 3000, 5500};

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
    return buf;
}

std::size_t seconds_to_samples(double s) { return static_cast<std::size_t>(std::llround(s * kRate)); }

signal::Waveform noise_bed(std::size_t n, num::Rng& rng) {
    signal::Waveform w;
    w.samples.resize(n);
    for (auto& x : w.samples) x = static_cast<float>(0.01 * num::normal01(rng));
    return w;
}

void add_tone(signal::Waveform& w, double freq, double amp, double phase0, std::size_t begin, std::size_t end,
              bool taper) {
    const double len = static_cast<double>(end - begin);
    for (std::size_t t = begin; t < end; ++t) {
        double env = 1.0;
        if (taper) env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(t - begin) + 0.5) / len);
        const double ph = phase0 + 2.0 * std::numbers::pi * freq * static_cast<double>(t) / kRate;
        w.samples[t] += static_cast<float>(amp * env * std::sin(ph));
    }
}

void write_pretrain(const fs::path& dir, const SynthOptions& opt, SynthManifests& m) {
    fs::create_directories(dir / "wav");
    std::vector<signal::CorpusEntry> entries;
    for (std::size_t i = 0; i < opt.n_utterances; ++i) {
        auto rng = num::make_rng(opt.seed, {0x9e7, i});
        const double dur = opt.pretrain_min_s + (opt.pretrain_max_s - opt.pretrain_min_s) * num::uniform01(rng);
        const std::size_t len = seconds_to_samples(dur);
        const bool two = num::uniform01(rng) < 0.5;
        const std::size_t cut = two ? static_cast<std::size_t>(len * (0.3 + 0.4 * num::uniform01(rng))) : len;
        const double f1 = kPretrainTones[static_cast<std::size_t>(num::uniform01(rng) * 8)];
        const double f2 = kPretrainTones[static_cast<std::size_t>(num::uniform01(rng) * 8)];
        signal::Waveform w = noise_bed(len, rng);
        add_tone(w, f1, 0.5, 0.0, 0, cut, false);
        if (cut < len) add_tone(w, f2, 0.5, 0.0, cut, len, false);
        const std::string id = numbered("pre", i);
        const fs::path wav = dir / "wav" / (id + ".wav");
        signal::write_wav(wav, w);
        entries.push_back({id, wav, static_cast<double>(len) / kRate});
    }
    m.pretrain = dir / "manifest.jsonl";
    signal::write_corpus_manifest(m.pretrain, entries);
}

void write_classification(const fs::path& dir, const SynthOptions& opt, SynthManifests& m) {
    fs::create_directories(dir / "wav");
    std::vector<std::vector<signal::LabeledEntry>> by_class(opt.classes);
    const std::size_t len = seconds_to_samples(opt.clip_seconds);
    for (std::size_t i = 0; i < opt.n_utterances; ++i) {
        const std::size_t cls = i % opt.classes;
        auto rng = num::make_rng(opt.seed, {0xc1a5, i});
        signal::Waveform w = noise_bed(len, rng);
        for (double f : class_tones(cls)) {
            const double jitter = 1.0 + 0.04 * (num::uniform01(rng) - 0.5);
            const double amp = 0.25 * (0.8 + 0.4 * num::uniform01(rng));
            add_tone(w, f * jitter, amp, 2.0 * std::numbers::pi * num::uniform01(rng), 0, len, false);
        }
        const std::string id = numbered("cls", i);
        const fs::path wav = dir / "wav" / (id + ".wav");
        signal::write_wav(wav, w);
        signal::LabeledEntry e;
        e.utterance_id = id;
        e.path = wav;
        e.label = static_cast<int>(cls);
        by_class[cls].push_back(e);
    }
    std::vector<signal::LabeledEntry> train, valid, test;
    for (const auto& items : by_class) {
        const std::size_t held = std::max<std::size_t>(2, items.size() / 5);
        for (std::size_t j = 0; j < items.size(); ++j) {
            if (j < items.size() - 2 * held)
                train.push_back(items[j]);
            else if (j < items.size() - held)
                valid.push_back(items[j]);
            else
                test.push_back(items[j]);
        }
    }
    auto by_id = [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; };
    for (auto* v : {&train, &valid, &test}) std::sort(v->begin(), v->end(), by_id);
    m.classification_train = dir / "train.jsonl";
    m.classification_valid = dir / "valid.jsonl";
    m.classification_test = dir / "test.jsonl";
    signal::write_labeled_manifest(m.classification_train, train);
    signal::write_labeled_manifest(m.classification_valid, valid);
    signal::write_labeled_manifest(m.classification_test, test);
}

void write_detection(const fs::path& dir, const SynthOptions& opt, SynthManifests& m) {
    fs::create_directories(dir / "wav");
    const std::size_t len = seconds_to_samples(opt.detection_seconds);
    std::vector<signal::LabeledEntry> all;
    std::string log;
    for (std::size_t i = 0; i < opt.n_utterances; ++i) {
        auto rng = num::make_rng(opt.seed, {0xde7, i});
        signal::Waveform w = noise_bed(len, rng);
        std::vector<SynthEvent> events;
        for (std::size_t c = 0; c < opt.event_classes; ++c) {
            if (num::uniform01(rng) >= 0.5) continue;
            SynthEvent ev;
            ev.cls = c;
            ev.duration_s = std::min(opt.detection_seconds, 0.4 + 0.8 * num::uniform01(rng));
            ev.onset_s = (opt.detection_seconds - ev.duration_s) * num::uniform01(rng);
            ev.freq_hz = event_tone(c);
            ev.amplitude = 0.3 * (0.8 + 0.4 * num::uniform01(rng));
            const std::size_t b = seconds_to_samples(ev.onset_s);
            const std::size_t e = std::min(len, b + seconds_to_samples(ev.duration_s));
            add_tone(w, ev.freq_hz, ev.amplitude, 0.0, b, e, true);
            events.push_back(ev);
        }
        const std::string id = numbered("det", i);
        const fs::path wav = dir / "wav" / (id + ".wav");
        signal::write_wav(wav, w);
        signal::LabeledEntry e;
        e.utterance_id = id;
        e.path = wav;
        e.multi_label = true;
        e.labels = presence_from_events(events, opt.event_classes);
        all.push_back(e);
        json evs = json::array();
        for (const auto& ev : events)
            evs.push_back({{"class", ev.cls},
                           {"onset_s", ev.onset_s},
                           {"duration_s", ev.duration_s},
                           {"freq_hz", ev.freq_hz},
                           {"amplitude", ev.amplitude}});
        log += json{{"utterance_id", id}, {"events", evs}}.dump() + "\n";
    }
    const std::size_t held = std::max<std::size_t>(1, all.size() / 5);
    const std::size_t n_train = all.size() - 2 * held;
    m.detection_train = dir / "train.jsonl";
    m.detection_valid = dir / "valid.jsonl";
    m.detection_test = dir / "test.jsonl";
    m.detection_events = dir / "events.jsonl";
    signal::write_labeled_manifest(m.detection_train, {all.begin(), all.begin() + n_train});
    signal::write_labeled_manifest(m.detection_valid, {all.begin() + n_train, all.begin() + n_train + held});
    signal::write_labeled_manifest(m.detection_test, {all.begin() + n_train + held, all.end()});
    std::ofstream out(m.detection_events, std::ios::binary);
    out << log;
    if (!out) throw std::runtime_error("cannot write " + m.detection_events.string());
}

}  // namespace

std::vector<std::string> SynthOptions::validate() const {
    std::vector<std::string> errs;
    if (classes < 2 || classes > 8) errs.push_back("classes: must be in [2, 8]");
    if (event_classes < 1 || event_classes > 8) errs.push_back("event_classes: must be in [1, 8]");
    if (classes >= 2 && n_utterances < 6 * classes)
        errs.push_back("n_utterances: need at least 6 per class (" + std::to_string(6 * classes) + ")");
    if (!(pretrain_min_s > 0.05) || !(pretrain_max_s >= pretrain_min_s))
        errs.push_back("pretrain_min_s/pretrain_max_s: need 0.05 < min <= max");
    if (!(clip_seconds > 0.05)) errs.push_back("clip_seconds: must exceed 0.05");
    if (!(detection_seconds >= 1.2)) errs.push_back("detection_seconds: must be at least 1.2");
    return errs;
}

json to_json(const SynthOptions& o) {
    return {{"n_utterances", o.n_utterances},       {"seed", o.seed},
            {"classes", o.classes},                 {"event_classes", o.event_classes},
            {"pretrain_min_s", o.pretrain_min_s},   {"pretrain_max_s", o.pretrain_max_s},
            {"clip_seconds", o.clip_seconds},       {"detection_seconds", o.detection_seconds}};
}

SynthOptions synth_options_from_json(const json& j, const SynthOptions& d) {
    SynthOptions o = d;
    o.n_utterances = j.value("n_utterances", o.n_utterances);
    o.seed = j.value("seed", o.seed);
    o.classes = j.value("classes", o.classes);
    o.event_classes = j.value("event_classes", o.event_classes);
    o.pretrain_min_s = j.value("pretrain_min_s", o.pretrain_min_s);
    o.pretrain_max_s = j.value("pretrain_max_s", o.pretrain_max_s);
    o.clip_seconds = j.value("clip_seconds", o.clip_seconds);
    o.detection_seconds = j.value("detection_seconds", o.detection_seconds);
    return o;
}

std::vector<double> class_tones(std::size_t cls) {
    if (cls >= 8) throw std::out_of_range("class_tones: class out of range");
    return {kClassTones[cls][0], kClassTones[cls][1]};
}

double event_tone(std::size_t cls) {
    if (cls >= 8) throw std::out_of_range("event_tone: class out of range");
    return kEventTones[cls];
}

std::vector<int> presence_from_events(const std::vector<SynthEvent>& events, std::size_t event_classes) {
    std::vector<int> v(event_classes, 0);
    for (const auto& e : events) v.at(e.cls) = 1;
    return v;
}

std::vector<SynthEvent> read_event_log_entry(const json& line) {
    std::vector<SynthEvent> out;
    for (const auto& e : line.at("events"))
        out.push_back({e.at("class").get<std::size_t>(), e.at("onset_s").get<double>(), e.at("duration_s").get<double>(),
                       e.at("freq_hz").get<double>(), e.at("amplitude").get<double>()});
    return out;
}

SynthManifests synth_corpus(const fs::path& out_dir, const SynthOptions& opt) {
    if (auto errs = opt.validate(); !errs.empty()) {
        std::string msg = "invalid synth options:";
        for (const auto& e : errs) msg += " " + e + ";";
        throw std::invalid_argument(msg);
    }
    SynthManifests m;
    write_pretrain(out_dir / "pretrain", opt, m);
    write_classification(out_dir / "classification", opt, m);
    write_detection(out_dir / "detection", opt, m);
    return m;
}

}  // namespace bioseq::app
