#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace bioseq::signal {

// JSON-lines {utterance_id, path, duration_s}
struct CorpusEntry {
    std::string utterance_id;
    std::filesystem::path path;
    double duration_s = 0.0;
};

// JSON-lines {utterance_id, path, label}; label is an integer class or a 0/1 list.
struct LabeledEntry {
    std::string utterance_id;
    std::filesystem::path path;
    bool multi_label = false;
    int label = 0;
    std::vector<int> labels;
};

// Relative paths are resolved against the manifest's directory. Errors name
// the file and line.
std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& manifest);
std::vector<LabeledEntry> read_labeled_manifest(const std::filesystem::path& manifest);

// Paths are written relative to the manifest's directory when they lie under it.
void write_corpus_manifest(const std::filesystem::path& manifest, const std::vector<CorpusEntry>& entries);
void write_labeled_manifest(const std::filesystem::path& manifest, const std::vector<LabeledEntry>& entries);

}  // namespace bioseq::signal
