#include "bioseq/signal/manifest.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace bioseq::signal {

namespace {

using nlohmann::json;

template <class F>
void for_each_line(const std::filesystem::path& manifest, F&& f) {
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            f(json::parse(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(manifest.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::filesystem::path resolve(const std::filesystem::path& manifest, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : manifest.parent_path() / path;
}

std::string relative_to(const std::filesystem::path& manifest, const std::filesystem::path& p) {
    const auto base = std::filesystem::weakly_canonical(std::filesystem::absolute(manifest).parent_path());
    const auto full = std::filesystem::weakly_canonical(std::filesystem::absolute(p));
    const auto rel = full.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return full.generic_string();
}

void write_lines(const std::filesystem::path& manifest, const std::vector<json>& lines) {
    if (manifest.has_parent_path()) std::filesystem::create_directories(manifest.parent_path());
    std::ofstream out(manifest, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest " + manifest.string());
    for (const auto& j : lines) out << j.dump() << '\n';
}

}  // namespace

std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& manifest) {
    std::vector<CorpusEntry> out;
    for_each_line(manifest, [&](const json& j) {
        out.push_back({j.at("utterance_id").get<std::string>(), resolve(manifest, j.at("path").get<std::string>()),
                       j.at("duration_s").get<double>()});
    });
    return out;
}

std::vector<LabeledEntry> read_labeled_manifest(const std::filesystem::path& manifest) {
    std::vector<LabeledEntry> out;
    for_each_line(manifest, [&](const json& j) {
        LabeledEntry e;
        e.utterance_id = j.at("utterance_id").get<std::string>();
        e.path = resolve(manifest, j.at("path").get<std::string>());
        const json& label = j.at("label");
        if (label.is_array()) {
            e.multi_label = true;
            for (const auto& v : label) {
                const int b = v.get<int>();
                if (b != 0 && b != 1) throw std::runtime_error("detection labels must be 0 or 1");
                e.labels.push_back(b);
            }
        } else {
            e.label = label.get<int>();
        }
        out.push_back(std::move(e));
    });
    return out;
}

void write_corpus_manifest(const std::filesystem::path& manifest, const std::vector<CorpusEntry>& entries) {
    std::vector<json> lines;
    for (const auto& e : entries)
        lines.push_back({{"utterance_id", e.utterance_id}, {"path", relative_to(manifest, e.path)}, {"duration_s", e.duration_s}});
    write_lines(manifest, lines);
}

void write_labeled_manifest(const std::filesystem::path& manifest, const std::vector<LabeledEntry>& entries) {
    std::vector<json> lines;
    for (const auto& e : entries) {
        json j = {{"utterance_id", e.utterance_id}, {"path", relative_to(manifest, e.path)}};
        if (e.multi_label)
            j["label"] = e.labels;
        else
            j["label"] = e.label;
        lines.push_back(std::move(j));
    }
    write_lines(manifest, lines);
}

}  // namespace bioseq::signal
