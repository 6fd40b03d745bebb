#include "bioseq/pseudolabel/labels.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "bioseq/num/checkpoint.hpp"
#include "bioseq/signal/manifest.hpp"

namespace bioseq::pseudolabel {

namespace {

FrameSequence stack_rows(const std::vector<FrameSequence>& parts) {
    std::size_t rows = 0;
    for (const auto& p : parts) rows += p.frames;
    FrameSequence out(rows, parts.empty() ? 0 : parts.front().dim, parts.empty() ? 0.0 : parts.front().frame_rate_hz);
    std::size_t r = 0;
    for (const auto& p : parts) {
        std::copy(p.values.begin(), p.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(r * out.dim));
        r += p.frames;
    }
    return out;
}

LabelingResult fit_and_label(const std::vector<Utterance>& corpus, const std::vector<FrameSequence>& feats,
                             const LabelingOptions& opt) {
    const FrameSequence pool = subsample_rows(stack_rows(feats), opt.frame_budget, opt.seed);
    LabelingResult res;
    res.fit = kmeans_fit(pool, {.k = opt.k, .max_iter = opt.max_iter, .n_init = opt.n_init, .seed = opt.seed});
    res.codebook = res.fit.codebook;
    res.labels.k = opt.k;
    for (std::size_t u = 0; u < corpus.size(); ++u) res.labels.items.push_back({corpus[u].id, assign(feats[u], res.codebook)});
    return res;
}

}  // namespace

const UtteranceLabels& PseudoLabelSet::find(const std::string& id) const {
    for (const auto& it : items)
        if (it.utterance_id == id) return it;
    throw std::runtime_error("no pseudo-labels for utterance '" + id + "'");
}

void write_labels(const std::filesystem::path& path, const PseudoLabelSet& set) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write labels " + path.string());
    for (const auto& it : set.items) out << nlohmann::json{{"utterance_id", it.utterance_id}, {"labels", it.labels}}.dump() << '\n';
}

PseudoLabelSet read_labels(const std::filesystem::path& path, std::size_t k) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open labels " + path.string());
    PseudoLabelSet set;
    set.k = k;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        UtteranceLabels u{j.at("utterance_id").get<std::string>(), j.at("labels").get<std::vector<int>>()};
        for (int z : u.labels)
            if (z < 0 || static_cast<std::size_t>(z) >= k)
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": label " + std::to_string(z) +
                                         " outside [0, " + std::to_string(k) + ")");
        set.items.push_back(std::move(u));
    }
    return set;
}

LabelingResult build_phase1_labels(const std::vector<Utterance>& corpus, const encoder::CnnFrontendConfig& cnn,
                                   const signal::MfccConfig& mfcc_cfg, const LabelingOptions& opt) {
    if (corpus.empty()) throw std::invalid_argument("phase-1 labels: empty corpus");
    std::vector<FrameSequence> feats;
    for (const auto& u : corpus) feats.push_back(signal::mfcc(u.wave, mfcc_cfg));
    LabelingResult res = fit_and_label(corpus, feats, opt);
    res.codebook.kind = FeatureKind::mfcc;
    for (std::size_t u = 0; u < corpus.size(); ++u)
        res.labels.items[u].labels = align_labels(res.labels.items[u].labels, cnn.output_length(corpus[u].wave.size()));
    return res;
}

LabelingResult build_phase2_labels(const encoder::Encoder& model, std::size_t layer, const std::vector<Utterance>& corpus,
                                   const LabelingOptions& opt) {
    if (corpus.empty()) throw std::invalid_argument("phase-2 labels: empty corpus");
    if (layer < 1 || layer > model.config().n_layers)
        throw std::invalid_argument("phase-2 labels: layer " + std::to_string(layer) + " outside [1, " +
                                    std::to_string(model.config().n_layers) + "]");
    num::NoGradGuard ng;
    std::vector<FrameSequence> feats;
    for (const auto& u : corpus) {
        const num::Tensor h = model.layers(model.features(u.wave).frames, layer);
        FrameSequence f(h.rows(), h.cols(), 50.0);
        std::copy(h.data().begin(), h.data().end(), f.values.begin());
        feats.push_back(std::move(f));
    }
    LabelingResult res = fit_and_label(corpus, feats, opt);
    res.codebook.kind = FeatureKind::layer_repr;
    res.codebook.source_layer = layer;
    return res;
}

LabelingResult build_phase2_labels(const std::filesystem::path& checkpoint, const std::vector<Utterance>& corpus,
                                   const LabelingOptions& opt) {
    const auto ckpt = num::Checkpoint::load(checkpoint);
    const encoder::Encoder model = encoder::Encoder::load(ckpt);
    return build_phase2_labels(model, model.config().phase2_feature_layer, corpus, opt);
}

std::vector<Utterance> load_corpus(const std::filesystem::path& manifest) {
    std::vector<Utterance> out;
    for (const auto& e : signal::read_corpus_manifest(manifest)) out.push_back({e.utterance_id, signal::load_audio(e.path)});
    if (out.empty()) throw std::invalid_argument("corpus manifest " + manifest.string() + " is empty");
    return out;
}

}  // namespace bioseq::pseudolabel
