#include "bioseq/pretrain/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "bioseq/num/ops.hpp"
#include "bioseq/num/random.hpp"

namespace bioseq::pretrain {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> PhaseConfig::validate() const {
    std::vector<std::string> errs;
    if (k < 2) errs.push_back("k must be at least 2");
    if (steps < 1) errs.push_back("steps must be positive");
    if (!(batch_seconds > 0.0)) errs.push_back("batch_seconds must be positive");
    if (!(peak_lr > 0.0)) errs.push_back("peak_lr must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) errs.push_back("warmup_fraction must be in [0, 1)");
    if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) errs.push_back("mask_prob must be in [0, 1]");
    if (span_len < 1) errs.push_back("span_len must be at least 1");
    if (checkpoint_every < 0) errs.push_back("checkpoint_every must be >= 0");
    if (!(adamw.beta1 >= 0.0f && adamw.beta1 < 1.0f)) errs.push_back("adamw.beta1 must be in [0, 1)");
    if (!(adamw.beta2 >= 0.0f && adamw.beta2 < 1.0f)) errs.push_back("adamw.beta2 must be in [0, 1)");
    if (!(adamw.eps > 0.0f)) errs.push_back("adamw.eps must be positive");
    if (!(adamw.weight_decay >= 0.0f)) errs.push_back("adamw.weight_decay must be >= 0");
    return errs;
}

json to_json(const PhaseConfig& c) {
    return {{"k", c.k},
            {"steps", c.steps},
            {"batch_seconds", c.batch_seconds},
            {"peak_lr", c.peak_lr},
            {"warmup_fraction", c.warmup_fraction},
            {"mask_prob", c.mask_prob},
            {"span_len", c.span_len},
            {"checkpoint_every", c.checkpoint_every},
            {"seed", c.seed},
            {"adamw",
             {{"beta1", c.adamw.beta1},
              {"beta2", c.adamw.beta2},
              {"eps", c.adamw.eps},
              {"weight_decay", c.adamw.weight_decay}}}};
}

PhaseConfig phase_config_from_json(const json& j, const PhaseConfig& d) {
    PhaseConfig c = d;
    c.k = j.value("k", c.k);
    c.steps = j.value("steps", c.steps);
    c.batch_seconds = j.value("batch_seconds", c.batch_seconds);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.mask_prob = j.value("mask_prob", c.mask_prob);
    c.span_len = j.value("span_len", c.span_len);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.seed = j.value("seed", c.seed);
    if (j.contains("adamw")) {
        const auto& a = j.at("adamw");
        c.adamw.beta1 = a.value("beta1", c.adamw.beta1);
        c.adamw.beta2 = a.value("beta2", c.adamw.beta2);
        c.adamw.eps = a.value("eps", c.adamw.eps);
        c.adamw.weight_decay = a.value("weight_decay", c.adamw.weight_decay);
    }
    return c;
}

namespace {

json record_json(const StepRecord& r) {
    return {{"step", r.step},
            {"loss", r.loss},
            {"lr", r.lr},
            {"masked_accuracy", r.masked_accuracy},
            {"masked_frames", r.masked_frames},
            {"utterances", r.utterances}};
}

StepRecord record_from_json(const json& j) {
    StepRecord r;
    r.step = j.at("step").get<std::int64_t>();
    r.loss = j.at("loss").get<double>();
    r.lr = j.at("lr").get<double>();
    r.masked_accuracy = j.at("masked_accuracy").get<double>();
    r.masked_frames = j.at("masked_frames").get<std::size_t>();
    r.utterances = j.at("utterances").get<std::size_t>();
    return r;
}

struct Item {
    const Utterance* utt;
    std::vector<int> labels;
};

std::vector<Item> prepare(const std::vector<Utterance>& corpus, const PseudoLabelSet& labels,
                          const encoder::CnnFrontendConfig& cnn, std::size_t k) {
    if (corpus.empty()) throw std::invalid_argument("pretraining corpus is empty");
    if (labels.k != k)
        throw std::invalid_argument("label set has k=" + std::to_string(labels.k) + ", head expects " +
                                    std::to_string(k));
    std::vector<Item> items;
    for (const auto& u : corpus) {
        if (u.wave.sample_rate_hz != signal::kTargetRateHz)
            throw std::invalid_argument("utterance '" + u.id + "' is not at 16 kHz");
        const pseudolabel::UtteranceLabels* found = nullptr;
        for (const auto& it : labels.items)
            if (it.utterance_id == u.id) found = &it;
        if (found == nullptr) throw std::invalid_argument("label/manifest mismatch: no labels for '" + u.id + "'");
        const std::size_t T = cnn.output_length(u.wave.size());
        if (T == 0) throw std::invalid_argument("utterance '" + u.id + "' is shorter than one encoder frame");
        if (found->labels.size() != T)
            throw std::invalid_argument("label/manifest mismatch: '" + u.id + "' has " +
                                        std::to_string(found->labels.size()) + " labels for " + std::to_string(T) +
                                        " frames");
        items.push_back({&u, found->labels});
    }
    return items;
}

struct Trainer {
    PretrainModel model;
    num::AdamW opt;
    std::vector<StepRecord> records;
    std::int64_t next_step = 1;
};

void save_checkpoint(const Trainer& tr, const PhaseConfig& cfg, const std::string& name, const fs::path& path,
                     const json& extra = json::object()) {
    num::Checkpoint ck;
    tr.model.save(ck);
    tr.opt.save_state(ck);
    json recs = json::array();
    for (const auto& r : tr.records) recs.push_back(record_json(r));
    json train = {{"phase", name}, {"step", tr.next_step - 1}, {"config", to_json(cfg)}, {"records", recs}};
    train.update(extra);
    ck.config()["train"] = train;
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    ck.save(path);
}

PhaseResult run(Trainer tr, const std::vector<Utterance>& corpus, const PseudoLabelSet& labels,
                const PhaseConfig& cfg, const PhaseOutput& out) {
    const auto& enc_cfg = tr.model.encoder().config();
    const auto items = prepare(corpus, labels, enc_cfg.cnn, tr.model.k());
    std::vector<double> durations;
    for (const auto& it : items) durations.push_back(it.utt->wave.duration_s());

    const num::LinearWarmupDecay schedule(cfg.peak_lr, cfg.steps, cfg.warmup_fraction);
    const auto stride = enc_cfg.cnn.total_stride();
    const auto field = enc_cfg.cnn.receptive_field();
    const double budget_samples = cfg.batch_seconds * signal::kTargetRateHz;
    const std::size_t crop_frames =
        budget_samples < static_cast<double>(field)
            ? 1
            : static_cast<std::size_t>((budget_samples - static_cast<double>(field)) / static_cast<double>(stride)) + 1;

    for (std::int64_t s = tr.next_step; s <= cfg.steps; ++s) {
        const auto batch = pack_batch(durations, cfg.batch_seconds, cfg.seed, s);

        struct Prepared {
            Tensor wave;
            std::vector<int> labels;
            MaskSpec mask;
        };
        std::vector<Prepared> prepared;
        std::size_t total_masked = 0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Item& it = items[batch[b]];
            const auto& samples = it.utt->wave.samples;
            const std::size_t T = it.labels.size();
            Prepared p;
            if (T > crop_frames) {
                auto rng = num::make_rng(cfg.seed, {0xc40b, static_cast<std::uint64_t>(s), b});
                const auto j = static_cast<std::size_t>(num::uniform01(rng) * static_cast<double>(T - crop_frames + 1));
                const std::size_t len = (crop_frames - 1) * stride + field;
                p.wave = Tensor::from({len, 1}, std::span<const float>(samples).subspan(j * stride, len));
                p.labels.assign(it.labels.begin() + static_cast<std::ptrdiff_t>(j),
                                it.labels.begin() + static_cast<std::ptrdiff_t>(j + crop_frames));
            } else {
                p.wave = Tensor::from({samples.size(), 1}, samples);
                p.labels = it.labels;
            }
            p.mask = sample_mask(p.labels.size(), cfg.mask_prob, cfg.span_len,
                                 num::mix_seed(cfg.seed, {0x3a5c, static_cast<std::uint64_t>(s), b}));
            total_masked += p.mask.indices.size();
            prepared.push_back(std::move(p));
        }

        num::GradMap grads;
        double loss = 0.0;
        std::size_t correct = 0;
        for (const auto& p : prepared) {
            const Tensor logits = tr.model.logits(p.wave, &p.mask);
            const double w = static_cast<double>(p.mask.indices.size()) / static_cast<double>(total_masked);
            const Tensor l = num::scale(masked_prediction_loss(logits, p.labels, p.mask), static_cast<float>(w));
            loss += static_cast<double>(l.item());
            correct += masked_correct(logits, p.labels, p.mask);
            grads.accumulate(num::backward(l));
        }

        const double lr = schedule.at(s);
        tr.opt.step(grads, static_cast<float>(lr));
        tr.next_step = s + 1;

        StepRecord rec;
        rec.step = s;
        rec.loss = loss;
        rec.lr = lr;
        rec.masked_accuracy = static_cast<double>(correct) / static_cast<double>(total_masked);
        rec.masked_frames = total_masked;
        rec.utterances = batch.size();
        tr.records.push_back(rec);
        if (out.on_step) out.on_step(rec);

        if (cfg.checkpoint_every > 0 && s % cfg.checkpoint_every == 0 && s != cfg.steps)
            save_checkpoint(tr, cfg, out.name, out.dir / (out.name + "_step" + std::to_string(s) + ".bmck"));
    }

    PhaseReport report;
    report.name = out.name;
    report.k = tr.model.k();
    report.steps = tr.records;
    report.config = cfg;
    report.final_masked_accuracy = masked_accuracy(tr.model, corpus, labels, cfg.mask_prob, cfg.span_len,
                                                   num::mix_seed(cfg.seed, {0xe7a1}));

    const fs::path final_path = out.dir / (out.name + ".bmck");
    save_checkpoint(tr, cfg, out.name, final_path, {{"final_masked_accuracy", report.final_masked_accuracy}});
    return {std::move(tr.model), std::move(report), final_path};
}

void check_config(const PhaseConfig& cfg) {
    const auto errs = cfg.validate();
    if (errs.empty()) return;
    std::string msg = "invalid phase config:";
    for (const auto& e : errs) msg += " " + e + ";";
    throw std::invalid_argument(msg);
}

}  // namespace

json PhaseReport::to_json() const {
    json steps_j = json::array();
    for (const auto& r : steps) steps_j.push_back(record_json(r));
    return {{"phase", name},
            {"k", k},
            {"final_masked_accuracy", final_masked_accuracy},
            {"config", pretrain::to_json(config)},
            {"steps", steps_j}};
}

std::vector<std::size_t> pack_batch(const std::vector<double>& durations, double batch_seconds, std::uint64_t seed,
                                    std::int64_t step) {
    if (durations.empty()) throw std::invalid_argument("pack_batch: empty corpus");
    std::vector<std::size_t> order(durations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rng = num::make_rng(seed, {0xba7c, static_cast<std::uint64_t>(step)});
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(num::uniform01(rng) * static_cast<double>(i));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::size_t> batch;
    double used = 0.0;
    for (std::size_t idx : order) {
        const double d = std::min(durations[idx], batch_seconds);
        if (batch.empty() || used + d <= batch_seconds) {
            batch.push_back(idx);
            used += d;
        }
    }
    return batch;
}

PhaseResult pretrain_phase(PretrainModel model, const std::vector<Utterance>& corpus, const PseudoLabelSet& labels,
                           const PhaseConfig& cfg, const PhaseOutput& out) {
    check_config(cfg);
    if (cfg.k != model.k())
        throw std::invalid_argument("phase config k=" + std::to_string(cfg.k) + " but head has k=" +
                                    std::to_string(model.k()));
    num::AdamW opt(model.params(), cfg.adamw);
    return run(Trainer{std::move(model), std::move(opt), {}, 1}, corpus, labels, cfg, out);
}

PhaseResult resume_phase(const fs::path& checkpoint, const std::vector<Utterance>& corpus,
                         const PseudoLabelSet& labels, const PhaseConfig& cfg, const PhaseOutput& out) {
    check_config(cfg);
    const auto ck = num::Checkpoint::load(checkpoint);
    if (!ck.config().contains("train")) throw std::runtime_error("checkpoint has no training state");
    const auto& train = ck.config().at("train");
    if (train.at("config") != to_json(cfg))
        throw std::invalid_argument("resume: phase config differs from the one stored in the checkpoint");
    PretrainModel model = PretrainModel::load(ck);
    num::AdamW opt(model.params(), cfg.adamw);
    opt.load_state(ck);
    std::vector<StepRecord> records;
    for (const auto& r : train.at("records")) records.push_back(record_from_json(r));
    const std::int64_t step = train.at("step").get<std::int64_t>();
    return run(Trainer{std::move(model), std::move(opt), std::move(records), step + 1}, corpus, labels, cfg, out);
}

double masked_accuracy(const PretrainModel& model, const std::vector<Utterance>& corpus, const PseudoLabelSet& labels,
                       double mask_prob, std::size_t span_len, std::uint64_t seed) {
    const auto items = prepare(corpus, labels, model.encoder().config().cnn, model.k());
    num::NoGradGuard ng;
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto mask = sample_mask(items[i].labels.size(), mask_prob, span_len, num::mix_seed(seed, {i}));
        const Tensor logits = model.logits(encoder::waveform_tensor(items[i].utt->wave), &mask);
        correct += masked_correct(logits, items[i].labels, mask);
        total += mask.indices.size();
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

// ---- two-phase pipeline -------------------------------------------------------

TwoPhaseConfig TwoPhaseConfig::desk() {
    TwoPhaseConfig c;
    c.encoder = encoder::EncoderConfig::desk();
    c.kmeans_frame_budget = 20000;
    c.phase1.k = 8;
    c.phase2.k = 16;
    c.phase1.steps = c.phase2.steps = 2000;
    c.phase1.batch_seconds = c.phase2.batch_seconds = 20.0;
    return c;
}

TwoPhaseConfig TwoPhaseConfig::full() {
    TwoPhaseConfig c;
    c.encoder = encoder::EncoderConfig::full();
    c.phase1.k = 100;
    c.phase2.k = 500;
    c.phase1.steps = c.phase2.steps = 100000;
    c.phase1.batch_seconds = c.phase2.batch_seconds = 700.0;
    return c;
}

std::vector<std::string> TwoPhaseConfig::validate() const {
    std::vector<std::string> errs;
    try {
        encoder.validate();
    } catch (const std::invalid_argument& e) {
        errs.emplace_back(e.what());
    }
    try {
        mfcc.validate();
    } catch (const std::invalid_argument& e) {
        errs.emplace_back(e.what());
    }
    for (const auto& e : phase1.validate()) errs.push_back("phase1: " + e);
    for (const auto& e : phase2.validate()) errs.push_back("phase2: " + e);
    if (kmeans_max_iter < 1) errs.push_back("kmeans_max_iter must be positive");
    if (kmeans_frame_budget < 1) errs.push_back("kmeans_frame_budget must be positive");
    if (kmeans_n_init < 1) errs.push_back("kmeans_n_init must be positive");
    return errs;
}

json to_json(const TwoPhaseConfig& c) {
    return {{"encoder", encoder::to_json(c.encoder)},
            {"mfcc",
             {{"window_ms", c.mfcc.window_ms},
              {"hop_ms", c.mfcc.hop_ms},
              {"n_mels", c.mfcc.n_mels},
              {"n_coeffs", c.mfcc.n_coeffs},
              {"add_deltas", c.mfcc.add_deltas},
              {"preemphasis", c.mfcc.preemphasis},
              {"log_floor", c.mfcc.log_floor}}},
            {"kmeans_max_iter", c.kmeans_max_iter},
            {"kmeans_frame_budget", c.kmeans_frame_budget},
            {"kmeans_n_init", c.kmeans_n_init},
            {"phase1", to_json(c.phase1)},
            {"phase2", to_json(c.phase2)},
            {"seed", c.seed}};
}

TwoPhaseConfig two_phase_config_from_json(const json& j, const TwoPhaseConfig& d) {
    TwoPhaseConfig c = d;
    if (j.contains("encoder")) {
        json merged = encoder::to_json(c.encoder);
        merged.merge_patch(j.at("encoder"));
        c.encoder = encoder::encoder_config_from_json(merged);
    }
    if (j.contains("mfcc")) {
        const auto& m = j.at("mfcc");
        c.mfcc.window_ms = m.value("window_ms", c.mfcc.window_ms);
        c.mfcc.hop_ms = m.value("hop_ms", c.mfcc.hop_ms);
        c.mfcc.n_mels = m.value("n_mels", c.mfcc.n_mels);
        c.mfcc.n_coeffs = m.value("n_coeffs", c.mfcc.n_coeffs);
        c.mfcc.add_deltas = m.value("add_deltas", c.mfcc.add_deltas);
        c.mfcc.preemphasis = m.value("preemphasis", c.mfcc.preemphasis);
        c.mfcc.log_floor = m.value("log_floor", c.mfcc.log_floor);
    }
    c.kmeans_max_iter = j.value("kmeans_max_iter", c.kmeans_max_iter);
    c.kmeans_frame_budget = j.value("kmeans_frame_budget", c.kmeans_frame_budget);
    c.kmeans_n_init = j.value("kmeans_n_init", c.kmeans_n_init);
    if (j.contains("phase1")) c.phase1 = phase_config_from_json(j.at("phase1"), c.phase1);
    if (j.contains("phase2")) c.phase2 = phase_config_from_json(j.at("phase2"), c.phase2);
    c.seed = j.value("seed", c.seed);
    return c;
}

TwoPhaseResult run_two_phase(const std::vector<Utterance>& corpus, const TwoPhaseConfig& cfg, const fs::path& out_dir,
                             const std::function<void(const std::string&, const StepRecord&)>& on_step) {
    const auto errs = cfg.validate();
    if (!errs.empty()) {
        std::string msg = "invalid pretraining config:";
        for (const auto& e : errs) msg += " " + e + ";";
        throw std::invalid_argument(msg);
    }
    if (corpus.empty()) throw std::invalid_argument("pretraining corpus is empty");
    fs::create_directories(out_dir);
    TwoPhaseResult res;

    pseudolabel::LabelingOptions lab;
    lab.max_iter = cfg.kmeans_max_iter;
    lab.frame_budget = cfg.kmeans_frame_budget;
    lab.n_init = cfg.kmeans_n_init;

    lab.k = cfg.phase1.k;
    lab.seed = num::mix_seed(cfg.seed, {1});
    const auto l1 = pseudolabel::build_phase1_labels(corpus, cfg.encoder.cnn, cfg.mfcc, lab);
    {
        num::Checkpoint ck;
        l1.codebook.save(ck, "phase1.");
        res.phase1_codebook = out_dir / "phase1_codebook.bmck";
        ck.save(res.phase1_codebook);
        pseudolabel::write_labels(out_dir / "phase1_labels.jsonl", l1.labels);
    }

    PhaseOutput out1{out_dir, "phase1", {}};
    if (on_step) out1.on_step = [&](const StepRecord& r) { on_step("phase1", r); };
    PretrainModel model(encoder::Encoder(cfg.encoder, cfg.seed), cfg.phase1.k, cfg.seed);
    auto p1 = pretrain_phase(std::move(model), corpus, l1.labels, cfg.phase1, out1);
    res.phase1_checkpoint = p1.checkpoint;
    res.phase1 = p1.report;

    lab.k = cfg.phase2.k;
    lab.seed = num::mix_seed(cfg.seed, {2});
    const auto l2 = pseudolabel::build_phase2_labels(p1.model.encoder(), cfg.encoder.phase2_feature_layer, corpus, lab);
    {
        num::Checkpoint ck;
        l2.codebook.save(ck, "phase2.");
        res.phase2_codebook = out_dir / "phase2_codebook.bmck";
        ck.save(res.phase2_codebook);
        pseudolabel::write_labels(out_dir / "phase2_labels.jsonl", l2.labels);
    }

    PhaseOutput out2{out_dir, "phase2", {}};
    if (on_step) out2.on_step = [&](const StepRecord& r) { on_step("phase2", r); };
    PretrainModel model2 = std::move(p1.model);
    model2.reset_head(cfg.phase2.k);
    auto p2 = pretrain_phase(std::move(model2), corpus, l2.labels, cfg.phase2, out2);
    res.phase2_checkpoint = p2.checkpoint;
    res.phase2 = p2.report;

    json report = {{"config", to_json(cfg)},
                   {"phase1", res.phase1.to_json()},
                   {"phase2", res.phase2.to_json()},
                   {"artifacts",
                    {{"phase1_checkpoint", res.phase1_checkpoint.filename().string()},
                     {"phase2_checkpoint", res.phase2_checkpoint.filename().string()},
                     {"phase1_codebook", res.phase1_codebook.filename().string()},
                     {"phase2_codebook", res.phase2_codebook.filename().string()}}}};
    res.report_path = out_dir / "pretrain_report.json";
    std::ofstream(res.report_path) << report.dump(2) << "\n";
    return res;
}

}  // namespace bioseq::pretrain
