#include "bioseq/downstream/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bioseq/num/ops.hpp"
#include "bioseq/num/random.hpp"
#include "bioseq/signal/manifest.hpp"

namespace bioseq::downstream {

using nlohmann::json;

const char* to_string(TaskKind k) { return k == TaskKind::classification ? "classification" : "detection"; }

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "classification") return TaskKind::classification;
    if (s == "detection") return TaskKind::detection;
    throw std::invalid_argument("unknown task kind '" + s + "'");
}

std::vector<std::string> TaskSpec::validate() const {
    std::vector<std::string> errs;
    if (kind == TaskKind::classification && n_classes < 2) errs.push_back("n_classes must be >= 2 for classification");
    if (kind == TaskKind::detection && n_classes < 1) errs.push_back("n_classes must be >= 1 for detection");
    if (!(max_seconds >= 0.0)) errs.push_back("max_seconds must be >= 0");
    if (!(pad_seconds >= 0.0)) errs.push_back("pad_seconds must be >= 0");
    if (max_seconds > 0.0 && pad_seconds > max_seconds) errs.push_back("pad_seconds must not exceed max_seconds");
    return errs;
}

json to_json(const TaskSpec& t) {
    return {{"kind", to_string(t.kind)},
            {"n_classes", t.n_classes},
            {"max_seconds", t.max_seconds},
            {"pad_seconds", t.pad_seconds}};
}

TaskSpec task_spec_from_json(const json& j, const TaskSpec& d) {
    TaskSpec t = d;
    if (j.contains("kind")) t.kind = task_kind_from_string(j.at("kind").get<std::string>());
    t.n_classes = j.value("n_classes", t.n_classes);
    t.max_seconds = j.value("max_seconds", t.max_seconds);
    t.pad_seconds = j.value("pad_seconds", t.pad_seconds);
    return t;
}

std::vector<std::string> FinetuneConfig::validate() const {
    std::vector<std::string> errs;
    if (lrs.empty()) errs.push_back("lrs must list at least one learning rate");
    for (double lr : lrs)
        if (!(lr > 0.0)) errs.push_back("lrs entries must be positive");
    if (epochs < 1) errs.push_back("epochs must be positive");
    if (batch_size < 1) errs.push_back("batch_size must be positive");
    if (!(adamw.weight_decay >= 0.0f)) errs.push_back("adamw.weight_decay must be >= 0");
    return errs;
}

json to_json(const FinetuneConfig& c) {
    return {{"lrs", c.lrs},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"track_train_metric", c.track_train_metric},
            {"adamw",
             {{"beta1", c.adamw.beta1},
              {"beta2", c.adamw.beta2},
              {"eps", c.adamw.eps},
              {"weight_decay", c.adamw.weight_decay}}}};
}

FinetuneConfig finetune_config_from_json(const json& j, const FinetuneConfig& d) {
    FinetuneConfig c = d;
    if (j.contains("lrs")) c.lrs = j.at("lrs").get<std::vector<double>>();
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.track_train_metric = j.value("track_train_metric", c.track_train_metric);
    if (j.contains("adamw")) {
        const auto& a = j.at("adamw");
        c.adamw.beta1 = a.value("beta1", c.adamw.beta1);
        c.adamw.beta2 = a.value("beta2", c.adamw.beta2);
        c.adamw.eps = a.value("eps", c.adamw.eps);
        c.adamw.weight_decay = a.value("weight_decay", c.adamw.weight_decay);
    }
    return c;
}

std::vector<LabeledClip> load_labeled_clips(const std::filesystem::path& manifest) {
    std::vector<LabeledClip> out;
    for (const auto& e : signal::read_labeled_manifest(manifest)) {
        LabeledClip c;
        c.id = e.utterance_id;
        c.wave = signal::load_audio(e.path);
        if (e.multi_label)
            c.labels = e.labels;
        else
            c.label = e.label;
        out.push_back(std::move(c));
    }
    return out;
}

std::pair<Tensor, std::size_t> clip_input(const signal::Waveform& w, const TaskSpec& task) {
    signal::validate(w);
    if (w.sample_rate_hz != signal::kTargetRateHz) throw std::invalid_argument("clip is not at 16 kHz");
    std::size_t start = 0, len = w.size();
    if (task.max_seconds > 0.0) {
        const auto max_len = static_cast<std::size_t>(std::llround(task.max_seconds * signal::kTargetRateHz));
        if (len > max_len) {
            start = (len - max_len) / 2;
            len = max_len;
        }
    }
    std::size_t total = len;
    if (task.pad_seconds > 0.0)
        total = std::max(total, static_cast<std::size_t>(std::llround(task.pad_seconds * signal::kTargetRateHz)));
    std::vector<float> buf(total, 0.0f);
    std::copy_n(w.samples.begin() + static_cast<std::ptrdiff_t>(start), len, buf.begin());
    return {Tensor::from({total, 1}, buf), len};
}

// ---- model ------------------------------------------------------------------------

FinetunedModel::FinetunedModel(encoder::Encoder enc, TaskSpec task)
    : enc_(std::move(enc)),
      task_(task),
      head_w_(Tensor::zeros({enc_.config().d, task.n_classes}, true)),
      head_b_(Tensor::zeros({task.n_classes}, true)) {
    const auto errs = task_.validate();
    if (!errs.empty()) throw std::invalid_argument("invalid task: " + errs.front());
}

Tensor FinetunedModel::pooled(const Tensor& frames, std::size_t valid_frames) const {
    return num::mean_rows(enc_.layers(frames), valid_frames);
}

Tensor FinetunedModel::logits_from_frames(const Tensor& frames, std::size_t valid_frames) const {
    return num::linear(pooled(frames, valid_frames), head_w_, head_b_);
}

Tensor FinetunedModel::logits(const signal::Waveform& w) const {
    const auto [wave, valid] = clip_input(w, task_);
    Tensor frames;
    std::size_t vf = 0;
    {
        num::NoGradGuard ng;
        const auto f = enc_.features(wave, valid);
        frames = f.frames;
        vf = f.valid;
    }
    return logits_from_frames(frames, vf);
}

std::vector<double> FinetunedModel::predict(const signal::Waveform& w) const {
    num::NoGradGuard ng;
    const Tensor z = logits(w);
    const Tensor p = task_.kind == TaskKind::classification ? num::softmax(z) : num::sigmoid(z);
    return {p.data().begin(), p.data().end()};
}

num::ParamList FinetunedModel::trainable_params() const {
    auto p = enc_.layer_params();
    p.push_back({"head.w", head_w_});
    p.push_back({"head.b", head_b_});
    return p;
}

void FinetunedModel::save(num::Checkpoint& ckpt) const {
    enc_.save(ckpt);
    ckpt.put_f32("head.w", head_w_.shape(), head_w_.data());
    ckpt.put_f32("head.b", head_b_.shape(), head_b_.data());
    ckpt.config()["task"] = to_json(task_);
}

FinetunedModel FinetunedModel::load(const num::Checkpoint& ckpt) {
    if (!ckpt.config().contains("task")) throw std::runtime_error("checkpoint has no task head");
    FinetunedModel m(encoder::Encoder::load(ckpt), task_spec_from_json(ckpt.config().at("task")));
    for (auto* t : {&m.head_w_, &m.head_b_}) {
        const std::string name = t == &m.head_w_ ? "head.w" : "head.b";
        if (!ckpt.has(name) || ckpt.shape(name) != t->shape())
            throw std::runtime_error("checkpoint entry '" + name + "' is missing or has the wrong shape");
        const auto v = ckpt.get_f32(name);
        std::copy(v.begin(), v.end(), t->mutable_data().begin());
    }
    return m;
}

// ---- training ---------------------------------------------------------------------

namespace {

struct Prepared {
    Tensor frames;
    std::size_t valid = 0;
    int label = 0;
    std::vector<float> targets;
    std::vector<int> target_ints;
};

void check_labels(const std::vector<LabeledClip>& clips, const TaskSpec& task, const char* split) {
    if (clips.empty()) throw std::invalid_argument(std::string(split) + " split is empty");
    for (const auto& c : clips) {
        if (task.kind == TaskKind::classification) {
            if (!c.labels.empty())
                throw std::invalid_argument("clip '" + c.id + "' has multi-label targets in a classification task");
            if (c.label < 0 || static_cast<std::size_t>(c.label) >= task.n_classes)
                throw std::invalid_argument("clip '" + c.id + "' has label " + std::to_string(c.label) +
                                            " outside [0, " + std::to_string(task.n_classes) + ")");
        } else {
            if (c.labels.size() != task.n_classes)
                throw std::invalid_argument("clip '" + c.id + "' has " + std::to_string(c.labels.size()) +
                                            " targets for " + std::to_string(task.n_classes) + " classes");
            for (int y : c.labels)
                if (y != 0 && y != 1) throw std::invalid_argument("clip '" + c.id + "' has a non-binary target");
        }
    }
}

std::vector<Prepared> prepare(const encoder::Encoder& enc, const std::vector<LabeledClip>& clips,
                              const TaskSpec& task) {
    num::NoGradGuard ng;
    std::vector<Prepared> out;
    for (const auto& c : clips) {
        const auto [wave, valid] = clip_input(c.wave, task);
        const auto f = enc.features(wave, valid);
        if (f.valid == 0) throw std::invalid_argument("clip '" + c.id + "' is shorter than one encoder frame");
        Prepared p;
        p.frames = f.frames;
        p.valid = f.valid;
        p.label = c.label;
        p.target_ints = c.labels;
        p.targets.assign(c.labels.begin(), c.labels.end());
        out.push_back(std::move(p));
    }
    return out;
}

Tensor loss_from_logits(const TaskSpec& task, const Tensor& z, const Prepared& p) {
    if (task.kind == TaskKind::classification) {
        const int y = p.label;
        return num::cross_entropy(z, std::span<const int>(&y, 1));
    }
    return num::bce_with_logits(z, p.targets);
}

Tensor clip_loss(const FinetunedModel& m, const Prepared& p) {
    return loss_from_logits(m.task(), m.logits_from_frames(p.frames, p.valid), p);
}

struct Scored {
    double metric = 0.0;
    double loss = 0.0;
    std::vector<std::optional<double>> per_class;
};

// Strictly better: higher metric, or equal metric and lower loss.
bool better(const Scored& a, const Scored& b) { return a.metric > b.metric || (a.metric == b.metric && a.loss < b.loss); }

Scored score(const FinetunedModel& m, const std::vector<Prepared>& data) {
    num::NoGradGuard ng;
    const TaskSpec& task = m.task();
    Scored s;
    std::vector<int> preds, labels;
    std::vector<double> scores;
    for (const auto& p : data) {
        const Tensor z = m.logits_from_frames(p.frames, p.valid);
        s.loss += static_cast<double>(loss_from_logits(task, z, p).item());
        if (task.kind == TaskKind::classification) {
            const auto row = z.data();
            preds.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
            labels.push_back(p.label);
        } else {
            const Tensor prob = num::sigmoid(z);
            for (float v : prob.data()) scores.push_back(v);
            labels.insert(labels.end(), p.target_ints.begin(), p.target_ints.end());
        }
    }
    s.loss /= static_cast<double>(data.size());
    if (task.kind == TaskKind::classification) {
        s.metric = accuracy(preds, labels);
    } else {
        const auto r = mean_average_precision(scores, labels, data.size(), task.n_classes);
        s.metric = r.value;
        s.per_class = r.per_class;
    }
    return s;
}

const char* metric_name(const TaskSpec& t) { return t.kind == TaskKind::classification ? "accuracy" : "mAP"; }

struct ArmOutcome {
    FinetunedModel model;
    ArmReport arm;
    Scored best;
};

ArmOutcome train_arm(const num::Checkpoint& pretrained, const std::vector<Prepared>& train,
                     const std::vector<Prepared>& valid, const TaskSpec& task, double lr, const FinetuneConfig& cfg) {
    FinetunedModel model(encoder::Encoder::load(pretrained), task);
    const auto params = model.trainable_params();
    num::AdamW opt(params, cfg.adamw);

    ArmReport arm;
    arm.lr = lr;
    std::vector<std::vector<float>> best_params;
    Scored best;
    bool have_best = false;

    std::vector<std::size_t> order(train.size());
    for (std::size_t e = 1; e <= cfg.epochs; ++e) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto rng = num::make_rng(cfg.seed, {0xf17e, e});
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(num::uniform01(rng) * static_cast<double>(i))]);

        double epoch_loss = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t bn = std::min(cfg.batch_size, order.size() - b0);
            num::GradMap grads;
            for (std::size_t b = 0; b < bn; ++b) {
                const Tensor l = num::scale(clip_loss(model, train[order[b0 + b]]), 1.0f / static_cast<float>(bn));
                epoch_loss += static_cast<double>(l.item()) * static_cast<double>(bn);
                grads.accumulate(num::backward(l));
            }
            opt.step(grads, static_cast<float>(lr));
        }

        EpochRecord rec;
        rec.epoch = e;
        rec.train_loss = epoch_loss / static_cast<double>(train.size());
        if (cfg.track_train_metric) rec.train_metric = score(model, train).metric;
        const Scored v = score(model, valid);
        rec.valid_metric = v.metric;
        rec.valid_loss = v.loss;
        arm.epochs.push_back(rec);
        if (!have_best || better(v, best)) {
            have_best = true;
            best = v;
            arm.best_epoch = e;
            arm.best_valid_metric = v.metric;
            arm.best_valid_loss = v.loss;
            best_params.clear();
            for (const auto& p : params) best_params.push_back(p.tensor.to_vector());
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto t = params[i].tensor;
        std::copy(best_params[i].begin(), best_params[i].end(), t.mutable_data().begin());
    }
    return {std::move(model), std::move(arm), std::move(best)};
}

void check_inputs(const std::vector<LabeledClip>& train, const std::vector<LabeledClip>& valid, const TaskSpec& task,
                  const FinetuneConfig& cfg) {
    auto errs = task.validate();
    for (const auto& e : cfg.validate()) errs.push_back(e);
    if (!errs.empty()) {
        std::string msg = "invalid fine-tuning setup:";
        for (const auto& e : errs) msg += " " + e + ";";
        throw std::invalid_argument(msg);
    }
    check_labels(train, task, "train");
    check_labels(valid, task, "valid");
}

EvalReport report_for(const TaskSpec& task, const ArmOutcome& o) {
    EvalReport r;
    r.metric = metric_name(task);
    r.value = o.best.metric;
    r.per_class_ap = o.best.per_class;
    r.chosen_lr = o.arm.lr;
    r.best_epoch = o.arm.best_epoch;
    r.arms.push_back(o.arm);
    return r;
}

}  // namespace

json EvalReport::to_json() const {
    json per = json::array();
    for (const auto& ap : per_class_ap) per.push_back(ap ? json(*ap) : json(nullptr));
    json arms_j = json::array();
    for (const auto& a : arms) {
        json ep = json::array();
        for (const auto& e : a.epochs)
            ep.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"train_metric", e.train_metric ? json(*e.train_metric) : json(nullptr)},
                          {"valid_metric", e.valid_metric},
                          {"valid_loss", e.valid_loss}});
        arms_j.push_back({{"lr", a.lr},
                          {"best_epoch", a.best_epoch},
                          {"best_valid_metric", a.best_valid_metric},
                          {"best_valid_loss", a.best_valid_loss},
                          {"epochs", ep}});
    }
    return {{"metric", metric},
            {"value", value},
            {"per_class_ap", per},
            {"chosen_lr", chosen_lr ? json(*chosen_lr) : json(nullptr)},
            {"best_epoch", best_epoch ? json(*best_epoch) : json(nullptr)},
            {"arms", arms_j}};
}

FinetuneResult finetune(const num::Checkpoint& pretrained, const std::vector<LabeledClip>& train,
                        const std::vector<LabeledClip>& valid, const TaskSpec& task, double lr,
                        const FinetuneConfig& cfg) {
    auto one = cfg;
    one.lrs = {lr};
    return lr_sweep(pretrained, train, valid, task, one);
}

FinetuneResult lr_sweep(const num::Checkpoint& pretrained, const std::vector<LabeledClip>& train,
                        const std::vector<LabeledClip>& valid, const TaskSpec& task, const FinetuneConfig& cfg) {
    check_inputs(train, valid, task, cfg);
    const auto frontend = encoder::Encoder::load(pretrained);
    const auto tr = prepare(frontend, train, task);
    const auto va = prepare(frontend, valid, task);

    std::optional<ArmOutcome> best;
    std::vector<ArmReport> arms;
    for (double lr : cfg.lrs) {
        auto o = train_arm(pretrained, tr, va, task, lr, cfg);
        arms.push_back(o.arm);
        if (!best || better(o.best, best->best)) best.emplace(std::move(o));
    }
    EvalReport report = report_for(task, *best);
    report.arms = arms;
    return {std::move(best->model), std::move(report)};
}

EvalReport evaluate(const FinetunedModel& model, const std::vector<LabeledClip>& clips) {
    check_labels(clips, model.task(), "evaluation");
    const auto data = prepare(model.encoder(), clips, model.task());
    const Scored s = score(model, data);
    EvalReport r;
    r.metric = metric_name(model.task());
    r.value = s.metric;
    r.per_class_ap = s.per_class;
    return r;
}

}  // namespace bioseq::downstream
