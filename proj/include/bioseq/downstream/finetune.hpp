#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioseq/downstream/metrics.hpp"
#include "bioseq/encoder/encoder.hpp"
#include "bioseq/num/optim.hpp"

namespace bioseq::downstream {

using num::Tensor;

enum class TaskKind { classification, detection };

const char* to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

struct TaskSpec {
    TaskKind kind = TaskKind::classification;
    std::size_t n_classes = 2;
    double max_seconds = 0.0;  // longer clips are center-cropped; 0 keeps them whole
    double pad_seconds = 0.0;  // shorter clips are zero-padded to this; pooling skips the pad

    std::vector<std::string> validate() const;
};

nlohmann::json to_json(const TaskSpec& t);
TaskSpec task_spec_from_json(const nlohmann::json& j, const TaskSpec& defaults = {});

struct LabeledClip {
    std::string id;
    signal::Waveform wave;
    int label = 0;            // classification
    std::vector<int> labels;  // detection, one 0/1 per class
};

std::vector<LabeledClip> load_labeled_clips(const std::filesystem::path& manifest);

// Crop/pad per the task; returns the tensor [L,1] and the count of real samples.
std::pair<Tensor, std::size_t> clip_input(const signal::Waveform& w, const TaskSpec& task);

// Frozen-frontend encoder plus one linear layer on the mean of the valid frames.
class FinetunedModel {
public:
    FinetunedModel(encoder::Encoder enc, TaskSpec task);

    const encoder::Encoder& encoder() const { return enc_; }
    const TaskSpec& task() const { return task_; }

    // Pooled encoding [1,d] of precomputed frontend frames.
    Tensor pooled(const Tensor& frames, std::size_t valid_frames) const;
    Tensor logits_from_frames(const Tensor& frames, std::size_t valid_frames) const;
    Tensor logits(const signal::Waveform& w) const;
    // Softmax probabilities for classification, per-class sigmoids for detection.
    std::vector<double> predict(const signal::Waveform& w) const;

    // Layer stack and head; the frontend is excluded.
    num::ParamList trainable_params() const;

    // Encoder entries plus "head.w", "head.b" and config()["task"].
    void save(num::Checkpoint& ckpt) const;
    static FinetunedModel load(const num::Checkpoint& ckpt);

private:
    encoder::Encoder enc_;
    TaskSpec task_;
    Tensor head_w_;
    Tensor head_b_;
};

struct FinetuneConfig {
    std::vector<double> lrs{1e-5, 5e-5, 1e-4};
    std::size_t epochs = 50;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    bool track_train_metric = true;
    num::AdamWConfig adamw;

    std::vector<std::string> validate() const;
};

nlohmann::json to_json(const FinetuneConfig& c);
FinetuneConfig finetune_config_from_json(const nlohmann::json& j, const FinetuneConfig& defaults = {});

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> train_metric;
    double valid_metric = 0.0;
    double valid_loss = 0.0;
};

struct ArmReport {
    double lr = 0.0;
    std::size_t best_epoch = 0;
    double best_valid_metric = 0.0;
    double best_valid_loss = 0.0;
    std::vector<EpochRecord> epochs;
};

struct EvalReport {
    std::string metric;  // "accuracy" or "mAP"
    double value = 0.0;
    std::vector<std::optional<double>> per_class_ap;
    std::optional<double> chosen_lr;
    std::optional<std::size_t> best_epoch;
    std::vector<ArmReport> arms;

    nlohmann::json to_json() const;
};

struct FinetuneResult {
    FinetunedModel model;  // parameters of the best validation epoch
    EvalReport report;
};

// One constant-LR arm. Frontend weights are never updated.
FinetuneResult finetune(const num::Checkpoint& pretrained, const std::vector<LabeledClip>& train,
                        const std::vector<LabeledClip>& valid, const TaskSpec& task, double lr,
                        const FinetuneConfig& cfg);

// finetune per LR in cfg.lrs. The best validation metric wins; equal metrics
// are split by lower validation loss, then by the earlier LR in the list. The
// same ordering picks the epoch within an arm.
FinetuneResult lr_sweep(const num::Checkpoint& pretrained, const std::vector<LabeledClip>& train,
                        const std::vector<LabeledClip>& valid, const TaskSpec& task, const FinetuneConfig& cfg);

// Task metric of a model on a labeled split.
EvalReport evaluate(const FinetunedModel& model, const std::vector<LabeledClip>& clips);

}  // namespace bioseq::downstream
