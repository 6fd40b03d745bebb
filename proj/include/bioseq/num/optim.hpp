#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bioseq/num/tensor.hpp"

namespace bioseq::num {

class Checkpoint;

struct NamedParam {
    std::string name;
    Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

// Declared defaults; the training recipe only asks for gradient descent.
struct AdamWConfig {
    float beta1 = 0.9f;
    float beta2 = 0.98f;
    float eps = 1e-6f;
    float weight_decay = 0.01f;
};

// AdamW with decoupled weight decay. Moment buffers are parallel to the
// parameter list given at construction.
class AdamW {
public:
    AdamW(ParamList params, AdamWConfig config = {});

    // Applies one update. Parameters absent from grads are treated as having
    // zero gradient. Throws std::runtime_error naming the parameter if any
    // gradient is non-finite; parameters are left untouched in that case.
    void step(const GradMap& grads, float lr);

    std::int64_t steps_taken() const { return step_; }
    const AdamWConfig& config() const { return config_; }
    const ParamList& params() const { return params_; }

    // Moments and step counter under "opt.*" entries.
    void save_state(Checkpoint& ckpt) const;
    void load_state(const Checkpoint& ckpt);

private:
    ParamList params_;
    AdamWConfig config_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    std::int64_t step_ = 0;
};

// Linear warmup to peak over the first warmup_fraction of steps, then linear
// decay to zero at total_steps.
class LinearWarmupDecay {
public:
    LinearWarmupDecay(double peak_lr, std::int64_t total_steps, double warmup_fraction = 0.05);

    double at(std::int64_t step) const;
    std::int64_t warmup_steps() const { return warmup_; }
    std::int64_t total_steps() const { return total_; }
    double peak() const { return peak_; }

private:
    double peak_;
    std::int64_t total_;
    std::int64_t warmup_;
};

}  // namespace bioseq::num
