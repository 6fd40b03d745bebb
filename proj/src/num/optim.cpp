#include "bioseq/num/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bioseq/num/checkpoint.hpp"

namespace bioseq::num {

AdamW::AdamW(ParamList params, AdamWConfig config) : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0f);
        v_.emplace_back(p.tensor.numel(), 0.0f);
    }
}

void AdamW::step(const GradMap& grads, float lr) {
    for (const auto& p : params_) {
        const Buffer* g = grads.find(p.tensor);
        if (g == nullptr) continue;
        for (std::size_t i = 0; i < g->size(); ++i) {
            if (!std::isfinite((*g)[i])) {
                throw std::runtime_error("optimizer: non-finite gradient in parameter '" + p.name + "' at element " +
                                         std::to_string(i));
            }
        }
    }
    ++step_;
    const float b1 = config_.beta1, b2 = config_.beta2;
    const float bc1 = 1.0f - static_cast<float>(std::pow(static_cast<double>(b1), static_cast<double>(step_)));
    const float bc2 = 1.0f - static_cast<float>(std::pow(static_cast<double>(b2), static_cast<double>(step_)));
    const float decay = 1.0f - lr * config_.weight_decay;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto w = params_[k].tensor.mutable_data();
        const Buffer* g = grads.find(params_[k].tensor);
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const float gi = g ? (*g)[i] : 0.0f;
            m[i] = b1 * m[i] + (1.0f - b1) * gi;
            v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
            const float mhat = m[i] / bc1;
            const float vhat = v[i] / bc2;
            w[i] = w[i] * decay - lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

void AdamW::save_state(Checkpoint& ckpt) const {
    ckpt.put_i64("opt.step", {step_});
    for (std::size_t k = 0; k < params_.size(); ++k) {
        ckpt.put_f32("opt.m." + params_[k].name, params_[k].tensor.shape(), m_[k]);
        ckpt.put_f32("opt.v." + params_[k].name, params_[k].tensor.shape(), v_[k]);
    }
}

void AdamW::load_state(const Checkpoint& ckpt) {
    step_ = ckpt.get_i64("opt.step").at(0);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto m = ckpt.get_f32("opt.m." + params_[k].name);
        auto v = ckpt.get_f32("opt.v." + params_[k].name);
        if (m.size() != m_[k].size() || v.size() != v_[k].size()) {
            throw std::runtime_error("optimizer state shape mismatch for '" + params_[k].name + "'");
        }
        m_[k] = std::move(m);
        v_[k] = std::move(v);
    }
}

LinearWarmupDecay::LinearWarmupDecay(double peak_lr, std::int64_t total_steps, double warmup_fraction)
    : peak_(peak_lr), total_(total_steps), warmup_(std::llround(warmup_fraction * static_cast<double>(total_steps))) {
    if (total_steps <= 0) throw std::invalid_argument("schedule: total_steps must be positive");
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
        throw std::invalid_argument("schedule: warmup_fraction must be in [0, 1)");
    }
}

double LinearWarmupDecay::at(std::int64_t step) const {
    if (step <= 0) return warmup_ == 0 ? peak_ : 0.0;
    if (step < warmup_) return peak_ * static_cast<double>(step) / static_cast<double>(warmup_);
    if (step >= total_) return 0.0;
    return peak_ * static_cast<double>(total_ - step) / static_cast<double>(total_ - warmup_);
}

}  // namespace bioseq::num
