#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tsrnet/layers.hpp"
#include "tsrnet/tensor.hpp"

namespace tsrnet {

// Half-cosine decay from base_lr to 0 over the full run.
inline double cosine_lr(long step, long total_steps, double base_lr) {
    if (total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
    if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step out of range");
    return 0.5 * base_lr * (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                           static_cast<double>(total_steps)));
}

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
};

// Decoupled-weight-decay Adam. Moment slots are keyed by position in the
// parameter registry, which is stable for a given network.
class AdamW {
public:
    explicit AdamW(const AdamWConfig& cfg = {}) : cfg_(cfg) {}

    long step_count() const { return t_; }

    void step(std::vector<ParamRef>& params, double lr) {
        ensure_state(params);
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i].learnable) continue;
            if (!params[i].grad->all_finite())
                throw std::runtime_error("AdamW: non-finite gradient in " + params[i].name);
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i].learnable) continue;
            Tensor& p = *params[i].value;
            const Tensor& g = *params[i].grad;
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                p[j] *= 1.0 - lr * cfg_.weight_decay;   // decoupled decay first
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

private:
    void ensure_state(const std::vector<ParamRef>& params) {
        if (!m_.empty()) return;
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i].learnable) continue;
            m_[i] = Tensor(params[i].value->shape());
            v_[i] = Tensor(params[i].value->shape());
        }
    }

    AdamWConfig cfg_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

} // namespace tsrnet
