#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tlpmeta/model.hpp"

namespace tlpmeta {

enum class InnerOptKind { AdamW, Sgd };

struct InnerOptimizerConfig {
    InnerOptKind kind = InnerOptKind::AdamW;
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double dropout = 0.1;
};

// Adaptive inner optimizer with decoupled weight decay. One instance is
// shared across all TLPs; its moments live outside the meta parameters
// and are never touched by the meta-step.
class InnerOptimizer {
public:
    InnerOptimizer() = default;
    InnerOptimizer(std::size_t num_params, InnerOptimizerConfig cfg)
        : cfg_(cfg), m_(num_params, 0.0), v_(num_params, 0.0) {}

    const InnerOptimizerConfig& config() const { return cfg_; }
    std::uint64_t step_count() const { return step_; }

    void step(ParameterVector& params, const Gradient& grad) {
        if (grad.size() != params.size() || grad.size() != m_.size())
            throw std::invalid_argument("InnerOptimizer: size mismatch");
        ++step_;
        if (cfg_.kind == InnerOptKind::Sgd) {
            for (std::size_t i = 0; i < grad.size(); ++i) params.values[i] -= cfg_.lr * grad[i];
            return;
        }
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < grad.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            double mhat = m_[i] / bc1;
            double vhat = v_[i] / bc2;
            params.values[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                           cfg_.weight_decay * params.values[i]);
        }
    }

private:
    InnerOptimizerConfig cfg_;
    std::vector<double> m_, v_;
    std::uint64_t step_ = 0;
};

// plain SGD used for the meta-step and the sampler logits
inline void sgd_step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    if (grad.size() != params.size()) throw std::invalid_argument("sgd_step: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

}  // namespace tlpmeta
