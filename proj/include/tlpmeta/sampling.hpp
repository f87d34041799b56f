#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "tlpmeta/rng.hpp"

namespace tlpmeta {

constexpr double kInfiniteTau = std::numeric_limits<double>::infinity();

// P(i) = q_i^(1/tau) / sum_k q_k^(1/tau); tau = 1 is proportional
// sampling, tau = infinity is uniform. tau below 1 is rejected.
inline std::vector<double> temperature_probs(const std::vector<double>& q, double tau) {
    if (q.empty()) throw std::invalid_argument("temperature_probs: empty q");
    if (!(tau >= 1.0)) throw std::invalid_argument("temperature_probs: tau must be >= 1");
    if (tau == 1.0) return q;
    std::vector<double> p(q.size());
    if (std::isinf(tau)) {
        double u = 1.0 / static_cast<double>(q.size());
        for (double& v : p) v = u;
        return p;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] > 0.0)) throw std::invalid_argument("temperature_probs: q must be positive");
        p[i] = std::exp(std::log(q[i]) / tau);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

// Sampler logits whose softmax reproduces q exactly: psi_i = log q_i.
inline std::vector<double> init_psi(const std::vector<double>& q) {
    std::vector<double> psi(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] > 0.0)) throw std::invalid_argument("init_psi: q must be strictly positive");
        psi[i] = std::log(q[i]);
    }
    return psi;
}

inline std::vector<double> softmax_probs(const std::vector<double>& psi) {
    if (psi.empty()) throw std::invalid_argument("softmax_probs: empty input");
    double mx = psi[0];
    for (double v : psi) mx = std::max(mx, v);
    std::vector<double> p(psi.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        p[i] = std::exp(psi[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

// Cosine similarity between the dev gradient and a TLP's train gradient.
// A zero vector on either side yields a neutral reward of 0.
inline double reward_cosine(const std::vector<double>& g_dev, const std::vector<double>& g_train) {
    if (g_dev.size() != g_train.size()) throw std::invalid_argument("reward_cosine: size mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < g_dev.size(); ++i) {
        dot += g_dev[i] * g_train[i];
        na += g_dev[i] * g_dev[i];
        nb += g_train[i] * g_train[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// REINFORCE ascent on the sampler logits: for rewards over all TLPs,
// d_psi_j = sum_i R_i * ([i == j] - P(j)) and psi' = psi + lr * d_psi.
inline std::vector<double> reinforce_update(const std::vector<double>& psi,
                                            const std::vector<double>& rewards, double lr) {
    if (rewards.size() != psi.size())
        throw std::invalid_argument("reinforce_update: reward vector length mismatch");
    std::vector<double> probs = softmax_probs(psi);
    double total = 0.0;
    for (double r : rewards) total += r;
    std::vector<double> out(psi.size());
    for (std::size_t j = 0; j < psi.size(); ++j)
        out[j] = psi[j] + lr * (rewards[j] - probs[j] * total);
    return out;
}

// m i.i.d. categorical draws with replacement
inline std::vector<std::size_t> sample_tlps(const std::vector<double>& probs, std::size_t m,
                                            Rng& rng) {
    if (probs.empty()) throw std::invalid_argument("sample_tlps: empty probability vector");
    std::vector<std::size_t> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = rng.categorical(probs);
    return out;
}

enum class SamplingStrategy { Temperature, MultiDds };

struct SamplerState {
    SamplingStrategy strategy = SamplingStrategy::Temperature;
    double tau = 1.0;
    double psi_lr = 0.1;
    std::vector<double> psi;    // MultiDDS only
    std::vector<double> probs;  // current P(i) over selected TLPs

    static SamplerState temperature(const std::vector<double>& q, double tau) {
        SamplerState s;
        s.strategy = SamplingStrategy::Temperature;
        s.tau = tau;
        s.probs = temperature_probs(q, tau);
        return s;
    }

    static SamplerState multidds(const std::vector<double>& q, double psi_lr) {
        SamplerState s;
        s.strategy = SamplingStrategy::MultiDds;
        s.psi_lr = psi_lr;
        s.psi = init_psi(q);
        s.probs = softmax_probs(s.psi);
        return s;
    }

    void apply_rewards(const std::vector<double>& rewards) {
        if (strategy != SamplingStrategy::MultiDds)
            throw std::logic_error("apply_rewards: sampler is not MultiDDS");
        psi = reinforce_update(psi, rewards, psi_lr);
        probs = softmax_probs(psi);
    }
};

}  // namespace tlpmeta
