#pragma once

#include <cstdint>
#include <functional>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpmeta/data_store.hpp"
#include "tlpmeta/grid.hpp"
#include "tlpmeta/model.hpp"
#include "tlpmeta/optim.hpp"
#include "tlpmeta/sampling.hpp"

namespace tlpmeta {

struct SamplerTraceRow {
    std::size_t iteration = 0;
    std::string tlp;
    double psi = 0.0;
    double prob = 0.0;
    double reward = 0.0;
};

struct InnerLossRow {
    std::size_t iteration = 0;
    std::size_t slot = 0;
    std::string tlp;
    std::size_t step = 0;
    double loss = 0.0;
};

struct MetaConfig {
    std::size_t m = 8;  // TLPs sampled per meta-iteration
    std::size_t k = 3;  // inner gradient steps per TLP
    double beta = 1.0;  // meta step size
    std::size_t epochs = 5;
    std::size_t iterations_per_epoch = 0;  // 0: derive from selected train sizes
    std::size_t batch_size = 8;
    InnerOptimizerConfig inner;
    TlpSelection selection;
    SamplingStrategy strategy = SamplingStrategy::Temperature;
    double tau = 1.0;
    double psi_lr = 0.1;
    std::vector<std::size_t> dev_tlps;  // MultiDDS dev collection (grid TLP indices)
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const {
        if (m < 1 || k < 1) throw std::invalid_argument("MetaConfig: m and k must be >= 1");
        if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("MetaConfig: beta in (0,1]");
        if (strategy == SamplingStrategy::MultiDds && dev_tlps.empty())
            throw std::invalid_argument("MetaConfig: MultiDDS requires a dev-set binding");
        if (strategy == SamplingStrategy::Temperature && !dev_tlps.empty())
            throw std::invalid_argument("MetaConfig: dev binding only valid for MultiDDS");
    }
};

struct MetaResult {
    ParameterVector theta;
    InnerOptimizer optimizer;
    std::vector<SamplerTraceRow> sampler_trace;
    std::vector<InnerLossRow> inner_losses;
    std::size_t iterations = 0;
};

// k successive (sample batch, gradient, optimizer step) updates on one
// TLP starting from a copy of theta; theta itself is never mutated.
inline ParameterVector inner_loop(const Model& model, const DatasetStore& store,
                                  const std::string& tlp_key, std::size_t task_index,
                                  const ParameterVector& theta, std::size_t k,
                                  InnerOptimizer& opt, std::size_t batch_size, Rng& batch_rng,
                                  Rng* mask_rng = nullptr,
                                  std::vector<double>* step_losses = nullptr) {
    ParameterVector p = theta;
    Gradient grad;
    double dropout = mask_rng ? opt.config().dropout : 0.0;
    for (std::size_t step = 0; step < k; ++step) {
        Batch batch = store.sample_train_batch(tlp_key, batch_size, batch_rng);
        double loss = model.gradient(p, task_index, batch, grad, dropout, mask_rng);
        if (step_losses) step_losses->push_back(loss);
        opt.step(p, grad);
    }
    return p;
}

// theta' = theta + (beta/m) * sum_i (theta_i - theta)
inline ParameterVector reptile_step(const ParameterVector& theta,
                                    const std::vector<ParameterVector>& endpoints, double beta) {
    if (endpoints.empty()) throw std::invalid_argument("reptile_step: empty endpoint list");
    ParameterVector out = theta;
    const double scale = beta / static_cast<double>(endpoints.size());
    for (const ParameterVector& e : endpoints) {
        if (e.size() != theta.size()) throw std::invalid_argument("reptile_step: size mismatch");
        for (std::size_t i = 0; i < theta.size(); ++i)
            out.values[i] += scale * (e.values[i] - theta.values[i]);
    }
    return out;
}

namespace detail {

struct SlotResult {
    ParameterVector theta;
    InnerOptimizer opt;
    std::vector<double> losses;
};

}  // namespace detail

// Algorithm: initialize P(i) per strategy; per iteration sample m TLPs,
// run the m inner loops (in parallel when configured; RNG streams are
// pre-assigned per slot so the result is independent of scheduling),
// apply the Reptile step, then under MultiDDS compute cosine rewards
// for every selected TLP against the dev gradient and update psi.
inline MetaResult meta_train(const Model& model, const TlpGrid& grid, const DatasetStore& store,
                             const MetaConfig& cfg,
                             const std::function<void(std::size_t, const ParameterVector&)>&
                                 on_iteration = {}) {
    cfg.validate();
    const std::vector<std::size_t>& sel = cfg.selection.resolved;
    if (sel.empty()) throw std::invalid_argument("meta_train: empty selection");

    // sampling fractions renormalized over the selection
    std::vector<double> q(sel.size());
    std::size_t total = 0;
    for (std::size_t i : sel) total += grid.tlp_size(i);
    for (std::size_t i = 0; i < sel.size(); ++i)
        q[i] = static_cast<double>(grid.tlp_size(sel[i])) / static_cast<double>(total);

    SamplerState sampler = cfg.strategy == SamplingStrategy::Temperature
                               ? SamplerState::temperature(q, cfg.tau)
                               : SamplerState::multidds(q, cfg.psi_lr);

    std::size_t iters_per_epoch = cfg.iterations_per_epoch;
    if (iters_per_epoch == 0) {
        std::size_t consumed = cfg.m * cfg.k * cfg.batch_size;  // expected examples per iteration
        iters_per_epoch = (total + consumed - 1) / consumed;
    }
    const std::size_t iterations = iters_per_epoch * cfg.epochs;

    MetaResult result;
    result.theta = model.init_params(cfg.seed);
    result.optimizer = InnerOptimizer(model.num_params(), cfg.inner);
    result.iterations = iterations;

    std::vector<std::string> keys(sel.size());
    std::vector<std::size_t> task_of(sel.size());
    for (std::size_t i = 0; i < sel.size(); ++i) {
        keys[i] = grid.tlp_name(sel[i]);
        task_of[i] = model.task_index(grid.task_of(sel[i]).name);
    }

    Gradient g_dev, g_train, g_tmp;
    for (std::size_t iter = 0; iter < iterations; ++iter) {
        Rng pick_rng(substream_seed(cfg.seed, "sample-tlps", iter));
        std::vector<std::size_t> picks = sample_tlps(sampler.probs, cfg.m, pick_rng);

        auto run_slot = [&](std::size_t slot) {
            detail::SlotResult r;
            r.opt = result.optimizer;
            Rng batch_rng(substream_seed(cfg.seed, "inner-batch", iter, slot));
            Rng mask_rng(substream_seed(cfg.seed, "dropout", iter, slot));
            Rng* mask = cfg.inner.dropout > 0.0 ? &mask_rng : nullptr;
            std::size_t pick = picks[slot];
            r.theta = inner_loop(model, store, keys[pick], task_of[pick], result.theta, cfg.k,
                                 r.opt, cfg.batch_size, batch_rng, mask, &r.losses);
            return r;
        };

        std::vector<detail::SlotResult> slots(cfg.m);
        if (cfg.threads > 1) {
            std::vector<std::future<detail::SlotResult>> futs;
            futs.reserve(cfg.m);
            for (std::size_t s = 0; s < cfg.m; ++s)
                futs.push_back(std::async(std::launch::async, run_slot, s));
            for (std::size_t s = 0; s < cfg.m; ++s) slots[s] = futs[s].get();
        } else {
            for (std::size_t s = 0; s < cfg.m; ++s) slots[s] = run_slot(s);
        }

        std::vector<ParameterVector> endpoints;
        endpoints.reserve(cfg.m);
        for (std::size_t s = 0; s < cfg.m; ++s) {
            endpoints.push_back(std::move(slots[s].theta));
            for (std::size_t step = 0; step < slots[s].losses.size(); ++step)
                result.inner_losses.push_back(
                    {iter, s, keys[picks[s]], step, slots[s].losses[step]});
        }
        result.theta = reptile_step(result.theta, endpoints, cfg.beta);
        // the optimizer state carried forward is the one advanced by the
        // last-indexed slot, keeping parallel and serial runs identical
        result.optimizer = std::move(slots[cfg.m - 1].opt);

        if (cfg.strategy == SamplingStrategy::MultiDds) {
            // dev gradient at the post-step theta, averaged over dev TLPs
            g_dev.assign(model.num_params(), 0.0);
            for (std::size_t di = 0; di < cfg.dev_tlps.size(); ++di) {
                std::size_t dev_idx = cfg.dev_tlps[di];
                Rng dev_rng(substream_seed(cfg.seed, "dev-batch", iter, dev_idx));
                Batch batch = store.sample_batch(grid.tlp_name(dev_idx), Split::Dev,
                                                 cfg.batch_size, dev_rng);
                model.gradient(result.theta, model.task_index(grid.task_of(dev_idx).name), batch,
                               g_tmp);
                for (std::size_t i = 0; i < g_dev.size(); ++i)
                    g_dev[i] += g_tmp[i] / static_cast<double>(cfg.dev_tlps.size());
            }

            std::vector<double> rewards(sel.size(), 0.0);
            auto reward_of = [&](std::size_t i) {
                Rng rng(substream_seed(cfg.seed, "reward-batch", iter, i));
                Batch batch = store.sample_train_batch(keys[i], cfg.batch_size, rng);
                Gradient g;
                model.gradient(result.theta, task_of[i], batch, g);
                return reward_cosine(g_dev, g);
            };
            if (cfg.threads > 1) {
                std::vector<std::future<double>> futs;
                futs.reserve(sel.size());
                for (std::size_t i = 0; i < sel.size(); ++i)
                    futs.push_back(std::async(std::launch::async, reward_of, i));
                for (std::size_t i = 0; i < sel.size(); ++i) rewards[i] = futs[i].get();
            } else {
                for (std::size_t i = 0; i < sel.size(); ++i) rewards[i] = reward_of(i);
            }

            sampler.apply_rewards(rewards);
            for (std::size_t i = 0; i < sel.size(); ++i)
                result.sampler_trace.push_back(
                    {iter, keys[i], sampler.psi[i], sampler.probs[i], rewards[i]});
        } else {
            for (std::size_t i = 0; i < sel.size(); ++i)
                result.sampler_trace.push_back(
                    {iter, keys[i], std::log(sampler.probs[i]), sampler.probs[i], 0.0});
        }

        if (on_iteration) on_iteration(iter, result.theta);
    }
    return result;
}

// The four MultiDDS dev-set configurations: which TLPs form the train
// selection and which form the dev collection, plus the model name used
// in reports.
struct MddsSetting {
    char label = 'a';
    TlpSelection train;
    std::vector<std::size_t> dev_tlps;
    std::string name;
};

inline MddsSetting resolve_mdds_setting(char label, const TlpGrid& grid,
                                        const std::string& target_task,
                                        const std::string& target_language) {
    MddsSetting s;
    s.label = label;
    std::size_t target = grid.find(target_task, target_language);
    switch (label) {
        case 'a':
            s.train = select_tlps(grid, SelectionMode::LangLimited, target_language);
            if (target == TlpGrid::npos)
                throw std::invalid_argument("resolve_mdds_setting: target TLP not in grid");
            s.dev_tlps = {target};
            s.name = "mDDS";
            break;
        case 'b':
            s.train = select_tlps(grid, SelectionMode::TaskLimited, target_task);
            if (target == TlpGrid::npos)
                throw std::invalid_argument("resolve_mdds_setting: target TLP not in grid");
            s.dev_tlps = {target};
            s.name = "mDDS";
            break;
        case 'c':
            s.train = select_tlps(grid, SelectionMode::All);
            s.dev_tlps = select_tlps(grid, SelectionMode::LangLimited, target_language).resolved;
            s.name = "mDDS-Lang";
            break;
        case 'd':
            s.train = select_tlps(grid, SelectionMode::All);
            s.dev_tlps = select_tlps(grid, SelectionMode::TaskLimited, target_task).resolved;
            s.name = "mDDS-Task";
            break;
        default:
            throw std::invalid_argument(std::string("resolve_mdds_setting: unknown label '") +
                                        label + "'");
    }
    return s;
}

}  // namespace tlpmeta
