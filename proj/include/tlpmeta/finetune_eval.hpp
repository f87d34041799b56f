#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpmeta/data_store.hpp"
#include "tlpmeta/grid.hpp"
#include "tlpmeta/model.hpp"
#include "tlpmeta/optim.hpp"

namespace tlpmeta {

struct EvalReport {
    std::string tlp;
    Split split = Split::Dev;
    MetricKind metric = MetricKind::Accuracy;
    double value = 0.0;
    std::size_t examples = 0;
    bool zero_shot = false;
};

struct FinetuneConfig {
    double lr_large = 1e-2;
    double lr_small = 1e-3;
    std::size_t epochs_shallow = 10;
    std::size_t epochs_deep = 5;
    std::size_t batch_size = 8;
    double weight_decay = 0.01;
    double dropout = 0.1;
    std::uint64_t seed = 0;
};

struct BaselineConfig {
    double lr = 1e-2;
    std::size_t epochs_shallow = 10;
    std::size_t epochs_deep = 5;
    std::size_t batch_size = 8;
    double weight_decay = 0.01;
    double dropout = 0.1;
    std::uint64_t seed = 0;
};

struct MtlConfig {
    double lr = 1e-2;
    std::size_t epochs = 5;  // over the concatenation
    std::size_t batch_size = 8;
    double weight_decay = 0.01;
    double dropout = 0.1;
    std::uint64_t seed = 0;
};

inline EvalReport evaluate(const Model& model, const DatasetStore& store,
                           const ParameterVector& params, const std::string& tlp_key,
                           const TaskId& task, Split split) {
    Batch batch = store.full_split(tlp_key, split);
    if (batch.empty()) throw std::invalid_argument("evaluate: empty split for " + tlp_key);
    std::size_t task_idx = model.task_index(task.name);

    EvalReport report;
    report.tlp = tlp_key;
    report.split = split;
    report.metric = task.metric;
    report.examples = batch.size();

    // F1 counts treat any nonzero label as the positive class
    std::size_t correct = 0, total = 0, tp = 0, fp = 0, fn = 0;
    auto tally = [&](int pred, int truth) {
        ++total;
        if (pred == truth) ++correct;
        if (pred != 0 && truth != 0) ++tp;
        if (pred != 0 && truth == 0) ++fp;
        if (pred == 0 && truth != 0) ++fn;
    };

    for (const Example* ex : batch) {
        switch (task.target) {
            case TargetKind::TokenClasses: {
                std::vector<int> preds = model.predict_token_labels(params, task_idx, *ex);
                for (std::size_t t = 0; t < ex->length; ++t) tally(preds[t], ex->token_labels[t]);
                break;
            }
            case TargetKind::SequenceClass:
                tally(model.predict_sequence_label(params, task_idx, *ex), ex->label);
                break;
            case TargetKind::SequenceValue: {
                // threshold accuracy for regression targets
                double yhat = model.predict_sequence_value(params, task_idx, *ex);
                ++total;
                if (std::abs(yhat - ex->target) < 0.25) ++correct;
                break;
            }
        }
    }

    if (task.metric == MetricKind::F1) {
        double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        report.value = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall)
                                                : 0.0;
    } else {
        report.value = static_cast<double>(correct) / static_cast<double>(total);
    }
    return report;
}

namespace detail {

// epochs of AdamW updates over one TLP's train split, batches drawn with
// replacement, one optimizer step per batch
inline ParameterVector train_on_tlp(const Model& model, const DatasetStore& store,
                                    const std::string& tlp_key, const TaskId& task,
                                    ParameterVector params, double lr, std::size_t epochs,
                                    std::size_t batch_size, double weight_decay, double dropout,
                                    std::uint64_t seed) {
    std::size_t task_idx = model.task_index(task.name);
    std::size_t n = store.train_size(tlp_key);
    std::size_t steps_per_epoch = (n + batch_size - 1) / batch_size;
    InnerOptimizerConfig ocfg;
    ocfg.lr = lr;
    ocfg.weight_decay = weight_decay;
    ocfg.dropout = dropout;
    InnerOptimizer opt(model.num_params(), ocfg);
    Rng batch_rng(substream_seed(seed, "ft-batch", hash_label(tlp_key)));
    Rng mask_rng(substream_seed(seed, "ft-dropout", hash_label(tlp_key)));
    Gradient grad;
    for (std::size_t e = 0; e < epochs; ++e) {
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            Batch batch = store.sample_train_batch(tlp_key, batch_size, batch_rng);
            model.gradient(params, task_idx, batch, grad, dropout,
                           dropout > 0.0 ? &mask_rng : nullptr);
            opt.step(params, grad);
        }
    }
    return params;
}

}  // namespace detail

struct FinetuneResult {
    ParameterVector params;
    double chosen_lr = 0.0;
    EvalReport dev_report;
};

// Trains both learning-rate candidates from theta* and keeps the one
// with the better dev metric; ties go to the smaller rate.
inline FinetuneResult finetune(const Model& model, const DatasetStore& store,
                               const ParameterVector& theta, const std::string& tlp_key,
                               const TaskId& task, const FinetuneConfig& cfg) {
    std::size_t epochs = task.kind == TaskKind::Shallow ? cfg.epochs_shallow : cfg.epochs_deep;
    FinetuneResult r;
    if (epochs == 0) {
        r.params = theta;
        r.chosen_lr = cfg.lr_small;
        r.dev_report = evaluate(model, store, theta, tlp_key, task, Split::Dev);
        return r;
    }
    ParameterVector big = detail::train_on_tlp(model, store, tlp_key, task, theta, cfg.lr_large,
                                               epochs, cfg.batch_size, cfg.weight_decay,
                                               cfg.dropout, substream_seed(cfg.seed, "ft-large"));
    ParameterVector small = detail::train_on_tlp(model, store, tlp_key, task, theta, cfg.lr_small,
                                                 epochs, cfg.batch_size, cfg.weight_decay,
                                                 cfg.dropout, substream_seed(cfg.seed, "ft-small"));
    EvalReport big_report = evaluate(model, store, big, tlp_key, task, Split::Dev);
    EvalReport small_report = evaluate(model, store, small, tlp_key, task, Split::Dev);
    if (big_report.value > small_report.value) {
        r.params = std::move(big);
        r.chosen_lr = cfg.lr_large;
        r.dev_report = big_report;
    } else {
        r.params = std::move(small);
        r.chosen_lr = cfg.lr_small;
        r.dev_report = small_report;
    }
    return r;
}

// Evaluates theta* directly on a TLP whose language never appeared in
// training; no fine-tuning happens here.
inline EvalReport zero_shot_eval(const Model& model, const DatasetStore& store,
                                 const ParameterVector& theta, const std::string& tlp_key,
                                 const TaskId& task, const std::string& external_language,
                                 const std::vector<std::string>& training_languages,
                                 Split split = Split::Test) {
    for (const std::string& lang : training_languages)
        if (lang == external_language)
            throw std::invalid_argument("zero_shot_eval: language '" + external_language +
                                        "' was in the training selection");
    EvalReport report = evaluate(model, store, theta, tlp_key, task, split);
    report.zero_shot = true;
    return report;
}

// single-TLP baseline from a fresh random init
inline ParameterVector train_baseline(const Model& model, const DatasetStore& store,
                                      const std::string& tlp_key, const TaskId& task,
                                      const BaselineConfig& cfg) {
    ParameterVector init =
        model.init_params(substream_seed(cfg.seed, "baseline-init", hash_label(tlp_key)));
    std::size_t epochs = task.kind == TaskKind::Shallow ? cfg.epochs_shallow : cfg.epochs_deep;
    return detail::train_on_tlp(model, store, tlp_key, task, std::move(init), cfg.lr, epochs,
                                cfg.batch_size, cfg.weight_decay, cfg.dropout,
                                substream_seed(cfg.seed, "baseline", hash_label(tlp_key)));
}

// MTL baseline: per epoch, every selected TLP's train split is cut into
// batches and the combined batch list is shuffled, so the stream
// interleaves TLPs in proportion to their sizes.
inline ParameterVector train_mtl_baseline(const Model& model, const TlpGrid& grid,
                                          const DatasetStore& store, const TlpSelection& selection,
                                          const MtlConfig& cfg) {
    if (selection.resolved.empty()) throw std::invalid_argument("train_mtl_baseline: empty selection");
    ParameterVector params = model.init_params(substream_seed(cfg.seed, "mtl-init"));
    InnerOptimizerConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    ocfg.dropout = cfg.dropout;
    InnerOptimizer opt(model.num_params(), ocfg);
    Rng mask_rng(substream_seed(cfg.seed, "mtl-dropout"));
    Gradient grad;

    auto shuffle = [](std::vector<std::size_t>& v, Rng& rng) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng.uniform_index(i)]);
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        struct MtlBatch {
            std::size_t tlp;  // grid index
            std::vector<std::size_t> idxs;
        };
        std::vector<MtlBatch> batches;
        for (std::size_t tlp : selection.resolved) {
            std::string key = grid.tlp_name(tlp);
            std::vector<std::size_t> idxs(store.train_size(key));
            for (std::size_t i = 0; i < idxs.size(); ++i) idxs[i] = i;
            Rng rng(substream_seed(cfg.seed, "mtl-shuffle", epoch, tlp));
            shuffle(idxs, rng);
            for (std::size_t off = 0; off < idxs.size(); off += cfg.batch_size) {
                MtlBatch b;
                b.tlp = tlp;
                for (std::size_t i = off; i < std::min(off + cfg.batch_size, idxs.size()); ++i)
                    b.idxs.push_back(idxs[i]);
                batches.push_back(std::move(b));
            }
        }
        std::vector<std::size_t> order(batches.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng order_rng(substream_seed(cfg.seed, "mtl-order", epoch));
        shuffle(order, order_rng);

        for (std::size_t bi : order) {
            const MtlBatch& b = batches[bi];
            std::string key = grid.tlp_name(b.tlp);
            Batch batch = store.train_subset(key, b.idxs);
            std::size_t task_idx = model.task_index(grid.task_of(b.tlp).name);
            model.gradient(params, task_idx, batch, grad, cfg.dropout,
                           cfg.dropout > 0.0 ? &mask_rng : nullptr);
            opt.step(params, grad);
        }
    }
    return params;
}

}  // namespace tlpmeta
