#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpmeta/grid.hpp"
#include "tlpmeta/rng.hpp"
#include "tlpmeta/synth.hpp"

namespace tlpmeta {

struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

// Flat parameter array with a named segment table (shared encoder plus
// one head per task). The table partitions the array exactly.
struct ParameterVector {
    std::vector<double> values;
    std::shared_ptr<const std::vector<Segment>> segments;

    std::size_t size() const { return values.size(); }

    const Segment& segment(const std::string& name) const {
        for (const Segment& s : *segments)
            if (s.name == name) return s;
        throw std::invalid_argument("unknown parameter segment: " + name);
    }
};

using Gradient = std::vector<double>;

struct ModelSpec {
    std::size_t d_in = 8;
    std::size_t hidden1 = 16;
    std::size_t hidden2 = 16;
};

using Batch = std::vector<const Example*>;

// Two-layer tanh encoder shared across tasks, with a linear head per
// task: per-token logits for token-level tasks, logits or a scalar on
// the mean-pooled encoding for sequence-level tasks.
class Model {
public:
    Model(ModelSpec spec, std::vector<TaskId> tasks)
        : spec_(spec), tasks_(std::move(tasks)) {
        auto segs = std::make_shared<std::vector<Segment>>();
        std::size_t off = 0;
        encoder_size_ = spec_.hidden1 * spec_.d_in + spec_.hidden1 +
                        spec_.hidden2 * spec_.hidden1 + spec_.hidden2;
        segs->push_back({"encoder", off, encoder_size_});
        off += encoder_size_;
        for (const TaskId& t : tasks_) {
            std::size_t outputs = t.target == TargetKind::SequenceValue
                                      ? 1
                                      : static_cast<std::size_t>(t.num_classes);
            std::size_t sz = outputs * spec_.hidden2 + outputs;
            head_offsets_.push_back(off);
            segs->push_back({"head:" + t.name, off, sz});
            off += sz;
        }
        num_params_ = off;
        segments_ = std::move(segs);
    }

    const ModelSpec& spec() const { return spec_; }
    const std::vector<TaskId>& tasks() const { return tasks_; }
    std::size_t num_params() const { return num_params_; }
    std::shared_ptr<const std::vector<Segment>> segments() const { return segments_; }

    std::size_t task_index(const std::string& name) const {
        for (std::size_t i = 0; i < tasks_.size(); ++i)
            if (tasks_[i].name == name) return i;
        throw std::invalid_argument("model has no task " + name);
    }

    ParameterVector init_params(std::uint64_t seed) const {
        Rng rng(substream_seed(seed, "init"));
        ParameterVector p;
        p.segments = segments_;
        p.values.resize(num_params_);
        std::size_t off = 0;
        auto fill = [&](std::size_t rows, std::size_t cols) {
            double scale = 1.0 / std::sqrt(static_cast<double>(cols));
            for (std::size_t i = 0; i < rows * cols; ++i) p.values[off++] = scale * rng.normal();
            for (std::size_t i = 0; i < rows; ++i) p.values[off++] = 0.0;  // biases
        };
        fill(spec_.hidden1, spec_.d_in);
        fill(spec_.hidden2, spec_.hidden1);
        for (const TaskId& t : tasks_) {
            std::size_t outputs = t.target == TargetKind::SequenceValue
                                      ? 1
                                      : static_cast<std::size_t>(t.num_classes);
            fill(outputs, spec_.hidden2);
        }
        return p;
    }

    double forward_loss(const ParameterVector& params, std::size_t task, const Batch& batch) const {
        return run(params, task, batch, nullptr, 0.0, nullptr);
    }

    // Mean-loss gradient via analytic backprop. `grad` is resized and
    // zeroed; segments of uninvolved heads stay exactly zero. Dropout
    // (inverted, applied to both hidden layers) is active only when a
    // mask RNG is supplied.
    double gradient(const ParameterVector& params, std::size_t task, const Batch& batch,
                    Gradient& grad, double dropout = 0.0, Rng* mask_rng = nullptr) const {
        grad.assign(num_params_, 0.0);
        return run(params, task, batch, &grad, dropout, mask_rng);
    }

    // argmax predictions used by evaluation; no dropout
    std::vector<int> predict_token_labels(const ParameterVector& params, std::size_t task,
                                          const Example& ex) const;
    int predict_sequence_label(const ParameterVector& params, std::size_t task,
                               const Example& ex) const;
    double predict_sequence_value(const ParameterVector& params, std::size_t task,
                                  const Example& ex) const;

private:
    struct Views {
        const double* w1;
        const double* b1;
        const double* w2;
        const double* b2;
        const double* wh;
        const double* bh;
        std::size_t head_off;
        std::size_t outputs;
    };

    Views views(const ParameterVector& params, std::size_t task) const {
        if (task >= tasks_.size()) throw std::out_of_range("bad task index");
        if (params.size() != num_params_) throw std::invalid_argument("parameter size mismatch");
        const TaskId& t = tasks_[task];
        Views v{};
        const double* base = params.values.data();
        v.w1 = base;
        v.b1 = v.w1 + spec_.hidden1 * spec_.d_in;
        v.w2 = v.b1 + spec_.hidden1;
        v.b2 = v.w2 + spec_.hidden2 * spec_.hidden1;
        v.head_off = head_offsets_[task];
        v.wh = base + v.head_off;
        v.outputs = t.target == TargetKind::SequenceValue ? 1
                                                          : static_cast<std::size_t>(t.num_classes);
        v.bh = v.wh + v.outputs * spec_.hidden2;
        return v;
    }

    // forward pass, optionally with backprop into *grad
    double run(const ParameterVector& params, std::size_t task, const Batch& batch,
               Gradient* grad, double dropout, Rng* mask_rng) const;

    void encode_token(const Views& v, const double* x, double* h1, double* h2) const {
        const std::size_t d = spec_.d_in, n1 = spec_.hidden1, n2 = spec_.hidden2;
        for (std::size_t i = 0; i < n1; ++i) {
            double a = v.b1[i];
            for (std::size_t j = 0; j < d; ++j) a += v.w1[i * d + j] * x[j];
            h1[i] = std::tanh(a);
        }
        for (std::size_t i = 0; i < n2; ++i) {
            double a = v.b2[i];
            for (std::size_t j = 0; j < n1; ++j) a += v.w2[i * n1 + j] * h1[j];
            h2[i] = std::tanh(a);
        }
    }

    ModelSpec spec_;
    std::vector<TaskId> tasks_;
    std::vector<std::size_t> head_offsets_;
    std::size_t encoder_size_ = 0;
    std::size_t num_params_ = 0;
    std::shared_ptr<const std::vector<Segment>> segments_;
};

namespace detail {

inline void softmax_inplace(std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

}  // namespace detail

inline double Model::run(const ParameterVector& params, std::size_t task, const Batch& batch,
                         Gradient* grad, double dropout, Rng* mask_rng) const {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const Views v = views(params, task);
    const TaskId& t = tasks_[task];
    const std::size_t d = spec_.d_in, n1 = spec_.hidden1, n2 = spec_.hidden2;
    const bool drop = grad != nullptr && dropout > 0.0 && mask_rng != nullptr;
    const double keep = 1.0 - dropout;

    double* gw1 = nullptr;
    double* gb1 = nullptr;
    double* gw2 = nullptr;
    double* gb2 = nullptr;
    double* gwh = nullptr;
    double* gbh = nullptr;
    if (grad) {
        double* base = grad->data();
        gw1 = base;
        gb1 = gw1 + n1 * d;
        gw2 = gb1 + n1;
        gb2 = gw2 + n2 * n1;
        gwh = base + v.head_off;
        gbh = gwh + v.outputs * n2;
    }

    double total_loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    std::vector<double> h1, h2, m1, m2, logits, dh2, pool, dpool;
    for (const Example* exp : batch) {
        const Example& ex = *exp;
        if (ex.tokens.size() != ex.length * d)
            throw std::invalid_argument("example dimension mismatch");
        const std::size_t len = ex.length;
        h1.assign(len * n1, 0.0);
        h2.assign(len * n2, 0.0);
        if (drop) {
            m1.resize(len * n1);
            m2.resize(len * n2);
            for (double& m : m1) m = mask_rng->uniform01() < keep ? 1.0 / keep : 0.0;
            for (double& m : m2) m = mask_rng->uniform01() < keep ? 1.0 / keep : 0.0;
        }

        for (std::size_t tk = 0; tk < len; ++tk) {
            encode_token(v, &ex.tokens[tk * d], &h1[tk * n1], &h2[tk * n2]);
            if (drop) {
                for (std::size_t i = 0; i < n1; ++i) h1[tk * n1 + i] *= m1[tk * n1 + i];
                for (std::size_t i = 0; i < n2; ++i) h2[tk * n2 + i] *= m2[tk * n2 + i];
            }
        }
        // note: with dropout, h1/h2 hold post-mask values; tanh' uses the
        // pre-mask activation, reconstructed below through the mask factor.

        dh2.assign(len * n2, 0.0);
        double ex_loss = 0.0;

        switch (t.target) {
            case TargetKind::TokenClasses: {
                if (ex.token_labels.size() != len)
                    throw std::invalid_argument("token label arity mismatch");
                const double inv_len = 1.0 / static_cast<double>(len);
                logits.resize(v.outputs);
                for (std::size_t tk = 0; tk < len; ++tk) {
                    for (std::size_t c = 0; c < v.outputs; ++c) {
                        double a = v.bh[c];
                        for (std::size_t j = 0; j < n2; ++j) a += v.wh[c * n2 + j] * h2[tk * n2 + j];
                        logits[c] = a;
                    }
                    detail::softmax_inplace(logits);
                    int y = ex.token_labels[tk];
                    ex_loss -= std::log(std::max(logits[static_cast<std::size_t>(y)], 1e-300)) * inv_len;
                    if (grad) {
                        for (std::size_t c = 0; c < v.outputs; ++c) {
                            double dl = (logits[c] - (static_cast<int>(c) == y ? 1.0 : 0.0)) *
                                        inv_len * inv_batch;
                            gbh[c] += dl;
                            for (std::size_t j = 0; j < n2; ++j) {
                                gwh[c * n2 + j] += dl * h2[tk * n2 + j];
                                dh2[tk * n2 + j] += dl * v.wh[c * n2 + j];
                            }
                        }
                    }
                }
                break;
            }
            case TargetKind::SequenceClass:
            case TargetKind::SequenceValue: {
                pool.assign(n2, 0.0);
                const double inv_len = 1.0 / static_cast<double>(len);
                for (std::size_t tk = 0; tk < len; ++tk)
                    for (std::size_t j = 0; j < n2; ++j) pool[j] += h2[tk * n2 + j] * inv_len;

                dpool.assign(n2, 0.0);
                if (t.target == TargetKind::SequenceClass) {
                    logits.resize(v.outputs);
                    for (std::size_t c = 0; c < v.outputs; ++c) {
                        double a = v.bh[c];
                        for (std::size_t j = 0; j < n2; ++j) a += v.wh[c * n2 + j] * pool[j];
                        logits[c] = a;
                    }
                    detail::softmax_inplace(logits);
                    int y = ex.label;
                    ex_loss = -std::log(std::max(logits[static_cast<std::size_t>(y)], 1e-300));
                    if (grad) {
                        for (std::size_t c = 0; c < v.outputs; ++c) {
                            double dl = (logits[c] - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_batch;
                            gbh[c] += dl;
                            for (std::size_t j = 0; j < n2; ++j) {
                                gwh[c * n2 + j] += dl * pool[j];
                                dpool[j] += dl * v.wh[c * n2 + j];
                            }
                        }
                    }
                } else {
                    double yhat = v.bh[0];
                    for (std::size_t j = 0; j < n2; ++j) yhat += v.wh[j] * pool[j];
                    double err = yhat - ex.target;
                    ex_loss = err * err;
                    if (grad) {
                        double dl = 2.0 * err * inv_batch;
                        gbh[0] += dl;
                        for (std::size_t j = 0; j < n2; ++j) {
                            gwh[j] += dl * pool[j];
                            dpool[j] += dl * v.wh[j];
                        }
                    }
                }
                if (grad)
                    for (std::size_t tk = 0; tk < len; ++tk)
                        for (std::size_t j = 0; j < n2; ++j)
                            dh2[tk * n2 + j] += dpool[j] * inv_len;
                break;
            }
        }

        total_loss += ex_loss * inv_batch;
        if (!grad) continue;

        // backprop through the encoder for every token
        for (std::size_t tk = 0; tk < len; ++tk) {
            const double* x = &ex.tokens[tk * d];
            for (std::size_t i = 0; i < n2; ++i) {
                double post = h2[tk * n2 + i];
                double mask = drop ? m2[tk * n2 + i] : 1.0;
                double pre = mask != 0.0 ? post / mask : 0.0;  // pre-mask tanh value
                double da2 = dh2[tk * n2 + i] * mask * (1.0 - pre * pre);
                if (da2 == 0.0) continue;
                gb2[i] += da2;
                for (std::size_t j = 0; j < n1; ++j) {
                    gw2[i * n1 + j] += da2 * h1[tk * n1 + j];
                }
            }
            // accumulate dh1 then push through layer 1
            for (std::size_t j = 0; j < n1; ++j) {
                double dh1 = 0.0;
                for (std::size_t i = 0; i < n2; ++i) {
                    double post = h2[tk * n2 + i];
                    double mask = drop ? m2[tk * n2 + i] : 1.0;
                    double pre = mask != 0.0 ? post / mask : 0.0;
                    double da2 = dh2[tk * n2 + i] * mask * (1.0 - pre * pre);
                    dh1 += da2 * v.w2[i * n1 + j];
                }
                double mask1 = drop ? m1[tk * n1 + j] : 1.0;
                double post1 = h1[tk * n1 + j];
                double pre1 = mask1 != 0.0 ? post1 / mask1 : 0.0;
                double da1 = dh1 * mask1 * (1.0 - pre1 * pre1);
                if (da1 == 0.0) continue;
                gb1[j] += da1;
                for (std::size_t k = 0; k < d; ++k) gw1[j * d + k] += da1 * x[k];
            }
        }
    }
    return total_loss;
}

inline std::vector<int> Model::predict_token_labels(const ParameterVector& params,
                                                    std::size_t task, const Example& ex) const {
    const Views v = views(params, task);
    const std::size_t d = spec_.d_in, n1 = spec_.hidden1, n2 = spec_.hidden2;
    std::vector<double> h1(n1), h2(n2);
    std::vector<int> out(ex.length);
    for (std::size_t tk = 0; tk < ex.length; ++tk) {
        encode_token(v, &ex.tokens[tk * d], h1.data(), h2.data());
        int best = 0;
        double best_score = -1e300;
        for (std::size_t c = 0; c < v.outputs; ++c) {
            double a = v.bh[c];
            for (std::size_t j = 0; j < n2; ++j) a += v.wh[c * n2 + j] * h2[j];
            if (a > best_score) {
                best_score = a;
                best = static_cast<int>(c);
            }
        }
        out[tk] = best;
    }
    return out;
}

inline int Model::predict_sequence_label(const ParameterVector& params, std::size_t task,
                                         const Example& ex) const {
    const Views v = views(params, task);
    const std::size_t d = spec_.d_in, n1 = spec_.hidden1, n2 = spec_.hidden2;
    std::vector<double> h1(n1), h2(n2), pool(n2, 0.0);
    for (std::size_t tk = 0; tk < ex.length; ++tk) {
        encode_token(v, &ex.tokens[tk * d], h1.data(), h2.data());
        for (std::size_t j = 0; j < n2; ++j) pool[j] += h2[j] / static_cast<double>(ex.length);
    }
    int best = 0;
    double best_score = -1e300;
    for (std::size_t c = 0; c < v.outputs; ++c) {
        double a = v.bh[c];
        for (std::size_t j = 0; j < n2; ++j) a += v.wh[c * n2 + j] * pool[j];
        if (a > best_score) {
            best_score = a;
            best = static_cast<int>(c);
        }
    }
    return best;
}

inline double Model::predict_sequence_value(const ParameterVector& params, std::size_t task,
                                            const Example& ex) const {
    const Views v = views(params, task);
    const std::size_t d = spec_.d_in, n1 = spec_.hidden1, n2 = spec_.hidden2;
    std::vector<double> h1(n1), h2(n2), pool(n2, 0.0);
    for (std::size_t tk = 0; tk < ex.length; ++tk) {
        encode_token(v, &ex.tokens[tk * d], h1.data(), h2.data());
        for (std::size_t j = 0; j < n2; ++j) pool[j] += h2[j] / static_cast<double>(ex.length);
    }
    double yhat = v.bh[0];
    for (std::size_t j = 0; j < n2; ++j) yhat += v.wh[j] * pool[j];
    return yhat;
}

}  // namespace tlpmeta
