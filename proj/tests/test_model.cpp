#include <doctest.h>

#include <cmath>

#include "tlpmeta/model.hpp"
#include "tlpmeta/synth.hpp"

using namespace tlpmeta;

namespace {

GeneratorSpec tiny_spec() {
    GeneratorSpec s;
    s.dim = 4;
    s.len_shallow = 3;
    s.len_deep = 5;
    s.noise = 0.05;
    s.dev_size = 8;
    s.test_size = 8;
    return s;
}

std::vector<TaskId> tiny_tasks() {
    return {
        {"TOK", TaskKind::Shallow, 3, MetricKind::Accuracy, TargetKind::TokenClasses},
        {"SEQ", TaskKind::Deep, 3, MetricKind::Accuracy, TargetKind::SequenceClass},
        {"VAL", TaskKind::Deep, 0, MetricKind::Accuracy, TargetKind::SequenceValue},
    };
}

Model tiny_model() { return Model(ModelSpec{4, 6, 5}, tiny_tasks()); }

Batch as_batch(const std::vector<Example>& ex, std::size_t n) {
    Batch b;
    for (std::size_t i = 0; i < n && i < ex.size(); ++i) b.push_back(&ex[i]);
    return b;
}

// independent forward-pass oracle: plain re-computation of the network
double oracle_loss(const ModelSpec& spec, const TaskId& task, const std::vector<double>& p,
                   std::size_t head_offset, const Batch& batch) {
    const std::size_t d = spec.d_in, n1 = spec.hidden1, n2 = spec.hidden2;
    const double* w1 = p.data();
    const double* b1 = w1 + n1 * d;
    const double* w2 = b1 + n1;
    const double* b2 = w2 + n2 * n1;
    const double* wh = p.data() + head_offset;
    std::size_t outputs = task.target == TargetKind::SequenceValue
                              ? 1
                              : static_cast<std::size_t>(task.num_classes);
    const double* bh = wh + outputs * n2;

    double total = 0.0;
    for (const Example* exp : batch) {
        const Example& ex = *exp;
        std::vector<std::vector<double>> h2s;
        for (std::size_t t = 0; t < ex.length; ++t) {
            std::vector<double> h1(n1), h2(n2);
            for (std::size_t i = 0; i < n1; ++i) {
                double a = b1[i];
                for (std::size_t j = 0; j < d; ++j) a += w1[i * d + j] * ex.tokens[t * d + j];
                h1[i] = std::tanh(a);
            }
            for (std::size_t i = 0; i < n2; ++i) {
                double a = b2[i];
                for (std::size_t j = 0; j < n1; ++j) a += w2[i * n1 + j] * h1[j];
                h2[i] = std::tanh(a);
            }
            h2s.push_back(std::move(h2));
        }
        double ex_loss = 0.0;
        if (task.target == TargetKind::TokenClasses) {
            for (std::size_t t = 0; t < ex.length; ++t) {
                std::vector<double> logits(outputs);
                for (std::size_t c = 0; c < outputs; ++c) {
                    logits[c] = bh[c];
                    for (std::size_t j = 0; j < n2; ++j) logits[c] += wh[c * n2 + j] * h2s[t][j];
                }
                double mx = *std::max_element(logits.begin(), logits.end());
                double z = 0.0;
                for (double l : logits) z += std::exp(l - mx);
                ex_loss += -(logits[static_cast<std::size_t>(ex.token_labels[t])] - mx -
                             std::log(z)) /
                           static_cast<double>(ex.length);
            }
        } else {
            std::vector<double> pool(n2, 0.0);
            for (const auto& h2 : h2s)
                for (std::size_t j = 0; j < n2; ++j) pool[j] += h2[j] / double(ex.length);
            if (task.target == TargetKind::SequenceClass) {
                std::vector<double> logits(outputs);
                for (std::size_t c = 0; c < outputs; ++c) {
                    logits[c] = bh[c];
                    for (std::size_t j = 0; j < n2; ++j) logits[c] += wh[c * n2 + j] * pool[j];
                }
                double mx = *std::max_element(logits.begin(), logits.end());
                double z = 0.0;
                for (double l : logits) z += std::exp(l - mx);
                ex_loss = -(logits[static_cast<std::size_t>(ex.label)] - mx - std::log(z));
            } else {
                double yhat = bh[0];
                for (std::size_t j = 0; j < n2; ++j) yhat += wh[j] * pool[j];
                ex_loss = (yhat - ex.target) * (yhat - ex.target);
            }
        }
        total += ex_loss / static_cast<double>(batch.size());
    }
    return total;
}

}  // namespace

TEST_CASE("segment table partitions the parameter array exactly") {
    Model m = tiny_model();
    ParameterVector p = m.init_params(1);
    std::size_t covered = 0, expected_offset = 0;
    for (const Segment& s : *p.segments) {
        CHECK(s.offset == expected_offset);
        covered += s.size;
        expected_offset += s.size;
    }
    CHECK(covered == p.size());
    CHECK(p.segment("encoder").offset == 0);
    CHECK_THROWS_AS(p.segment("head:missing"), std::invalid_argument);
}

TEST_CASE("deterministic init with finite sane loss") {
    Model m = tiny_model();
    ParameterVector a = m.init_params(7);
    ParameterVector b = m.init_params(7);
    CHECK(a.values == b.values);
    CHECK(m.init_params(8).values != a.values);

    GeneratorSpec spec = tiny_spec();
    TlpDataset ds = generate_tlp_dataset(m.tasks()[0], "de", 16, spec, 3);
    Batch batch = as_batch(ds.train, 16);
    double loss = m.forward_loss(a, 0, batch);
    CHECK(std::isfinite(loss));
    // constant predictor loss for a balanced 3-class task is ln 3
    CHECK(loss < 10.0 * std::log(3.0));
}

TEST_CASE("uniform logits give the maximum-entropy loss") {
    Model m = tiny_model();
    ParameterVector p = m.init_params(1);
    p.values.assign(p.size(), 0.0);
    GeneratorSpec spec = tiny_spec();
    TlpDataset ds = generate_tlp_dataset(m.tasks()[0], "es", 8, spec, 3);
    Batch batch = as_batch(ds.train, 8);
    CHECK(m.forward_loss(p, 0, batch) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("zero-error regression batch has zero loss and stationary gradient") {
    Model m = tiny_model();
    ParameterVector p = m.init_params(2);
    // zero the VAL head: prediction is identically 0
    const Segment& head = p.segment("head:VAL");
    for (std::size_t i = head.offset; i < head.offset + head.size; ++i) p.values[i] = 0.0;

    GeneratorSpec spec = tiny_spec();
    TlpDataset ds = generate_tlp_dataset(m.tasks()[2], "fr", 8, spec, 3);
    std::vector<Example> zeroed = ds.train;
    for (Example& ex : zeroed) ex.target = 0.0;
    Batch batch = as_batch(zeroed, 8);

    CHECK(m.forward_loss(p, 2, batch) == 0.0);
    Gradient g;
    m.gradient(p, 2, batch, g);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-8);
}

TEST_CASE("forward pass matches the independent oracle") {
    Model m = tiny_model();
    GeneratorSpec spec = tiny_spec();
    ParameterVector p = m.init_params(5);
    for (std::size_t task = 0; task < 3; ++task) {
        TlpDataset ds = generate_tlp_dataset(m.tasks()[task], "zh", 4, spec, 11);
        Batch batch = as_batch(ds.train, 4);
        double got = m.forward_loss(p, task, batch);
        double want = oracle_loss(m.spec(), m.tasks()[task],  p.values,
                                  p.segment("head:" + m.tasks()[task].name).offset, batch);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    Model m = tiny_model();
    GeneratorSpec spec = tiny_spec();
    const double eps = 1e-5;
    Rng jitter(99);
    for (std::size_t task = 0; task < 3; ++task) {
        for (int draw = 0; draw < 20; ++draw) {
            ParameterVector p = m.init_params(100 + static_cast<std::uint64_t>(draw));
            for (double& v : p.values) v += 0.1 * jitter.normal();
            TlpDataset ds = generate_tlp_dataset(m.tasks()[task], "de", 4, spec,
                                                 200 + static_cast<std::uint64_t>(draw));
            Batch batch = as_batch(ds.train, 4);

            Gradient g;
            m.gradient(p, task, batch, g);

            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                ParameterVector plus = p, minus = p;
                plus.values[i] += eps;
                minus.values[i] -= eps;
                double fd =
                    (m.forward_loss(plus, task, batch) - m.forward_loss(minus, task, batch)) /
                    (2.0 * eps);
                num += (g[i] - fd) * (g[i] - fd);
                den += fd * fd;
            }
            CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-12) < 1e-4);
        }
    }
}

TEST_CASE("task isolation: other heads receive exactly zero gradient") {
    Model m = tiny_model();
    GeneratorSpec spec = tiny_spec();
    ParameterVector p = m.init_params(6);
    TlpDataset ds = generate_tlp_dataset(m.tasks()[1], "hi", 6, spec, 13);
    Gradient g;
    m.gradient(p, 1, as_batch(ds.train, 6), g);
    for (const char* other : {"head:TOK", "head:VAL"}) {
        const Segment& s = p.segment(other);
        for (std::size_t i = s.offset; i < s.offset + s.size; ++i) CHECK(g[i] == 0.0);
    }
    // the involved head does receive gradient
    const Segment& own = p.segment("head:SEQ");
    double norm = 0.0;
    for (std::size_t i = own.offset; i < own.offset + own.size; ++i) norm += g[i] * g[i];
    CHECK(norm > 0.0);
}

TEST_CASE("dimension mismatches are rejected") {
    Model m = tiny_model();
    ParameterVector p = m.init_params(1);
    Example bad;
    bad.length = 2;
    bad.tokens.assign(2 * 3, 0.0);  // wrong token dimension
    bad.token_labels = {0, 1};
    Batch batch = {&bad};
    CHECK_THROWS_AS(m.forward_loss(p, 0, batch), std::invalid_argument);
    CHECK_THROWS_AS(m.forward_loss(p, 7, batch), std::out_of_range);
    ParameterVector short_p = p;
    short_p.values.pop_back();
    CHECK_THROWS_AS(m.forward_loss(short_p, 0, batch), std::invalid_argument);
}
