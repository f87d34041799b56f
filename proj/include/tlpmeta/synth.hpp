#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlpmeta/grid.hpp"
#include "tlpmeta/rng.hpp"

namespace tlpmeta {

struct GeneratorSpec {
    std::size_t dim = 8;             // token dimension (latent and observed)
    std::size_t len_shallow = 8;     // sequence length for token-level tasks
    std::size_t len_deep = 16;       // sequence length for sequence-level tasks
    double noise = 0.05;             // sigma on observed token vectors
    double rotation_strength = 2.0;  // Frobenius norm of the rotation generator
    double shift_strength = 0.1;     // norm scale of the per-language offset
    double scale_strength = 0.4;     // lognormal sigma of the per-sequence scale
    std::size_t dev_size = 128;
    std::size_t test_size = 128;
};

namespace detail {

inline double inverse_normal_cdf(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("inverse_normal_cdf: p in (0,1)");
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double cdf = 0.5 * (1.0 + std::erf(mid / std::sqrt(2.0)));
        if (cdf < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Solve A x = rhs in place by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<double> a, std::vector<double> rhs,
                                       std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-14) throw std::runtime_error("gauss_solve: singular");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r * n + col] / a[col * n + col];
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = rhs[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= a[r * n + c] * x[c];
        x[r] = acc / a[r * n + r];
    }
    return x;
}

inline std::vector<double> unit_vector(std::size_t d, Rng& rng) {
    std::vector<double> w(d);
    double norm2 = 0.0;
    for (double& x : w) {
        x = rng.normal();
        norm2 += x * x;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : w) x *= inv;
    return w;
}

inline double dot(const std::vector<double>& a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace detail

// Orthogonal map plus offset applied to every latent token vector.
// The pivot language "en" is the identity with no offset.
struct LanguageTransform {
    std::size_t dim = 0;
    std::vector<double> matrix;  // dim x dim, row-major
    std::vector<double> shift;

    void apply(const double* z, double* x) const {
        for (std::size_t r = 0; r < dim; ++r) {
            double s = shift[r];
            for (std::size_t c = 0; c < dim; ++c) s += matrix[r * dim + c] * z[c];
            x[r] = s;
        }
    }
};

inline LanguageTransform generate_language_transform(const std::string& language,
                                                     const GeneratorSpec& spec,
                                                     std::uint64_t seed) {
    const std::size_t d = spec.dim;
    LanguageTransform t;
    t.dim = d;
    t.matrix.assign(d * d, 0.0);
    t.shift.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) t.matrix[i * d + i] = 1.0;
    if (language == "en") return t;

    Rng rng(substream_seed(seed, "lang-transform", hash_label(language)));

    // Skew-symmetric generator scaled to the requested strength, mapped to
    // an exactly orthogonal matrix by the Cayley transform
    // Q = (I + S/2)(I - S/2)^{-1}.
    std::vector<double> s(d * d, 0.0);
    double norm2 = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = r + 1; c < d; ++c) {
            double g = rng.normal();
            s[r * d + c] = g;
            s[c * d + r] = -g;
            norm2 += 2.0 * g * g;
        }
    }
    double scale = spec.rotation_strength / std::sqrt(norm2);
    for (double& x : s) x *= scale;

    std::vector<double> a(d * d, 0.0);  // I - S/2
    for (std::size_t i = 0; i < d * d; ++i) a[i] = -0.5 * s[i];
    for (std::size_t i = 0; i < d; ++i) a[i * d + i] += 1.0;

    // Columns of Q solve (I - S/2) q_col = (I + S/2) e_col.
    for (std::size_t col = 0; col < d; ++col) {
        std::vector<double> rhs(d, 0.0);
        for (std::size_t r = 0; r < d; ++r) rhs[r] = 0.5 * s[r * d + col];
        rhs[col] += 1.0;
        std::vector<double> q = detail::gauss_solve(a, std::move(rhs), d);
        for (std::size_t r = 0; r < d; ++r) t.matrix[r * d + col] = q[r];
    }

    for (std::size_t r = 0; r < d; ++r)
        t.shift[r] = spec.shift_strength * rng.normal() / std::sqrt(static_cast<double>(d));
    return t;
}

struct Example {
    std::size_t length = 0;
    std::vector<double> tokens;      // length x dim, row-major
    std::vector<int> token_labels;   // shallow tasks
    int label = 0;                   // deep classification tasks
    double target = 0.0;             // deep regression tasks
};

struct TlpDataset {
    std::string task;
    std::string language;
    std::vector<Example> train, dev, test;
};

// Latent-space labeling function shared by all languages of one task.
// Each sequence draws a lognormal scale that multiplies every latent
// token, so sequences differ in overall energy. Token labels bin a unit
// linear readout of the clean latent token by empirical quantiles of
// its scale-mixture distribution, so classes are balanced by
// construction and the observed-space decision boundary rotates with
// the language. Sequence targets are a nonlinear function of the mean
// token energy (1/L) sum_t ||z_t||^2, which every orthogonal language
// transform preserves, so deep targets are language-invariant given a
// correct encoder.
struct TaskTarget {
    TargetKind kind = TargetKind::TokenClasses;
    int num_classes = 3;
    std::vector<double> w;           // token readout (shallow tasks)
    std::vector<double> thresholds;  // bin edges (readout score or energy)
    double score_mean = 0.0;         // energy standardization (deep value)
    double score_std = 1.0;
    double value_scale = 1.5;
    double wave = 2.0;

    int token_label(const double* z, std::size_t d) const {
        double s = detail::dot(w, z, d);
        int c = 0;
        while (c < num_classes - 1 && s > thresholds[static_cast<std::size_t>(c)]) ++c;
        return c;
    }

    // mean token energy: rotation-invariant sequence statistic
    static double energy(const std::vector<double>& latent, std::size_t len) {
        double s = 0.0;
        for (double z : latent) s += z * z;
        return s / static_cast<double>(len);
    }

    int sequence_label(const std::vector<double>& latent, std::size_t len) const {
        double e = energy(latent, len);
        int c = 0;
        while (c < num_classes - 1 && e > thresholds[static_cast<std::size_t>(c)]) ++c;
        return c;
    }

    double sequence_value(const std::vector<double>& latent, std::size_t len) const {
        double z = (energy(latent, len) - score_mean) / score_std;
        return std::tanh(value_scale * z) + 0.3 * std::cos(wave * z);
    }
};

inline TaskTarget make_task_target(const TaskId& task, const GeneratorSpec& spec,
                                   std::uint64_t seed) {
    Rng rng(substream_seed(seed, "task-target", hash_label(task.name)));
    TaskTarget t;
    t.kind = task.target;
    t.num_classes = task.num_classes;

    // empirical quantiles of the mean token energy (lognormal-scaled
    // chi-square), so deep classes are balanced by construction
    auto simulate_energy = [&](std::vector<double>& out, std::size_t n) {
        const std::size_t terms = spec.len_deep * spec.dim;
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double scale = std::exp(spec.scale_strength * rng.normal());
            double s = 0.0;
            for (std::size_t j = 0; j < terms; ++j) {
                double g = rng.normal();
                s += g * g;
            }
            out[i] = scale * scale * s / static_cast<double>(spec.len_deep);
        }
        std::sort(out.begin(), out.end());
    };

    switch (task.target) {
        case TargetKind::TokenClasses: {
            t.w = detail::unit_vector(spec.dim, rng);
            // readout scores are a lognormal scale mixture of normals;
            // bin by its empirical quantiles to keep classes balanced
            std::vector<double> sim(100000);
            for (double& v : sim)
                v = std::exp(spec.scale_strength * rng.normal()) * rng.normal();
            std::sort(sim.begin(), sim.end());
            for (int c = 1; c < task.num_classes; ++c)
                t.thresholds.push_back(
                    sim[sim.size() * static_cast<std::size_t>(c) /
                        static_cast<std::size_t>(task.num_classes)]);
            break;
        }
        case TargetKind::SequenceClass: {
            std::vector<double> sim;
            simulate_energy(sim, 20000);
            for (int c = 1; c < task.num_classes; ++c)
                t.thresholds.push_back(
                    sim[sim.size() * static_cast<std::size_t>(c) /
                        static_cast<std::size_t>(task.num_classes)]);
            break;
        }
        case TargetKind::SequenceValue: {
            std::vector<double> sim;
            simulate_energy(sim, 20000);
            double mean = 0.0, var = 0.0;
            for (double r : sim) mean += r / static_cast<double>(sim.size());
            for (double r : sim) var += (r - mean) * (r - mean) / static_cast<double>(sim.size());
            t.score_mean = mean;
            t.score_std = std::sqrt(var);
            break;
        }
    }
    return t;
}

namespace detail {

inline Example generate_example(const TaskId& task, const TaskTarget& target,
                                const LanguageTransform& transform, const GeneratorSpec& spec,
                                Rng& rng) {
    const std::size_t d = spec.dim;
    const std::size_t len = task.kind == TaskKind::Shallow ? spec.len_shallow : spec.len_deep;
    Example ex;
    ex.length = len;
    ex.tokens.resize(len * d);

    const double scale = std::exp(spec.scale_strength * rng.normal());
    std::vector<double> latent(len * d);
    for (double& z : latent) z = scale * rng.normal();

    for (std::size_t t = 0; t < len; ++t)
        transform.apply(&latent[t * d], &ex.tokens[t * d]);
    if (spec.noise > 0.0)
        for (double& x : ex.tokens) x += spec.noise * rng.normal();

    switch (target.kind) {
        case TargetKind::TokenClasses:
            ex.token_labels.resize(len);
            for (std::size_t t = 0; t < len; ++t)
                ex.token_labels[t] = target.token_label(&latent[t * d], d);
            break;
        case TargetKind::SequenceClass:
            ex.label = target.sequence_label(latent, len);
            break;
        case TargetKind::SequenceValue:
            ex.target = target.sequence_value(latent, len);
            break;
    }
    return ex;
}

}  // namespace detail

inline TlpDataset generate_tlp_dataset(const TaskId& task, const std::string& language,
                                       std::size_t train_size, const GeneratorSpec& spec,
                                       std::uint64_t seed) {
    LanguageTransform transform = generate_language_transform(language, spec, seed);
    TaskTarget target = make_task_target(task, spec, seed);

    TlpDataset ds;
    ds.task = task.name;
    ds.language = language;

    auto fill = [&](std::vector<Example>& out, std::size_t n, std::string_view split) {
        Rng rng(substream_seed(seed, "examples", hash_label(task.name + "/" + language),
                               hash_label(split)));
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(detail::generate_example(task, target, transform, spec, rng));
    };
    fill(ds.train, train_size, "train");
    fill(ds.dev, spec.dev_size, "dev");
    fill(ds.test, spec.test_size, "test");
    return ds;
}

}  // namespace tlpmeta
