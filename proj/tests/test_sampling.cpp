#include <doctest.h>

#include <cmath>

#include "tlpmeta/grid.hpp"
#include "tlpmeta/rng.hpp"
#include "tlpmeta/sampling.hpp"

using namespace tlpmeta;

namespace {

double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

}  // namespace

TEST_CASE("temperature sampling closed forms") {
    for (double tau : {1.0, 2.0, 5.0, kInfiniteTau}) {
        std::vector<double> p = temperature_probs({0.5, 0.5}, tau);
        CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    }
    std::vector<double> p = temperature_probs({0.8, 0.2}, kInfiniteTau);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));

    // sqrt(0.9)/sqrt(0.1) = 3, so tau=2 gives (0.75, 0.25)
    p = temperature_probs({0.9, 0.1}, 2.0);
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));

    // tau=1 returns q exactly
    std::vector<double> q = {0.3, 0.2, 0.5};
    CHECK(temperature_probs(q, 1.0) == q);

    CHECK_THROWS_AS(temperature_probs(q, 0.5), std::invalid_argument);
}

TEST_CASE("temperature sampling preserves ranking; entropy nondecreasing in tau") {
    std::vector<double> q = default_grid().fractions();
    double prev_entropy = -1.0;
    for (double tau : {1.0, 1.5, 2.0, 5.0, 20.0, kInfiniteTau}) {
        std::vector<double> p = temperature_probs(q, tau);
        double sum = 0.0;
        for (double v : p) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t i = 0; i < q.size(); ++i)
            for (std::size_t j = 0; j < q.size(); ++j)
                if (q[i] > q[j]) CHECK(p[i] >= p[j]);
        double h = entropy(p);
        CHECK(h >= prev_entropy - 1e-12);
        prev_entropy = h;
    }
}

TEST_CASE("init_psi round trips through softmax") {
    auto check_round_trip = [](const std::vector<double>& q) {
        std::vector<double> p = softmax_probs(init_psi(q));
        for (std::size_t i = 0; i < q.size(); ++i)
            CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
    };
    check_round_trip({0.7, 0.3});
    check_round_trip({0.25, 0.25, 0.25, 0.25});
    // NER-row fractions
    check_round_trip({20.0 / 105, 5.0 / 105, 20.0 / 105, 20.0 / 105, 20.0 / 105, 20.0 / 105});

    std::vector<double> psi = init_psi({0.2, 0.2, 0.2, 0.2, 0.2});
    for (double v : psi) CHECK(v == doctest::Approx(psi[0]).epsilon(1e-15));

    CHECK_THROWS_AS(init_psi({0.5, 0.0, 0.5}), std::invalid_argument);
}

TEST_CASE("softmax basics") {
    std::vector<double> p = softmax_probs({0.0, 0.0, 0.0});
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    p = softmax_probs({std::log(2.0), 0.0});
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // shift invariance
    std::vector<double> a = softmax_probs({1.0, -2.0, 0.5});
    std::vector<double> b = softmax_probs({1.0 + 7.5, -2.0 + 7.5, 0.5 + 7.5});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("cosine reward") {
    CHECK(reward_cosine({1.0, 2.0, -1.0}, {1.0, 2.0, -1.0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(reward_cosine({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(reward_cosine({1.0, 0.0}, {1.0, 1.0}) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    // zero-vector convention
    CHECK(reward_cosine({0.0, 0.0}, {1.0, 1.0}) == 0.0);
    CHECK(reward_cosine({1.0, 1.0}, {0.0, 0.0}) == 0.0);
    // scale invariance
    CHECK(reward_cosine({3.0, 0.0}, {5.0, 5.0}) ==
          doctest::Approx(reward_cosine({1.0, 0.0}, {1.0, 1.0})).epsilon(1e-12));

    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(6), b(6);
        for (double& v : a) v = rng.normal();
        for (double& v : b) v = rng.normal();
        double r = reward_cosine(a, b);
        CHECK(r >= -1.0 - 1e-12);
        CHECK(r <= 1.0 + 1e-12);
        double sa = 0.5 + 3.0 * rng.uniform01(), sb = 0.5 + 3.0 * rng.uniform01();
        std::vector<double> as(a), bs(b);
        for (double& v : as) v *= sa;
        for (double& v : bs) v *= sb;
        CHECK(reward_cosine(as, bs) == doctest::Approx(r).epsilon(1e-10));
    }
}

TEST_CASE("REINFORCE update on the sampler logits") {
    // all-zero rewards leave psi unchanged
    std::vector<double> psi = {0.4, -0.2, 1.0};
    std::vector<double> out = reinforce_update(psi, {0.0, 0.0, 0.0}, 0.1);
    CHECK(out == psi);

    // analytic softmax-log gradient at uniform psi
    out = reinforce_update({0.0, 0.0}, {1.0, 0.0}, 1.0);
    CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(-0.5).epsilon(1e-12));

    // equal rewards cancel at uniform psi
    out = reinforce_update({0.0, 0.0}, {0.7, 0.7}, 1.0);
    CHECK(out[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(reinforce_update(psi, {1.0}, 0.1), std::invalid_argument);

    // direction property: a single positive reward strictly raises that prob
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> ps(5);
        for (double& v : ps) v = rng.normal();
        std::vector<double> before = softmax_probs(ps);
        std::size_t target = trial % 5;
        std::vector<double> rewards(5, 0.0);
        rewards[target] = 0.5;
        std::vector<double> after = softmax_probs(reinforce_update(ps, rewards, 0.1));
        CHECK(after[target] > before[target]);
        double sum = 0.0;
        for (double v : after) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("categorical TLP sampling") {
    // degenerate distribution
    Rng rng(3);
    for (std::size_t i : sample_tlps({1.0, 0.0, 0.0}, 100, rng)) CHECK(i == 0);

    // identical seed, identical draws
    Rng a(99), b(99);
    CHECK(sample_tlps({0.3, 0.3, 0.4}, 1000, a) == sample_tlps({0.3, 0.3, 0.4}, 1000, b));

    // empirical frequencies near q
    std::vector<double> q = {0.5, 0.3, 0.15, 0.05};
    Rng c(123);
    std::vector<std::size_t> draws = sample_tlps(q, 100000, c);
    std::vector<double> freq(q.size(), 0.0);
    for (std::size_t i : draws) freq[i] += 1.0 / static_cast<double>(draws.size());
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(freq[i] - q[i]) < 0.01);
}

TEST_CASE("sampler state wiring") {
    std::vector<double> q = {0.6, 0.4};
    SamplerState temp = SamplerState::temperature(q, 1.0);
    CHECK(temp.probs == q);
    CHECK_THROWS_AS(temp.apply_rewards({1.0, 0.0}), std::logic_error);

    SamplerState dds = SamplerState::multidds(q, 0.1);
    CHECK(dds.probs[0] == doctest::Approx(0.6).epsilon(1e-12));
    dds.apply_rewards({1.0, 0.0});
    CHECK(dds.probs[0] > 0.6);
    CHECK(dds.probs == softmax_probs(dds.psi));
}
