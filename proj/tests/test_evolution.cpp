#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "han/evolution.hpp"

#include <cmath>
#include <numeric>

using namespace han;

TEST_CASE("genome layout dimensions") {
    GenomeLayout evolved{NetworkShape({1, 1, 1}), EtaMode::Evolved, 0.01};
    CHECK(evolved.dimension() == 10); // 2 connections x 5
    GenomeLayout constant{NetworkShape({1, 1, 1}), EtaMode::Constant, 0.01};
    CHECK(constant.dimension() == 8); // 2 connections x 4
    // a 17-16-6 controller with co-evolved rates
    GenomeLayout large{NetworkShape({17, 16, 6}), EtaMode::Evolved, 0.01};
    CHECK(large.dimension() == 1840);
    GenomeLayout large_const{NetworkShape({17, 16, 6}), EtaMode::Constant, 0.01};
    CHECK(large_const.dimension() == 1472);
}

TEST_CASE("encode/decode round-trip") {
    Rng rng(3);
    const NetworkShape shape({3, 4, 2});
    for (EtaMode mode : {EtaMode::Evolved, EtaMode::Constant}) {
        GenomeLayout layout{shape, mode, 0.05};
        PlasticityRule rule = PlasticityRule::random(shape, rng, 1.0, mode, 0.05);
        const Vector genome = encode(rule, layout);
        CHECK(genome.size() == layout.dimension());
        const PlasticityRule back = decode(genome, layout);
        for (int k = 0; k < rule.num_weight_layers(); ++k) {
            CHECK((back.A[k] - rule.A[k]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((back.B[k] - rule.B[k]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((back.C[k] - rule.C[k]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((back.D[k] - rule.D[k]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((back.eta[k] - rule.eta[k]).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("decode rejects wrong lengths") {
    GenomeLayout layout{NetworkShape({2, 2, 1}), EtaMode::Evolved, 0.01};
    CHECK_THROWS_AS(decode(Vector::Zero(layout.dimension() + 1), layout), ConfigError);
}

TEST_CASE("center rank maps ranks onto [-0.5, 0.5]") {
    const auto shaped = center_rank({3.0, 1.0});
    CHECK(shaped[0] == doctest::Approx(0.5));
    CHECK(shaped[1] == doctest::Approx(-0.5));
    CHECK_THROWS_AS(center_rank({1.0}), ConfigError);
}

TEST_CASE("center rank sums to zero and is monotone invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 2 + rng.next_below(20);
        std::vector<double> fitness(n);
        for (auto& f : fitness) f = rng.uniform(-10.0, 10.0);
        const auto shaped = center_rank(fitness);
        CHECK(std::abs(std::accumulate(shaped.begin(), shaped.end(), 0.0)) <= 1e-12);

        std::vector<double> transformed(n);
        for (size_t i = 0; i < n; ++i) transformed[i] = 10.0 * fitness[i] + 7.0;
        CHECK(center_rank(transformed) == shaped);
        for (size_t i = 0; i < n; ++i) transformed[i] = std::atan(fitness[i]);
        CHECK(center_rank(transformed) == shaped);
    }
}

TEST_CASE("center rank is permutation equivariant") {
    const std::vector<double> fitness{0.3, -2.0, 5.5, 1.1};
    const auto shaped = center_rank(fitness);
    const std::vector<size_t> perm{2, 0, 3, 1};
    std::vector<double> permuted(fitness.size());
    for (size_t i = 0; i < perm.size(); ++i) permuted[i] = fitness[perm[i]];
    const auto shaped_perm = center_rank(permuted);
    for (size_t i = 0; i < perm.size(); ++i) CHECK(shaped_perm[i] == shaped[perm[i]]);
}

TEST_CASE("center rank: flat fitness shapes to zeros, NaN ranks last") {
    const auto flat = center_rank({2.0, 2.0, 2.0, 2.0});
    for (double v : flat) CHECK(v == 0.0);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto shaped = center_rank({1.0, nan, 3.0});
    CHECK(shaped[1] == doctest::Approx(-0.5)); // NaN is worst
    CHECK(shaped[2] == doctest::Approx(0.5));
}

TEST_CASE("adaptive es ask: zero sigma collapses onto the mean") {
    AdaptiveEsConfig cfg;
    cfg.population = 8;
    cfg.sigma_init = 1e-300;
    AdaptiveEs es(cfg, 4, 42);
    for (const auto& x : es.ask()) CHECK((x - es.mean()).cwiseAbs().maxCoeff() <= 1e-290);
}

TEST_CASE("adaptive es ask is deterministic for a fixed seed") {
    AdaptiveEsConfig cfg;
    cfg.population = 16;
    AdaptiveEs a(cfg, 6, 123), b(cfg, 6, 123);
    const auto pa = a.ask(), pb = b.ask();
    for (size_t i = 0; i < pa.size(); ++i) CHECK((pa[i] - pb[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adaptive es ask: sample mean approaches mu") {
    AdaptiveEsConfig cfg;
    cfg.population = 100000;
    cfg.sigma_init = 0.5;
    AdaptiveEs es(cfg, 3, 7);
    Vector sum = Vector::Zero(3);
    for (const auto& x : es.ask()) sum += x;
    const Vector sample_mean = sum / static_cast<double>(cfg.population);
    const double tol = 3.0 * cfg.sigma_init / std::sqrt(static_cast<double>(cfg.population));
    CHECK((sample_mean - es.mean()).cwiseAbs().maxCoeff() <= tol);
}

TEST_CASE("adaptive es tell: parents at the mean shrink sigma") {
    AdaptiveEsConfig cfg;
    cfg.population = 10;
    cfg.selection_ratio = 0.2;
    AdaptiveEs es(cfg, 2, 1);
    const Vector mu = es.mean();
    const Vector sigma = es.sigma();
    std::vector<Vector> pop(10, mu);
    std::vector<double> fitness(10, 0.0);
    for (int i = 0; i < 10; ++i) fitness[i] = -i; // candidates 0,1 win
    es.tell(pop, fitness);
    CHECK((es.mean() - mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((es.sigma() - (1.0 - cfg.c_sigma) * sigma).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("adaptive es tell: hand-evaluated single-parent update") {
    AdaptiveEsConfig cfg;
    cfg.population = 2;
    cfg.selection_ratio = 0.5; // one parent
    cfg.c_mu = 1.0;
    cfg.c_sigma = 0.1;
    AdaptiveEs es(cfg, 1, 5);
    const double mu = es.mean()(0);
    const double sigma = es.sigma()(0);
    std::vector<Vector> pop{Vector::Constant(1, mu + 1.0), Vector::Constant(1, mu - 2.0)};
    es.tell(pop, {10.0, 0.0});
    CHECK(es.mean()(0) == doctest::Approx(mu + 1.0).epsilon(1e-14));
    // sigma_hat = 1 from the single parent's deviation about the old mean
    CHECK(es.sigma()(0) == doctest::Approx(0.9 * sigma + 0.1 * 1.0).epsilon(1e-14));
}

TEST_CASE("adaptive es tell: ties break on the lower index, NaN ranks last") {
    AdaptiveEsConfig cfg;
    cfg.population = 4;
    cfg.selection_ratio = 0.25; // one parent
    cfg.c_mu = 1.0;
    AdaptiveEs es(cfg, 1, 9);
    const double mu = es.mean()(0);
    std::vector<Vector> pop{Vector::Constant(1, mu + 1.0), Vector::Constant(1, mu + 2.0),
                            Vector::Constant(1, mu + 3.0), Vector::Constant(1, mu + 4.0)};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    es.tell(pop, {5.0, 5.0, 1.0, nan}); // tie between 0 and 1 -> index 0 wins
    CHECK(es.mean()(0) == doctest::Approx(mu + 1.0).epsilon(1e-14));
}

TEST_CASE("adaptive es converges on the sphere (single seed smoke)") {
    AdaptiveEsConfig cfg;
    cfg.population = 64;
    cfg.sigma_init = 0.5;
    cfg.selection_ratio = 0.1;
    AdaptiveEs es(cfg, 10, 17);
    double best = -1e300;
    for (int g = 0; g < 150; ++g) {
        const auto pop = es.ask();
        std::vector<double> fitness(pop.size());
        for (size_t i = 0; i < pop.size(); ++i) fitness[i] = -pop[i].squaredNorm();
        best = std::max(best, *std::max_element(fitness.begin(), fitness.end()));
        es.tell(pop, fitness);
    }
    CHECK(best >= -1e-2);
}

TEST_CASE("openai es: mirrored sampling pairs sum to twice the mean") {
    OpenAiEsConfig cfg;
    cfg.population = 8;
    OpenAiEs es(cfg, 3, 11);
    const auto pop = es.ask();
    for (int i = 0; i < 4; ++i)
        CHECK((pop[2 * i] + pop[2 * i + 1] - 2.0 * es.mean()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(([] {
                        OpenAiEsConfig bad;
                        bad.population = 7;
                        OpenAiEs odd(bad, 2, 1);
                    }()),
                    ConfigError);
}

TEST_CASE("openai es: flat fitness leaves the mean unchanged") {
    OpenAiEsConfig cfg;
    cfg.population = 8;
    OpenAiEs es(cfg, 3, 13);
    const Vector mu = es.mean();
    es.ask();
    es.tell(std::vector<double>(8, 1.5));
    CHECK((es.mean() - mu).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("openai es schedules decay exponentially") {
    OpenAiEsConfig cfg;
    cfg.population = 4;
    OpenAiEs es(cfg, 2, 19);
    CHECK(es.learning_rate() == 0.1);
    CHECK(es.sigma() == 0.2);
    for (int g = 0; g < 2; ++g) {
        es.ask();
        es.tell({1.0, 2.0, 3.0, 4.0});
    }
    CHECK(es.learning_rate() == 0.1 * std::pow(0.999, 2));
    CHECK(es.sigma() == 0.2 * std::pow(0.995, 2));
}

TEST_CASE("openai es: estimated ascent direction is correct on a quadratic") {
    // d=1 maximization of f(x) = -x^2 from mu=1: the shaped gradient should
    // point toward the optimum in nearly every seeded trial
    int negative = 0;
    for (int seed = 0; seed < 100; ++seed) {
        OpenAiEsConfig cfg;
        cfg.population = 64;
        OpenAiEs es(cfg, 1, 1000 + seed);
        es.set_mean(Vector::Constant(1, 1.0));
        const auto pop = es.ask();
        std::vector<double> fitness(pop.size());
        for (size_t i = 0; i < pop.size(); ++i) fitness[i] = -pop[i](0) * pop[i](0);
        const Vector before = es.mean();
        es.tell(fitness);
        if (es.mean()(0) < before(0)) ++negative;
    }
    CHECK(negative >= 95);
}
