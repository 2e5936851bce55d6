#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "han/harness.hpp"
#include "han/plasticity.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>

using namespace han;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng, double range = 1.0) {
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-range, range);
    return m;
}

Vector random_vector(int n, Rng& rng, double range = 1.0) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.uniform(-range, range);
    return v;
}

} // namespace

TEST_CASE("scalar rule oracle values") {
    CHECK(hebbian_delta_scalar(0.9, -0.3, 0, 0, 0, 0, 1.0) == 0.0);
    CHECK(hebbian_delta_scalar(0.5, 0.5, 1, 0, 0, 0, 1.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(hebbian_delta_scalar(0.2, -0.2, 0, 1, 1, 1, 0.1) ==
          doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("matrix rule: zero coefficients give a zero matrix") {
    Rng rng(5);
    const Vector pre = random_vector(3, rng);
    const Vector post = random_vector(2, rng);
    const Matrix z = Matrix::Zero(2, 3);
    const Matrix delta = hebbian_delta_matrix(pre, post, z, z, z, z, Matrix::Ones(2, 3));
    CHECK(delta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix rule: D-only gives the constant matrix") {
    const Vector pre = Vector::Zero(3);
    const Vector post = Vector::Zero(2);
    const Matrix z = Matrix::Zero(2, 3);
    const Matrix d0 = Matrix::Constant(2, 3, 0.37);
    const Matrix delta = hebbian_delta_matrix(pre, post, z, z, z, d0, Matrix::Ones(2, 3));
    CHECK((delta - d0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix rule equals the scalar double loop") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int rows = 1 + static_cast<int>(rng.next_below(8));
        const int cols = 1 + static_cast<int>(rng.next_below(8));
        const Vector pre = random_vector(cols, rng);
        const Vector post = random_vector(rows, rng);
        const Matrix A = random_matrix(rows, cols, rng);
        const Matrix B = random_matrix(rows, cols, rng);
        const Matrix C = random_matrix(rows, cols, rng);
        const Matrix D = random_matrix(rows, cols, rng);
        const Matrix eta = random_matrix(rows, cols, rng);
        const Matrix delta = hebbian_delta_matrix(pre, post, A, B, C, D, eta);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
                const double expected = hebbian_delta_scalar(pre(j), post(i), A(i, j), B(i, j),
                                                             C(i, j), D(i, j), eta(i, j));
                CHECK(std::abs(delta(i, j) - expected) <= 1e-12);
            }
    }
}

TEST_CASE("matrix rule shape errors") {
    const Matrix m = Matrix::Zero(2, 3);
    CHECK_THROWS_AS(hebbian_delta_matrix(Vector::Zero(2), Vector::Zero(2), m, m, m, m, m),
                    ConfigError);
    CHECK_THROWS_AS(
        hebbian_delta_matrix(Vector::Zero(3), Vector::Zero(2), m, m, m, Matrix::Zero(3, 2), m),
        ConfigError);
}

TEST_CASE("max normalization rescales by the layerwise max abs") {
    Matrix W(2, 2);
    W << 2, -4, 1, 0.5;
    const Matrix out =
        apply_stabilization(W, Matrix::Zero(2, 2), StabilizationMode::max_norm(), Vector(), Matrix());
    Matrix expected(2, 2);
    expected << 0.5, -1, 0.25, 0.125;
    CHECK((out - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("max normalization is the identity at max abs 1") {
    Matrix W(2, 2);
    W << 1, -0.5, 0.25, 0.125;
    const Matrix out =
        apply_stabilization(W, Matrix::Zero(2, 2), StabilizationMode::max_norm(), Vector(), Matrix());
    CHECK((out - W).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("max normalization zero guard preserves the all-zero state") {
    const Matrix z = Matrix::Zero(3, 3);
    const Matrix out = apply_stabilization(z, z, StabilizationMode::max_norm(), Vector(), Matrix());
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("clip bounds the applied deltas") {
    Matrix W = Matrix::Zero(1, 2);
    Matrix dW(1, 2);
    dW << -7, 3;
    const Matrix out = apply_stabilization(W, dW, StabilizationMode::clip(5.0), Vector(), Matrix());
    CHECK(out(0, 0) == -5.0);
    CHECK(out(0, 1) == 3.0);
    CHECK_THROWS_AS(StabilizationMode::clip(0.0), ConfigError);
}

TEST_CASE("oja decay matches the elementwise formula") {
    Rng rng(17);
    const Matrix W = random_matrix(3, 2, rng);
    const Matrix dW = random_matrix(3, 2, rng, 0.1);
    const Matrix eta = Matrix::Constant(3, 2, 0.05);
    const Vector post = random_vector(3, rng);
    const Matrix out = apply_stabilization(W, dW, StabilizationMode::oja(), post, eta);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            const double expected = W(i, j) + dW(i, j) - 0.05 * post(i) * post(i) * W(i, j);
            CHECK(out(i, j) == doctest::Approx(expected).epsilon(1e-14));
        }
}

TEST_CASE("mode none is a plain addition") {
    Matrix W(1, 1), dW(1, 1);
    W << 2.0;
    dW << -0.5;
    const Matrix out = apply_stabilization(W, dW, StabilizationMode::none(), Vector(), Matrix());
    CHECK(out(0, 0) == 1.5);
}

TEST_CASE("non-finite stabilization result raises NumericError") {
    Matrix W(1, 1), dW(1, 1);
    W << 1e308;
    dW << 1e308;
    CHECK_THROWS_AS(apply_stabilization(W, dW, StabilizationMode::none(), Vector(), Matrix()),
                    NumericError);
}

TEST_CASE("max-norm invariant under fuzzed updates") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        NetworkShape shape({3, 5, 2});
        PlasticNetwork net(shape, 1 + static_cast<int>(rng.next_below(4)));
        net.init_weights_uniform(0.1, rng);
        PlasticityRule rule = PlasticityRule::random(shape, rng);
        rule.stabilization = StabilizationMode::max_norm();
        rule.schedule = UpdateSchedule(20.0, 20.0);
        for (long t = 0; t < 200; ++t) {
            net.forward(random_vector(3, rng, 2.0));
            if (!scheduled_step(net, rule, t)) continue;
            for (int k = 0; k < net.num_weight_layers(); ++k) {
                const double max_abs = net.weights(k).cwiseAbs().maxCoeff();
                CHECK(std::abs(max_abs - 1.0) <= 1e-15);
            }
        }
    }
}

TEST_CASE("schedule: tau 4 updates only on multiples of 4, first at t=4") {
    Rng rng(31);
    NetworkShape shape({2, 3, 1});
    PlasticNetwork net(shape, 1);
    net.init_weights_uniform(0.1, rng);
    PlasticityRule rule = PlasticityRule::random(shape, rng);
    rule.schedule = UpdateSchedule(20.0, 5.0);
    CHECK(rule.schedule.tau() == 4);

    std::vector<long> updates;
    for (long t = 0; t < 20; ++t) {
        const Vector before = net.flatten_weights();
        net.forward(random_vector(2, rng));
        const bool updated = scheduled_step(net, rule, t);
        const Vector after = net.flatten_weights();
        if (updated)
            updates.push_back(t);
        else
            CHECK(std::memcmp(before.data(), after.data(),
                              sizeof(double) * before.size()) == 0); // bit identical
    }
    CHECK(updates == std::vector<long>{4, 8, 12, 16});
}

TEST_CASE("schedule: tau 1 updates every step from t=1") {
    Rng rng(37);
    NetworkShape shape({1, 1});
    PlasticNetwork net(shape, 1);
    PlasticityRule rule = PlasticityRule::random(shape, rng);
    rule.schedule = UpdateSchedule(20.0, 20.0);
    CHECK(rule.schedule.tau() == 1);
    net.forward(Vector::Constant(1, 0.3));
    CHECK_FALSE(scheduled_step(net, rule, 0));
    net.forward(Vector::Constant(1, 0.3));
    CHECK(scheduled_step(net, rule, 1));
}

TEST_CASE("schedule invariants") {
    CHECK_THROWS_AS(UpdateSchedule(10.0, 20.0), ConfigError);
    CHECK_THROWS_AS(UpdateSchedule(10.0, 0.5), ConfigError);
    CHECK(UpdateSchedule(20.0, 5.0).tau() == 4);
    CHECK(UpdateSchedule(50.0, 20.0).tau() == 2); // floor division
}

TEST_CASE("condition presets wire mode, window and rate ratio") {
    const ConditionPreset a = condition_preset("A");
    CHECK(a.mode.kind == StabilizationKind::None);
    CHECK(a.m_window == 1);
    CHECK(a.ratio == 1);

    const ConditionPreset b = condition_preset("B");
    CHECK(b.mode.kind == StabilizationKind::MaxNorm);
    CHECK(b.m_window == 1);
    CHECK(b.ratio == 1);

    const ConditionPreset c = condition_preset("C");
    CHECK(c.mode.kind == StabilizationKind::MaxNorm);
    CHECK(c.m_window == 1);
    CHECK(c.ratio == 4);

    const ConditionPreset d = condition_preset("D");
    CHECK(d.mode.kind == StabilizationKind::MaxNorm);
    CHECK(d.m_window == 10);
    CHECK(d.ratio == 1);

    const ConditionPreset e = condition_preset("E");
    CHECK(e.mode.kind == StabilizationKind::MaxNorm);
    CHECK(e.m_window == 10);
    CHECK(e.ratio == 4);

    CHECK_THROWS_AS(condition_preset("F"), ConfigError);
}

TEST_CASE("clip keeps every applied delta within epsilon") {
    Rng rng(41);
    for (double eps : {1.0, 5.0}) {
        NetworkShape shape({2, 4, 1});
        PlasticNetwork net(shape, 1);
        net.init_weights_uniform(0.1, rng);
        PlasticityRule rule = PlasticityRule::random(shape, rng, 3.0);
        rule.stabilization = StabilizationMode::clip(eps);
        rule.schedule = UpdateSchedule(20.0, 20.0);
        Vector before = net.flatten_weights();
        for (long t = 0; t < 300; ++t) {
            net.forward(random_vector(2, rng, 2.0));
            if (scheduled_step(net, rule, t)) {
                const Vector after = net.flatten_weights();
                // measuring after-before re-rounds at the magnitude of the
                // accumulated weights, hence the ulp-scaled slack
                const double slack = 1e-9 * std::max(1.0, before.cwiseAbs().maxCoeff());
                CHECK((after - before).cwiseAbs().maxCoeff() <= eps + slack);
            }
            before = net.flatten_weights();
        }
    }
}

TEST_CASE("oja keeps weights bounded over long runs") {
    Rng rng(43);
    NetworkShape shape({2, 1});
    PlasticNetwork net(shape, 1, Activation::Identity);
    net.init_weights_uniform(0.1, rng);
    PlasticityRule rule = PlasticityRule::zeros(shape);
    rule.A[0].setConstant(1.0);
    rule.set_constant_eta(0.02);
    rule.stabilization = StabilizationMode::oja();
    rule.schedule = UpdateSchedule(20.0, 20.0);

    double sup = 0.0;
    for (long t = 0; t < 100000; ++t) {
        Vector x(2);
        x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
        net.forward(x);
        scheduled_step(net, rule, t);
        sup = std::max(sup, net.weights(0).cwiseAbs().maxCoeff());
    }
    CHECK(sup < 1e3);
}

TEST_CASE("coefficient document round-trips") {
    Rng rng(47);
    NetworkShape shape({2, 3, 1});
    PlasticityRule rule = PlasticityRule::random(shape, rng);
    const auto path = std::filesystem::temp_directory_path() / "han_test_coeffs.json";
    save_coefficients(rule, path.string());
    const PlasticityRule loaded = load_coefficients(path.string());
    REQUIRE(loaded.num_weight_layers() == rule.num_weight_layers());
    for (int k = 0; k < rule.num_weight_layers(); ++k) {
        CHECK((loaded.A[k] - rule.A[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded.B[k] - rule.B[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded.C[k] - rule.C[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded.D[k] - rule.D[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded.eta[k] - rule.eta[k]).cwiseAbs().maxCoeff() == 0.0);
    }
    std::filesystem::remove(path);
}
