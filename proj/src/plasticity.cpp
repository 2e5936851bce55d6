#include "han/plasticity.hpp"

#include <cmath>

namespace han {

PlasticityRule PlasticityRule::zeros(const NetworkShape& shape) {
    PlasticityRule rule;
    for (int k = 0; k < shape.num_weight_layers(); ++k) {
        Matrix z = Matrix::Zero(shape.rows(k), shape.cols(k));
        rule.A.push_back(z);
        rule.B.push_back(z);
        rule.C.push_back(z);
        rule.D.push_back(z);
        rule.eta.push_back(z);
    }
    return rule;
}

PlasticityRule PlasticityRule::random(const NetworkShape& shape, Rng& rng, double range,
                                      EtaMode eta_mode, double eta_const) {
    PlasticityRule rule = zeros(shape);
    rule.eta_mode = eta_mode;
    auto fill = [&](Matrix& m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-range, range);
    };
    for (int k = 0; k < rule.num_weight_layers(); ++k) {
        fill(rule.A[k]);
        fill(rule.B[k]);
        fill(rule.C[k]);
        fill(rule.D[k]);
        if (eta_mode == EtaMode::Evolved)
            fill(rule.eta[k]);
        else
            rule.eta[k].setConstant(eta_const);
    }
    return rule;
}

void PlasticityRule::set_constant_eta(double value) {
    eta_mode = EtaMode::Constant;
    for (auto& e : eta) e.setConstant(value);
}

void PlasticityRule::check_shapes(const NetworkShape& shape) const {
    if (num_weight_layers() != shape.num_weight_layers())
        throw ConfigError("plasticity rule: wrong number of weight layers");
    for (int k = 0; k < num_weight_layers(); ++k) {
        auto ok = [&](const Matrix& m) {
            return m.rows() == shape.rows(k) && m.cols() == shape.cols(k);
        };
        if (!ok(A[k]) || !ok(B[k]) || !ok(C[k]) || !ok(D[k]) || !ok(eta[k]))
            throw ConfigError("plasticity rule: shape mismatch at layer " + std::to_string(k));
    }
}

ConditionPreset condition_preset(const std::string& name) {
    if (name == "A") return {StabilizationMode::none(), 1, 1};
    if (name == "B") return {StabilizationMode::max_norm(), 1, 1};
    if (name == "C") return {StabilizationMode::max_norm(), 1, 4};
    if (name == "D") return {StabilizationMode::max_norm(), 10, 1};
    if (name == "E") return {StabilizationMode::max_norm(), 10, 4};
    throw ConfigError("unknown condition preset: " + name);
}

double hebbian_delta_scalar(double pre, double post, double a, double b, double c, double d,
                            double eta) {
    return eta * (a * pre * post + b * pre + c * post + d);
}

Matrix hebbian_delta_matrix(const Vector& pre_avg, const Vector& post_avg, const Matrix& A,
                            const Matrix& B, const Matrix& C, const Matrix& D, const Matrix& eta) {
    const Eigen::Index rows = A.rows(), cols = A.cols();
    if (pre_avg.size() != cols || post_avg.size() != rows)
        throw ConfigError("hebbian_delta_matrix: activation/coefficient shape mismatch");
    if (B.rows() != rows || B.cols() != cols || C.rows() != rows || C.cols() != cols ||
        D.rows() != rows || D.cols() != cols || eta.rows() != rows || eta.cols() != cols)
        throw ConfigError("hebbian_delta_matrix: coefficient shape mismatch");

    // Elementwise ABCD: the outer product carries the pre*post term, the B
    // and C terms broadcast pre along rows and post along columns.
    Matrix delta = A.cwiseProduct(post_avg * pre_avg.transpose());
    delta.noalias() += B.cwiseProduct(Vector::Ones(rows) * pre_avg.transpose());
    delta.noalias() += C.cwiseProduct(post_avg * Eigen::RowVectorXd::Ones(cols));
    delta += D;
    return eta.cwiseProduct(delta);
}

Matrix apply_stabilization(const Matrix& W, const Matrix& dW, const StabilizationMode& mode,
                           const Vector& post_avg, const Matrix& eta) {
    if (W.rows() != dW.rows() || W.cols() != dW.cols())
        throw ConfigError("apply_stabilization: shape mismatch");

    Matrix next;
    switch (mode.kind) {
    case StabilizationKind::MaxNorm: {
        next = W + dW;
        const double max_abs = next.cwiseAbs().maxCoeff();
        if (max_abs >= 1e-12) next /= max_abs;
        break;
    }
    case StabilizationKind::Clip:
        next = W + dW.cwiseMax(-mode.clip_epsilon).cwiseMin(mode.clip_epsilon);
        break;
    case StabilizationKind::Oja: {
        if (post_avg.size() != W.rows())
            throw ConfigError("apply_stabilization: post activation size mismatch");
        const Matrix decay =
            eta.cwiseProduct((post_avg.array().square().matrix() * Eigen::RowVectorXd::Ones(W.cols()))
                                 .cwiseProduct(W));
        next = W + dW - decay;
        break;
    }
    case StabilizationKind::None:
        next = W + dW;
        break;
    }

    if (!all_finite(next)) throw NumericError("apply_stabilization: non-finite weights");
    return next;
}

bool scheduled_step(PlasticNetwork& net, const PlasticityRule& rule, long t) {
    if (t < 0) throw ConfigError("scheduled_step: negative step index");
    const long tau = rule.schedule.tau();
    if (t == 0 || t % tau != 0) return false;

    for (int k = 0; k < net.num_weight_layers(); ++k) {
        const Vector pre = net.averaged_activations(k);
        const Vector post = net.averaged_activations(k + 1);
        const Matrix dW =
            hebbian_delta_matrix(pre, post, rule.A[k], rule.B[k], rule.C[k], rule.D[k], rule.eta[k]);
        net.weights(k) = apply_stabilization(net.weights(k), dW, rule.stabilization, post, rule.eta[k]);
    }
    return true;
}

} // namespace han
