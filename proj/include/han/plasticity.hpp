#ifndef HAN_PLASTICITY_HPP
#define HAN_PLASTICITY_HPP

#include "han/network.hpp"
#include "han/types.hpp"

#include <string>
#include <vector>

namespace han {

enum class StabilizationKind { MaxNorm, Clip, Oja, None };

struct StabilizationMode {
    StabilizationKind kind = StabilizationKind::MaxNorm;
    double clip_epsilon = 5.0; // only read for Clip

    static StabilizationMode max_norm() { return {StabilizationKind::MaxNorm, 0.0}; }
    static StabilizationMode clip(double eps) {
        if (!(eps > 0.0)) throw ConfigError("clip threshold must be positive");
        return {StabilizationKind::Clip, eps};
    }
    static StabilizationMode oja() { return {StabilizationKind::Oja, 0.0}; }
    static StabilizationMode none() { return {StabilizationKind::None, 0.0}; }
};

enum class EtaMode { Evolved, Constant };

/// Controller/Hebbian rate pair; updates fire every tau = floor(f_nn/f_hebb)
/// control steps.
struct UpdateSchedule {
    double f_nn_hz = 20.0;
    double f_hebb_hz = 20.0;

    UpdateSchedule() = default;
    UpdateSchedule(double f_nn, double f_hebb) : f_nn_hz(f_nn), f_hebb_hz(f_hebb) {
        if (!(f_hebb_hz >= 1.0) || !(f_nn_hz >= f_hebb_hz))
            throw ConfigError("update schedule requires f_nn >= f_hebb >= 1");
    }

    long tau() const { return static_cast<long>(f_nn_hz / f_hebb_hz); }
};

/// Per-connection ABCD coefficients, learning rates and the stabilization
/// mode: everything the meta-optimizer evolves plus how updates are kept
/// bounded.
struct PlasticityRule {
    std::vector<Matrix> A, B, C, D;
    std::vector<Matrix> eta;
    EtaMode eta_mode = EtaMode::Evolved;
    StabilizationMode stabilization = StabilizationMode::max_norm();
    UpdateSchedule schedule;

    static PlasticityRule zeros(const NetworkShape& shape);
    /// Coefficients (and evolved rates) from U(-range, range).
    static PlasticityRule random(const NetworkShape& shape, Rng& rng, double range = 1.0,
                                 EtaMode eta_mode = EtaMode::Evolved, double eta_const = 0.01);

    void set_constant_eta(double value);
    int num_weight_layers() const { return static_cast<int>(A.size()); }
    void check_shapes(const NetworkShape& shape) const;
};

/// Table of tested conditions: stabilization mode, averaging window M and the
/// f_nn/f_hebb ratio.
struct ConditionPreset {
    StabilizationMode mode;
    int m_window = 1;
    int ratio = 1;
};

/// Presets A..E. Unknown names raise ConfigError.
ConditionPreset condition_preset(const std::string& name);

/// Scalar ABCD update: eta * (a*pre*post + b*pre + c*post + d).
double hebbian_delta_scalar(double pre, double post, double a, double b, double c, double d,
                            double eta);

/// Matrix form of the scalar rule over one weight layer; entry (i,j) equals
/// hebbian_delta_scalar(pre(j), post(i), ...).
Matrix hebbian_delta_matrix(const Vector& pre_avg, const Vector& post_avg, const Matrix& A,
                            const Matrix& B, const Matrix& C, const Matrix& D, const Matrix& eta);

/// Applies one stabilized update and returns the new weight matrix.
/// MaxNorm divides W+dW by its max absolute entry (skipped below 1e-12 so
/// the all-zero state stays a fixed point). Throws NumericError when the
/// result is non-finite.
Matrix apply_stabilization(const Matrix& W, const Matrix& dW, const StabilizationMode& mode,
                           const Vector& post_avg, const Matrix& eta);

/// Runs the dual-timescale update at control step t: no-op unless t > 0 and
/// t is a multiple of the schedule period. Returns whether weights changed.
bool scheduled_step(PlasticNetwork& net, const PlasticityRule& rule, long t);

} // namespace han

#endif
