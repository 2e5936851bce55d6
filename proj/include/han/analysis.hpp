#ifndef HAN_ANALYSIS_HPP
#define HAN_ANALYSIS_HPP

#include "han/types.hpp"

#include <string>
#include <vector>

namespace han {

/// Per-step flattened weight snapshots of one rollout plus the layer
/// dimensions needed to recover layerwise norms.
struct WeightTrajectory {
    std::vector<long> steps;
    std::vector<Vector> snapshots;
    std::vector<std::pair<int, int>> layer_dims; // (rows, cols) per weight layer

    void push(long step, Vector flat);
    size_t size() const { return snapshots.size(); }
    long flat_dim() const;
    void check() const;
};

/// Total weight change per step: sum over layers of the l2 norm of the
/// stepwise weight difference.
std::vector<double> plasticity_series(const WeightTrajectory& traj);

enum class AttractorVerdict { FixedPoint, LimitCycle, Diverged };

std::string to_string(AttractorVerdict v);

struct AttractorReport {
    double mean_early = 0.0;
    double mean_late = 0.0;
    double rho = 0.9;
    double early_fraction = 0.05;
    AttractorVerdict verdict = AttractorVerdict::FixedPoint;
    double dominant_frequency_hz = 0.0; // populated for limit cycles when a rate is known
};

/// Early/late convergence criterion: FixedPoint iff the mean plasticity over
/// the late phase is strictly below rho times the mean over the first
/// early_fraction of the series. Non-finite series are Diverged; a series
/// that never adapted (mean_early < 1e-12) reports FixedPoint.
AttractorReport classify_convergence(const std::vector<double>& series, double rho,
                                     double early_fraction = 0.05);

struct PcaResult {
    Matrix projected;               // snapshots x k
    std::vector<double> explained;  // variance ratios, non-increasing
    Matrix components;              // k x dim, sign-fixed
};

/// Project the centered snapshot matrix onto its top-k principal directions.
/// Sign convention: the largest-magnitude loading of each component is
/// positive. All-identical snapshots give zero projections and zero ratios.
PcaResult pca_embed(const WeightTrajectory& traj, int k = 2);

struct SpectrumReport {
    std::vector<double> frequency_hz; // non-negative half, bin 0 = DC
    std::vector<double> magnitude;
    double dominant_frequency_hz = 0.0; // argmax over bins > 0 Hz
};

/// Magnitude spectrum of a real signal (mean removed before the transform).
/// Requires at least 8 samples.
SpectrumReport spectrum(const std::vector<double>& signal, double sample_rate_hz);

/// Pairwise l2 distances between strided snapshots; zero diagonal,
/// symmetric.
Matrix distance_matrix(const WeightTrajectory& traj, long stride = 1);

} // namespace han

#endif
