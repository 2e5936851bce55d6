#include "han/analysis.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace han {

void WeightTrajectory::push(long step, Vector flat) {
    if (!steps.empty() && step <= steps.back())
        throw InputError("weight trajectory: steps must be strictly increasing");
    if (!snapshots.empty() && flat.size() != snapshots.front().size())
        throw InputError("weight trajectory: inconsistent snapshot length");
    steps.push_back(step);
    snapshots.push_back(std::move(flat));
}

long WeightTrajectory::flat_dim() const {
    long d = 0;
    for (const auto& [r, c] : layer_dims) d += static_cast<long>(r) * c;
    return d;
}

void WeightTrajectory::check() const {
    if (!layer_dims.empty() && !snapshots.empty() && flat_dim() != snapshots.front().size())
        throw InputError("weight trajectory: layer dims do not match snapshot length");
}

std::vector<double> plasticity_series(const WeightTrajectory& traj) {
    if (traj.size() < 2) throw InputError("plasticity series needs at least two snapshots");
    traj.check();

    // default to one segment when no layer structure is attached
    std::vector<std::pair<long, long>> segments;
    if (traj.layer_dims.empty()) {
        segments.emplace_back(0, traj.snapshots.front().size());
    } else {
        long at = 0;
        for (const auto& [r, c] : traj.layer_dims) {
            segments.emplace_back(at, static_cast<long>(r) * c);
            at += static_cast<long>(r) * c;
        }
    }

    std::vector<double> series;
    series.reserve(traj.size() - 1);
    for (size_t t = 1; t < traj.size(); ++t) {
        const Vector diff = traj.snapshots[t] - traj.snapshots[t - 1];
        double total = 0.0;
        for (const auto& [offset, len] : segments) total += diff.segment(offset, len).norm();
        series.push_back(total);
    }
    return series;
}

std::string to_string(AttractorVerdict v) {
    switch (v) {
    case AttractorVerdict::FixedPoint: return "fixed_point";
    case AttractorVerdict::LimitCycle: return "limit_cycle";
    case AttractorVerdict::Diverged: return "diverged";
    }
    return "unknown";
}

AttractorReport classify_convergence(const std::vector<double>& series, double rho,
                                     double early_fraction) {
    if (series.empty()) throw InputError("classify_convergence: empty series");
    if (!(rho > 0.0)) throw ConfigError("classify_convergence: rho must be positive");
    if (!(early_fraction > 0.0 && early_fraction < 1.0))
        throw ConfigError("classify_convergence: early fraction must be in (0, 1)");

    AttractorReport report;
    report.rho = rho;
    report.early_fraction = early_fraction;

    for (double v : series) {
        if (!std::isfinite(v)) {
            report.verdict = AttractorVerdict::Diverged;
            return report;
        }
    }

    const size_t n = series.size();
    const size_t n_early =
        std::min(n, static_cast<size_t>(std::ceil(early_fraction * static_cast<double>(n))));
    double early = 0.0, late = 0.0;
    for (size_t i = 0; i < n_early; ++i) early += series[i];
    for (size_t i = n_early; i < n; ++i) late += series[i];
    report.mean_early = early / static_cast<double>(n_early);
    report.mean_late = n_early < n ? late / static_cast<double>(n - n_early) : 0.0;

    if (report.mean_early < 1e-12) {
        // never adapted: strict inequality would mislabel a frozen network
        report.verdict = AttractorVerdict::FixedPoint;
    } else {
        report.verdict = report.mean_late < rho * report.mean_early ? AttractorVerdict::FixedPoint
                                                                    : AttractorVerdict::LimitCycle;
    }
    return report;
}

PcaResult pca_embed(const WeightTrajectory& traj, int k) {
    const long n = static_cast<long>(traj.size());
    if (n < k) throw InputError("pca_embed: need at least k snapshots");
    const long d = traj.snapshots.front().size();

    Matrix data(n, d);
    for (long i = 0; i < n; ++i) data.row(i) = traj.snapshots[i].transpose();
    const Eigen::RowVectorXd mean = data.colwise().mean();
    data.rowwise() -= mean;

    PcaResult result;
    result.projected = Matrix::Zero(n, k);
    result.components = Matrix::Zero(k, d);
    result.explained.assign(k, 0.0);

    const double total_var = data.squaredNorm();
    if (total_var < 1e-300) return result; // all snapshots identical

    Eigen::BDCSVD<Matrix> svd(data, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const int rank = static_cast<int>(std::min<long>(k, sv.size()));
    for (int c = 0; c < rank; ++c) {
        Vector comp = svd.matrixV().col(c);
        // fix sign: largest-magnitude loading positive
        Eigen::Index imax;
        comp.cwiseAbs().maxCoeff(&imax);
        if (comp(imax) < 0.0) comp = -comp;
        result.components.row(c) = comp.transpose();
        result.projected.col(c) = data * comp;
        result.explained[c] = sv(c) * sv(c) / total_var;
    }
    return result;
}

SpectrumReport spectrum(const std::vector<double>& signal, double sample_rate_hz) {
    const size_t n = signal.size();
    if (n < 8) throw InputError("spectrum: signal must have at least 8 samples");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("spectrum: sample rate must be positive");

    double mean = 0.0;
    for (double v : signal) mean += v;
    mean /= static_cast<double>(n);

    SpectrumReport report;
    const size_t half = n / 2;
    report.frequency_hz.reserve(half + 1);
    report.magnitude.reserve(half + 1);

    // plain DFT on the mean-removed signal; desk-scale lengths keep O(n^2) cheap
    for (size_t k = 0; k <= half; ++k) {
        double re = 0.0, im = 0.0;
        const double w = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        for (size_t t = 0; t < n; ++t) {
            const double x = signal[t] - mean;
            re += x * std::cos(w * static_cast<double>(t));
            im += x * std::sin(w * static_cast<double>(t));
        }
        report.frequency_hz.push_back(static_cast<double>(k) * sample_rate_hz /
                                      static_cast<double>(n));
        report.magnitude.push_back(2.0 / static_cast<double>(n) * std::hypot(re, im));
    }

    double best = -1.0;
    for (size_t k = 1; k < report.magnitude.size(); ++k) {
        if (report.magnitude[k] > best) {
            best = report.magnitude[k];
            report.dominant_frequency_hz = report.frequency_hz[k];
        }
    }
    return report;
}

Matrix distance_matrix(const WeightTrajectory& traj, long stride) {
    if (stride < 1) throw ConfigError("distance_matrix: stride must be >= 1");
    std::vector<long> idx;
    for (long i = 0; i < static_cast<long>(traj.size()); i += stride) idx.push_back(i);
    if (idx.size() < 2) throw InputError("distance_matrix: fewer than 2 snapshots after striding");

    const long m = static_cast<long>(idx.size());
    Matrix dist = Matrix::Zero(m, m);
    for (long p = 0; p < m; ++p) {
        for (long q = p + 1; q < m; ++q) {
            const double d = (traj.snapshots[idx[p]] - traj.snapshots[idx[q]]).norm();
            dist(p, q) = d;
            dist(q, p) = d;
        }
    }
    return dist;
}

} // namespace han
