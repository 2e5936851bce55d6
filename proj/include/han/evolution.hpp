#ifndef HAN_EVOLUTION_HPP
#define HAN_EVOLUTION_HPP

#include "han/plasticity.hpp"
#include "han/rng.hpp"
#include "han/types.hpp"

#include <cstdint>
#include <vector>

namespace han {

/// Flat vector of evolvable rule parameters. Layout: per weight layer, blocks
/// A, B, C, D (then eta when evolved), each row-major. Stable and documented
/// because genome files are an on-disk format.
struct GenomeLayout {
    NetworkShape shape;
    EtaMode eta_mode = EtaMode::Evolved;
    double eta_const = 0.01; // used when eta_mode == Constant

    long dimension() const {
        const long per_conn = eta_mode == EtaMode::Evolved ? 5 : 4;
        return per_conn * shape.num_connections();
    }
};

Vector encode(const PlasticityRule& rule, const GenomeLayout& layout);
/// Inverse of encode; schedule/stabilization are not part of the genome and
/// are left at their defaults. Length mismatch raises ConfigError.
PlasticityRule decode(const Vector& genome, const GenomeLayout& layout);

/// Rank-based fitness shaping: ranks mapped linearly onto [-0.5, +0.5] with
/// the best candidate at +0.5. Ties share their average rank, so a flat
/// fitness vector shapes to all zeros. Output sums to zero and is invariant
/// under strictly monotone transforms of the input.
std::vector<double> center_rank(const std::vector<double>& fitness);

struct AdaptiveEsConfig {
    int population = 128;
    double sigma_init = 0.5;
    double c_mu = 1.0;
    double c_sigma = 0.1;
    double selection_ratio = 0.1;
    double mean_init_range = 1.0; // mean drawn from U(-range, range)
};

/// Truncation ES with per-dimension step size adaptation. ask() samples
/// mu + sigma*z; tell() recombines the top ~10% and blends sigma toward the
/// parents' per-dimension RMS deviation from the pre-update mean.
class AdaptiveEs {
public:
    AdaptiveEs(const AdaptiveEsConfig& config, long dimension, std::uint64_t seed);

    std::vector<Vector> ask();
    /// NaN fitness ranks last; ties break on lower candidate index.
    void tell(const std::vector<Vector>& population, const std::vector<double>& fitness);

    const Vector& mean() const { return mean_; }
    const Vector& sigma() const { return sigma_; }
    void set_mean(const Vector& mean) { mean_ = mean; }
    void set_sigma(const Vector& sigma) { sigma_ = sigma; }
    int population() const { return config_.population; }
    int num_parents() const;
    const AdaptiveEsConfig& config() const { return config_; }

    Rng& rng() { return rng_; }

private:
    AdaptiveEsConfig config_;
    Vector mean_;
    Vector sigma_;
    Rng rng_;
};

struct OpenAiEsConfig {
    int population = 512;
    double lr_init = 0.1;
    double lr_decay = 0.999;
    double sigma_init = 0.2;
    double sigma_decay = 0.995;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool mirrored = true;
    double mean_init_range = 1.0;
};

/// Natural-gradient style ES: center-ranked fitness weights the sampled
/// noise into a search gradient, Adam ascends the mean, and both the learning
/// rate and the mutation strength follow exponential decay schedules.
class OpenAiEs {
public:
    OpenAiEs(const OpenAiEsConfig& config, long dimension, std::uint64_t seed);

    std::vector<Vector> ask();
    void tell(const std::vector<double>& fitness);

    const Vector& mean() const { return mean_; }
    void set_mean(const Vector& mean) { mean_ = mean; }
    /// Schedules are computed from the generation counter so they follow
    /// init * decay^g exactly.
    double learning_rate() const;
    double sigma() const;
    long generation() const { return generation_; }
    int population() const { return config_.population; }
    const OpenAiEsConfig& config() const { return config_; }

    Rng& rng() { return rng_; }

    // checkpoint access
    const Vector& adam_m() const { return adam_m_; }
    const Vector& adam_v() const { return adam_v_; }
    void restore(const Vector& mean, const Vector& m, const Vector& v, long generation);

private:
    OpenAiEsConfig config_;
    Vector mean_;
    Vector adam_m_;
    Vector adam_v_;
    long generation_ = 0;
    std::vector<Vector> noise_; // z per candidate of the pending ask
    Rng rng_;
};

} // namespace han

#endif
