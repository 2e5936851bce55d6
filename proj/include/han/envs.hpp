#ifndef HAN_ENVS_HPP
#define HAN_ENVS_HPP

#include "han/rng.hpp"
#include "han/types.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace han {

enum class EnvKind { PointMassTracking, ChainCrawler };

/// Desk-scale continuous-control task description. The physics dt must
/// divide the control period exactly; each control step integrates
/// `substeps` physics steps under a held action.
struct EnvSpec {
    EnvKind kind = EnvKind::PointMassTracking;
    double f_nn_hz = 20.0;
    double dt = 0.01;
    long episode_steps = 1000;

    // reward
    double v_target = 1.0;
    double sigma_r = 0.25;

    // point mass
    double mass = 1.0;
    double f_max = 1.0;
    double drag = 0.5;
    double v0_range = 0.5; // initial velocity from U(-v0_range, v0_range)

    // chain crawler
    int num_masses = 5;
    double spring_k = 40.0;
    double damping = 2.0;
    double mu_forward = 0.1;
    double mu_backward = 0.6;
    double rest_length = 1.0;
    double actuation_amplitude = 0.3; // rest-length offset as a fraction of rest_length
    double init_jitter = 0.05;        // initial spring extension from U(-j, j) * rest_length
    double gravity = 9.81;

    double control_period() const { return 1.0 / f_nn_hz; }
    long substeps() const;
    void validate() const;

    int observation_dim() const;
    int action_dim() const;
};

/// One scheduled impulse: applied as a velocity jump impulse/mass at the
/// control step containing `time_s`.
struct PerturbationEvent {
    double time_s = 0.0;
    Vector impulse; // per velocity component of the environment state
};

struct PerturbationSpec {
    std::vector<PerturbationEvent> events;
    std::optional<std::pair<long, long>> freeze_interval; // [start, end) in control steps, consumed by the rollout

    void validate(const EnvSpec& env) const;
};

struct StepResult {
    Vector observation; // raw (un-normalized)
    double reward = 0.0;
    bool done = false;
    bool diverged = false;
    double tracked_velocity = 0.0; // the velocity the reward follows
    std::vector<double> info;      // true velocities/positions for analysis
};

/// Streaming mean/variance in Chan/Welford merge form. Normalization uses
/// the statistics from before the current sample, then folds the sample in.
class RunningNormalizer {
public:
    RunningNormalizer() = default;
    explicit RunningNormalizer(int dim);

    /// Normalize with pre-update statistics, then update them. The first
    /// sample normalizes to zeros.
    Vector normalize(const Vector& obs);

    /// Normalize without touching the statistics.
    Vector peek(const Vector& obs) const;

    void update(const Vector& obs);
    void merge(const RunningNormalizer& other);

    Vector mean() const;
    Vector variance() const;
    long count() const { return count_; }
    int dim() const { return static_cast<int>(mean_.size()); }

    const Vector& raw_mean() const { return mean_; }
    const Vector& raw_m2() const { return m2_; }
    void restore(const Vector& mean, const Vector& m2, long count);

private:
    Vector mean_;
    Vector m2_;
    long count_ = 0;
};

/// Common environment interface: deterministic under (spec, seed, actions).
class Environment {
public:
    virtual ~Environment() = default;
    virtual Vector reset(std::uint64_t seed) = 0;
    virtual StepResult step(const Vector& action) = 0;
    virtual const EnvSpec& spec() const = 0;
    /// Velocity-jump perturbation hook; no-op when nothing is scheduled at t.
    virtual void apply_perturbation(const PerturbationSpec& pert, long t) = 0;
};

/// 1-D velocity tracking: explicit Euler, quadratic-free drag, Gaussian
/// reward around the target velocity. Observation: [v, v_target - v].
class PointMassEnv final : public Environment {
public:
    explicit PointMassEnv(const EnvSpec& spec);

    Vector reset(std::uint64_t seed) override;
    StepResult step(const Vector& action) override;
    const EnvSpec& spec() const override { return spec_; }
    void apply_perturbation(const PerturbationSpec& pert, long t) override;

    double velocity() const { return v_; }

private:
    Vector observe() const;

    EnvSpec spec_;
    double v_ = 0.0;
    long t_ = 0;
};

/// Masses on a line joined by actuated springs over anisotropic Coulomb
/// ground friction; periodic actuation is required for net motion. Reward
/// tracks the head (last) mass velocity. Observation: spring extensions,
/// mass velocities, head velocity.
class ChainCrawlerEnv final : public Environment {
public:
    explicit ChainCrawlerEnv(const EnvSpec& spec);

    Vector reset(std::uint64_t seed) override;
    StepResult step(const Vector& action) override;
    const EnvSpec& spec() const override { return spec_; }
    void apply_perturbation(const PerturbationSpec& pert, long t) override;

    const Vector& positions() const { return x_; }
    const Vector& velocities() const { return v_; }
    double head_position() const { return x_(x_.size() - 1); }
    double total_energy() const;

private:
    Vector observe() const;

    EnvSpec spec_;
    Vector x_;
    Vector v_;
    long t_ = 0;
};

std::unique_ptr<Environment> make_environment(const EnvSpec& spec);

} // namespace han

#endif
