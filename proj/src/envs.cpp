#include "han/envs.hpp"

#include <cmath>

namespace han {

long EnvSpec::substeps() const {
    const double ratio = control_period() / dt;
    const long n = static_cast<long>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9)
        throw ConfigError("physics dt must divide the control period exactly");
    return n;
}

void EnvSpec::validate() const {
    if (!(f_nn_hz > 0.0)) throw ConfigError("env: f_nn must be positive");
    if (!(dt > 0.0)) throw ConfigError("env: dt must be positive");
    if (episode_steps < 1) throw ConfigError("env: episode length must be >= 1");
    if (!(sigma_r > 0.0)) throw ConfigError("env: reward width must be positive");
    (void)substeps();
    if (kind == EnvKind::ChainCrawler) {
        if (num_masses < 2) throw ConfigError("chain crawler needs at least 2 masses");
        if (!(rest_length > 0.0) || !(spring_k > 0.0))
            throw ConfigError("chain crawler: rest length and stiffness must be positive");
    }
    if (!(mass > 0.0)) throw ConfigError("env: mass must be positive");
}

int EnvSpec::observation_dim() const {
    switch (kind) {
    case EnvKind::PointMassTracking:
        return 2;
    case EnvKind::ChainCrawler:
        return (num_masses - 1) + num_masses + 1;
    }
    return 0;
}

int EnvSpec::action_dim() const {
    return kind == EnvKind::PointMassTracking ? 1 : num_masses - 1;
}

void PerturbationSpec::validate(const EnvSpec& env) const {
    const double horizon = static_cast<double>(env.episode_steps) * env.control_period();
    for (const auto& e : events)
        if (e.time_s < 0.0 || e.time_s > horizon)
            throw ConfigError("perturbation time outside the episode");
    if (freeze_interval && freeze_interval->first > freeze_interval->second)
        throw ConfigError("freeze interval must be well ordered");
}

// ---------------------------------------------------------------------------
// RunningNormalizer

RunningNormalizer::RunningNormalizer(int dim)
    : mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)) {}

Vector RunningNormalizer::normalize(const Vector& obs) {
    const Vector out = peek(obs);
    update(obs);
    return out;
}

Vector RunningNormalizer::peek(const Vector& obs) const {
    if (obs.size() != mean_.size()) throw ConfigError("normalizer: dimension mismatch");
    if (count_ == 0) return Vector::Zero(obs.size());
    const Vector std = variance().cwiseSqrt().cwiseMax(1e-8);
    return (obs - mean_).cwiseQuotient(std);
}

void RunningNormalizer::update(const Vector& obs) {
    if (obs.size() != mean_.size()) throw ConfigError("normalizer: dimension mismatch");
    ++count_;
    const Vector delta = obs - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(obs - mean_);
}

void RunningNormalizer::merge(const RunningNormalizer& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
        *this = other;
        return;
    }
    if (other.mean_.size() != mean_.size()) throw ConfigError("normalizer merge: dimension mismatch");
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const Vector delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    m2_ += other.m2_ + delta.cwiseProduct(delta) * (na * nb / n);
    count_ += other.count_;
}

Vector RunningNormalizer::mean() const { return mean_; }

Vector RunningNormalizer::variance() const {
    if (count_ < 1) return Vector::Zero(mean_.size());
    return m2_ / static_cast<double>(count_);
}

void RunningNormalizer::restore(const Vector& mean, const Vector& m2, long count) {
    mean_ = mean;
    m2_ = m2;
    count_ = count;
}

// ---------------------------------------------------------------------------
// PointMassEnv

PointMassEnv::PointMassEnv(const EnvSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.kind != EnvKind::PointMassTracking) throw ConfigError("spec kind is not point mass");
}

Vector PointMassEnv::reset(std::uint64_t seed) {
    Rng rng(seed);
    v_ = spec_.v0_range > 0.0 ? rng.uniform(-spec_.v0_range, spec_.v0_range) : 0.0;
    t_ = 0;
    return observe();
}

Vector PointMassEnv::observe() const {
    Vector obs(2);
    obs << v_, spec_.v_target - v_;
    return obs;
}

void PointMassEnv::apply_perturbation(const PerturbationSpec& pert, long t) {
    for (const auto& e : pert.events) {
        const long step = static_cast<long>(std::llround(e.time_s / spec_.control_period()));
        if (step == t && e.impulse.size() >= 1) v_ += e.impulse(0) / spec_.mass;
    }
}

StepResult PointMassEnv::step(const Vector& action) {
    if (action.size() != 1) throw ConfigError("point mass: action must be 1-D");
    const double a = std::clamp(action(0), -1.0, 1.0);
    const long n = spec_.substeps();
    for (long s = 0; s < n; ++s)
        v_ += spec_.dt * (spec_.f_max * a - spec_.drag * v_) / spec_.mass;
    ++t_;

    StepResult result;
    result.observation = observe();
    const double err = v_ - spec_.v_target;
    result.reward = std::exp(-(err * err) / (spec_.sigma_r * spec_.sigma_r));
    result.done = t_ >= spec_.episode_steps;
    result.diverged = !std::isfinite(v_);
    result.tracked_velocity = v_;
    result.info = {v_};
    return result;
}

// ---------------------------------------------------------------------------
// ChainCrawlerEnv

ChainCrawlerEnv::ChainCrawlerEnv(const EnvSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.kind != EnvKind::ChainCrawler) throw ConfigError("spec kind is not chain crawler");
    x_ = Vector::Zero(spec_.num_masses);
    v_ = Vector::Zero(spec_.num_masses);
}

Vector ChainCrawlerEnv::reset(std::uint64_t seed) {
    Rng rng(seed);
    const int n = spec_.num_masses;
    x_.setZero();
    v_.setZero();
    // masses at natural spacing plus seeded per-joint extension offsets
    double pos = 0.0;
    x_(0) = 0.0;
    for (int i = 1; i < n; ++i) {
        double ext = 0.0;
        if (spec_.init_jitter > 0.0)
            ext = rng.uniform(-spec_.init_jitter, spec_.init_jitter) * spec_.rest_length;
        pos += spec_.rest_length + ext;
        x_(i) = pos;
    }
    t_ = 0;
    return observe();
}

Vector ChainCrawlerEnv::observe() const {
    const int n = spec_.num_masses;
    Vector obs(spec_.observation_dim());
    int at = 0;
    for (int i = 0; i < n - 1; ++i) obs(at++) = (x_(i + 1) - x_(i)) - spec_.rest_length;
    for (int i = 0; i < n; ++i) obs(at++) = v_(i);
    obs(at++) = v_(n - 1);
    return obs;
}

void ChainCrawlerEnv::apply_perturbation(const PerturbationSpec& pert, long t) {
    for (const auto& e : pert.events) {
        const long step = static_cast<long>(std::llround(e.time_s / spec_.control_period()));
        if (step != t) continue;
        for (Eigen::Index i = 0; i < std::min<Eigen::Index>(e.impulse.size(), v_.size()); ++i)
            v_(i) += e.impulse(i) / spec_.mass;
    }
}

StepResult ChainCrawlerEnv::step(const Vector& action) {
    const int n = spec_.num_masses;
    if (action.size() != n - 1) throw ConfigError("chain crawler: wrong action dimension");

    Vector rest(n - 1);
    for (int i = 0; i < n - 1; ++i) {
        const double a = std::clamp(action(i), -1.0, 1.0);
        rest(i) = spec_.rest_length * (1.0 + spec_.actuation_amplitude * a);
    }

    const long substeps = spec_.substeps();
    // velocity-sign smoothing scale; must satisfy g*mu*dt/v_eps < 1 so the
    // explicit friction update stays stable near v = 0
    const double v_eps = 0.1;
    for (long s = 0; s < substeps; ++s) {
        Vector force = Vector::Zero(n);
        for (int i = 0; i < n - 1; ++i) {
            const double stretch = (x_(i + 1) - x_(i)) - rest(i);
            const double f = spec_.spring_k * stretch;
            force(i) += f;
            force(i + 1) -= f;
        }
        for (int i = 0; i < n; ++i) {
            const double mu = v_(i) > 0.0 ? spec_.mu_forward
                              : v_(i) < 0.0 ? spec_.mu_backward
                                            : 0.5 * (spec_.mu_forward + spec_.mu_backward);
            force(i) -= spec_.mass * spec_.gravity * mu * std::tanh(v_(i) / v_eps);
            force(i) -= spec_.damping * v_(i);
        }
        // semi-implicit Euler: velocities first, then positions
        v_ += spec_.dt * force / spec_.mass;
        x_ += spec_.dt * v_;
    }
    ++t_;

    StepResult result;
    result.observation = observe();
    const double head_v = v_(n - 1);
    const double err = head_v - spec_.v_target;
    result.reward = std::exp(-(err * err) / (spec_.sigma_r * spec_.sigma_r));
    result.done = t_ >= spec_.episode_steps;
    result.diverged = !(x_.allFinite() && v_.allFinite());
    result.tracked_velocity = head_v;
    result.info.reserve(2 * n);
    for (int i = 0; i < n; ++i) result.info.push_back(x_(i));
    for (int i = 0; i < n; ++i) result.info.push_back(v_(i));
    return result;
}

double ChainCrawlerEnv::total_energy() const {
    double e = 0.5 * spec_.mass * v_.squaredNorm();
    for (int i = 0; i < spec_.num_masses - 1; ++i) {
        const double stretch = (x_(i + 1) - x_(i)) - spec_.rest_length;
        e += 0.5 * spec_.spring_k * stretch * stretch;
    }
    return e;
}

std::unique_ptr<Environment> make_environment(const EnvSpec& spec) {
    switch (spec.kind) {
    case EnvKind::PointMassTracking:
        return std::make_unique<PointMassEnv>(spec);
    case EnvKind::ChainCrawler:
        return std::make_unique<ChainCrawlerEnv>(spec);
    }
    throw ConfigError("unknown environment kind");
}

} // namespace han
