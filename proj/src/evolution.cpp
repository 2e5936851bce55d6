#include "han/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace han {

namespace {

void write_block(Vector& genome, Eigen::Index& at, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) genome(at++) = m(i, j);
}

void read_block(const Vector& genome, Eigen::Index& at, Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = genome(at++);
}

} // namespace

Vector encode(const PlasticityRule& rule, const GenomeLayout& layout) {
    rule.check_shapes(layout.shape);
    Vector genome(layout.dimension());
    Eigen::Index at = 0;
    for (int k = 0; k < rule.num_weight_layers(); ++k) {
        write_block(genome, at, rule.A[k]);
        write_block(genome, at, rule.B[k]);
        write_block(genome, at, rule.C[k]);
        write_block(genome, at, rule.D[k]);
        if (layout.eta_mode == EtaMode::Evolved) write_block(genome, at, rule.eta[k]);
    }
    return genome;
}

PlasticityRule decode(const Vector& genome, const GenomeLayout& layout) {
    if (genome.size() != layout.dimension())
        throw ConfigError("decode: genome length " + std::to_string(genome.size()) +
                          " does not match layout dimension " + std::to_string(layout.dimension()));
    PlasticityRule rule = PlasticityRule::zeros(layout.shape);
    rule.eta_mode = layout.eta_mode;
    Eigen::Index at = 0;
    for (int k = 0; k < rule.num_weight_layers(); ++k) {
        read_block(genome, at, rule.A[k]);
        read_block(genome, at, rule.B[k]);
        read_block(genome, at, rule.C[k]);
        read_block(genome, at, rule.D[k]);
        if (layout.eta_mode == EtaMode::Evolved)
            read_block(genome, at, rule.eta[k]);
        else
            rule.eta[k].setConstant(layout.eta_const);
    }
    return rule;
}

std::vector<double> center_rank(const std::vector<double>& fitness) {
    const size_t n = fitness.size();
    if (n < 2) throw ConfigError("center_rank needs at least two fitness values");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // ascending; NaN sorts first (worst), ties keep index order
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const bool na = std::isnan(fitness[a]), nb = std::isnan(fitness[b]);
        if (na != nb) return na;
        if (na && nb) return a < b;
        if (fitness[a] != fitness[b]) return fitness[a] < fitness[b];
        return a < b;
    });

    // average ranks across ties so equal fitness gets equal shaped values
    std::vector<double> rank(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        auto same = [&](size_t p, size_t q) {
            const double a = fitness[order[p]], b = fitness[order[q]];
            return (std::isnan(a) && std::isnan(b)) || a == b;
        };
        while (j + 1 < n && same(i, j + 1)) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j));
        for (size_t p = i; p <= j; ++p) rank[order[p]] = avg;
        i = j + 1;
    }

    std::vector<double> shaped(n);
    for (size_t k = 0; k < n; ++k) shaped[k] = rank[k] / static_cast<double>(n - 1) - 0.5;
    return shaped;
}

// ---------------------------------------------------------------------------
// AdaptiveES

AdaptiveEs::AdaptiveEs(const AdaptiveEsConfig& config, long dimension, std::uint64_t seed)
    : config_(config), rng_(seed) {
    if (config_.population < 2) throw ConfigError("AdaptiveES population must be >= 2");
    if (!(config_.sigma_init > 0.0)) throw ConfigError("AdaptiveES sigma_init must be > 0");
    if (!(config_.selection_ratio > 0.0 && config_.selection_ratio <= 1.0))
        throw ConfigError("AdaptiveES selection ratio must be in (0, 1]");
    mean_ = Vector(dimension);
    for (Eigen::Index i = 0; i < dimension; ++i)
        mean_(i) = rng_.uniform(-config_.mean_init_range, config_.mean_init_range);
    sigma_ = Vector::Constant(dimension, config_.sigma_init);
}

int AdaptiveEs::num_parents() const {
    return static_cast<int>(
        std::ceil(config_.selection_ratio * static_cast<double>(config_.population)));
}

std::vector<Vector> AdaptiveEs::ask() {
    std::vector<Vector> population;
    population.reserve(config_.population);
    for (int i = 0; i < config_.population; ++i) {
        Vector x(mean_.size());
        for (Eigen::Index d = 0; d < mean_.size(); ++d)
            x(d) = mean_(d) + sigma_(d) * rng_.normal();
        population.push_back(std::move(x));
    }
    return population;
}

void AdaptiveEs::tell(const std::vector<Vector>& population, const std::vector<double>& fitness) {
    if (population.size() != fitness.size() ||
        static_cast<int>(population.size()) != config_.population)
        throw ConfigError("AdaptiveES tell: population/fitness size mismatch");

    std::vector<size_t> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    // descending fitness, NaN last, ties broken by lower candidate index
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const bool na = std::isnan(fitness[a]), nb = std::isnan(fitness[b]);
        if (na != nb) return nb;
        if (na && nb) return a < b;
        if (fitness[a] != fitness[b]) return fitness[a] > fitness[b];
        return a < b;
    });

    const int parents = num_parents();
    const double w = 1.0 / static_cast<double>(parents);

    // deviations from the pre-update mean for both the recombination step and
    // the step-size estimate
    Vector y_w = Vector::Zero(mean_.size());
    Vector second_moment = Vector::Zero(mean_.size());
    for (int p = 0; p < parents; ++p) {
        const Vector dev = population[order[p]] - mean_;
        y_w += w * dev;
        second_moment += w * dev.cwiseProduct(dev);
    }

    mean_ += config_.c_mu * y_w;
    const Vector sigma_hat = second_moment.cwiseSqrt();
    sigma_ = (1.0 - config_.c_sigma) * sigma_ + config_.c_sigma * sigma_hat;
}

// ---------------------------------------------------------------------------
// OpenAI-ES

OpenAiEs::OpenAiEs(const OpenAiEsConfig& config, long dimension, std::uint64_t seed)
    : config_(config), rng_(seed) {
    if (config_.population < 2) throw ConfigError("OpenAI-ES population must be >= 2");
    if (config_.mirrored && config_.population % 2 != 0)
        throw ConfigError("OpenAI-ES population must be even with mirrored sampling");
    if (!(config_.lr_init > 0.0) || !(config_.sigma_init > 0.0))
        throw ConfigError("OpenAI-ES schedules must start positive");
    mean_ = Vector(dimension);
    for (Eigen::Index i = 0; i < dimension; ++i)
        mean_(i) = rng_.uniform(-config_.mean_init_range, config_.mean_init_range);
    adam_m_ = Vector::Zero(dimension);
    adam_v_ = Vector::Zero(dimension);
}

double OpenAiEs::learning_rate() const {
    return config_.lr_init * std::pow(config_.lr_decay, static_cast<double>(generation_));
}

double OpenAiEs::sigma() const {
    return config_.sigma_init * std::pow(config_.sigma_decay, static_cast<double>(generation_));
}

std::vector<Vector> OpenAiEs::ask() {
    const double sig = sigma();
    noise_.clear();
    noise_.reserve(config_.population);
    if (config_.mirrored) {
        for (int i = 0; i < config_.population / 2; ++i) {
            Vector z(mean_.size());
            for (Eigen::Index d = 0; d < mean_.size(); ++d) z(d) = rng_.normal();
            noise_.push_back(z);
            noise_.push_back(-z);
        }
    } else {
        for (int i = 0; i < config_.population; ++i) {
            Vector z(mean_.size());
            for (Eigen::Index d = 0; d < mean_.size(); ++d) z(d) = rng_.normal();
            noise_.push_back(std::move(z));
        }
    }
    std::vector<Vector> population;
    population.reserve(config_.population);
    for (const auto& z : noise_) population.push_back(mean_ + sig * z);
    return population;
}

void OpenAiEs::tell(const std::vector<double>& fitness) {
    if (static_cast<int>(fitness.size()) != config_.population ||
        noise_.size() != fitness.size())
        throw ConfigError("OpenAI-ES tell: fitness size mismatch (call ask first)");

    const std::vector<double> shaped = center_rank(fitness);
    const double sig = sigma();
    Vector grad = Vector::Zero(mean_.size());
    for (size_t i = 0; i < noise_.size(); ++i) grad += shaped[i] * noise_[i];
    grad /= static_cast<double>(config_.population) * sig;

    // Adam ascent on the mean with the current scheduled learning rate.
    const double lr = learning_rate();
    adam_m_ = config_.adam_beta1 * adam_m_ + (1.0 - config_.adam_beta1) * grad;
    adam_v_ = config_.adam_beta2 * adam_v_ + (1.0 - config_.adam_beta2) * grad.cwiseProduct(grad);
    const double t = static_cast<double>(generation_ + 1);
    const Vector m_hat = adam_m_ / (1.0 - std::pow(config_.adam_beta1, t));
    const Vector v_hat = adam_v_ / (1.0 - std::pow(config_.adam_beta2, t));
    mean_ += lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt() + Vector::Constant(mean_.size(), config_.adam_eps));

    ++generation_;
    noise_.clear();
}

void OpenAiEs::restore(const Vector& mean, const Vector& m, const Vector& v, long generation) {
    mean_ = mean;
    adam_m_ = m;
    adam_v_ = v;
    generation_ = generation;
    noise_.clear();
}

} // namespace han
