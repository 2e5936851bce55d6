#include "han/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <thread>

namespace han {

namespace fs = std::filesystem;

void ExperimentConfig::validate_and_resolve() {
    if (version != 1) throw ConfigError("unsupported config version");
    if (!plasticity.condition.empty()) {
        const ConditionPreset preset = condition_preset(plasticity.condition);
        plasticity.mode = preset.mode.kind == StabilizationKind::MaxNorm ? "max_norm" : "none";
        plasticity.m_window = preset.m_window;
        plasticity.f_hebb_hz = env.f_nn_hz / static_cast<double>(preset.ratio);
        plasticity.condition.clear();
    }
    env.validate();
    network_shape().validate();
    (void)schedule();
    (void)stabilization();
    if (plasticity.m_window < 1) throw ConfigError("m_window must be >= 1");
    if (plasticity.eta_mode != "evolved" && plasticity.eta_mode != "constant")
        throw ConfigError("eta_mode must be 'evolved' or 'constant'");
    if (activation != "tanh" && activation != "identity")
        throw ConfigError("activation must be 'tanh' or 'identity'");
    if (es_algo != "adaptive" && es_algo != "openai")
        throw ConfigError("es.algo must be 'adaptive' or 'openai'");
    if (train.generations < 0) throw ConfigError("train.generations must be >= 0");
    if (train.repeats < 1) throw ConfigError("train.repeats must be >= 1");
    if (train.eval_rollouts < 0) throw ConfigError("train.eval_rollouts must be >= 0");
    if (train.snapshot_stride < 1) throw ConfigError("train.snapshot_stride must be >= 1");
    if (!(analysis.rho > 0.0)) throw ConfigError("analysis.rho must be > 0");
    if (!(analysis.early_fraction > 0.0 && analysis.early_fraction < 1.0))
        throw ConfigError("analysis.early_fraction must be in (0, 1)");
}

NetworkShape ExperimentConfig::network_shape() const {
    std::vector<int> sizes;
    sizes.push_back(env.observation_dim());
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(env.action_dim());
    return NetworkShape(sizes);
}

UpdateSchedule ExperimentConfig::schedule() const {
    return UpdateSchedule(env.f_nn_hz, plasticity.f_hebb_hz);
}

StabilizationMode ExperimentConfig::stabilization() const {
    if (plasticity.mode == "max_norm") return StabilizationMode::max_norm();
    if (plasticity.mode == "clip") return StabilizationMode::clip(plasticity.clip_epsilon);
    if (plasticity.mode == "oja") return StabilizationMode::oja();
    if (plasticity.mode == "none") return StabilizationMode::none();
    throw ConfigError("unknown stabilization mode: " + plasticity.mode);
}

Activation ExperimentConfig::activation_kind() const {
    return activation == "identity" ? Activation::Identity : Activation::Tanh;
}

GenomeLayout ExperimentConfig::genome_layout() const {
    GenomeLayout layout;
    layout.shape = network_shape();
    layout.eta_mode = plasticity.eta_mode == "constant" ? EtaMode::Constant : EtaMode::Evolved;
    layout.eta_const = plasticity.eta_const;
    return layout;
}

PlasticityRule ExperimentConfig::rule_from_genome(const Vector& genome) const {
    PlasticityRule rule = decode(genome, genome_layout());
    rule.stabilization = stabilization();
    rule.schedule = schedule();
    return rule;
}

// ---------------------------------------------------------------------------
// Seed derivation. Path tags keep the streams disjoint by construction.

namespace {
enum SeedTag : std::uint64_t {
    kTagEs = 0,
    kTagEnv = 1,
    kTagWeights = 2,
    kTagEvalEnv = 3,
    kTagEvalWeights = 4,
    kTagGridCell = 5,
};
}

std::uint64_t es_seed(const ExperimentConfig& config) {
    return derive_seed(config.seed, {kTagEs});
}

std::uint64_t rollout_env_seed(const ExperimentConfig& config, long generation, int repeat,
                               int candidate) {
    const std::uint64_t who =
        config.train.shared_env_seed ? 0 : static_cast<std::uint64_t>(candidate) + 1;
    return derive_seed(config.seed, {kTagEnv, static_cast<std::uint64_t>(generation),
                                     static_cast<std::uint64_t>(repeat), who});
}

std::uint64_t rollout_weight_seed(const ExperimentConfig& config, long generation, int repeat,
                                  int candidate) {
    const std::uint64_t who =
        config.train.shared_env_seed ? 0 : static_cast<std::uint64_t>(candidate) + 1;
    return derive_seed(config.seed, {kTagWeights, static_cast<std::uint64_t>(generation),
                                     static_cast<std::uint64_t>(repeat), who});
}

std::uint64_t eval_env_seed(const ExperimentConfig& config, int rollout) {
    return derive_seed(config.seed, {kTagEvalEnv, static_cast<std::uint64_t>(rollout)});
}

std::uint64_t eval_weight_seed(const ExperimentConfig& config, int rollout) {
    return derive_seed(config.seed, {kTagEvalWeights, static_cast<std::uint64_t>(rollout)});
}

// ---------------------------------------------------------------------------
// Rollout

RolloutResult run_rollout(const ExperimentConfig& config, const PlasticityRule& rule,
                          std::uint64_t env_seed, std::uint64_t weight_seed,
                          RunningNormalizer& normalizer, const RolloutHooks& hooks) {
    const NetworkShape shape = config.network_shape();
    rule.check_shapes(shape);
    hooks.perturbation.validate(config.env);

    auto env = make_environment(config.env);
    Vector raw_obs = env->reset(env_seed);

    PlasticNetwork net(shape, config.plasticity.m_window, config.activation_kind());
    Rng weight_rng(weight_seed);
    net.init_weights_uniform(config.plasticity.weight_init, weight_rng);

    PlasticityRule active = rule;
    std::vector<CoefficientSwap> swaps = hooks.swaps;
    std::sort(swaps.begin(), swaps.end(),
              [](const CoefficientSwap& a, const CoefficientSwap& b) { return a.step < b.step; });
    size_t next_swap = 0;

    RolloutResult result;
    if (hooks.record_weights) {
        for (int k = 0; k < shape.num_weight_layers(); ++k)
            result.weights.layer_dims.emplace_back(shape.rows(k), shape.cols(k));
    }

    // the freeze interval may come as a direct hook or ride along with a
    // perturbation schedule
    std::optional<std::pair<long, long>> freeze_window = hooks.freeze;
    if (!freeze_window && hooks.perturbation.freeze_interval)
        freeze_window = hooks.perturbation.freeze_interval;

    const long T = config.env.episode_steps;
    for (long t = 0; t < T; ++t) {
        while (next_swap < swaps.size() && swaps[next_swap].step == t) {
            const PlasticityRule& incoming = swaps[next_swap].coefficients;
            incoming.check_shapes(shape);
            active.A = incoming.A;
            active.B = incoming.B;
            active.C = incoming.C;
            active.D = incoming.D;
            active.eta = incoming.eta;
            ++next_swap;
        }

        env->apply_perturbation(hooks.perturbation, t);

        const Vector obs = normalizer.normalize(raw_obs);
        const Vector action = net.forward(obs);
        const StepResult sr = env->step(action);

        const bool frozen =
            freeze_window && t >= freeze_window->first && t < freeze_window->second;
        bool updated = false;
        if (!frozen) {
            try {
                updated = scheduled_step(net, active, t);
            } catch (const NumericError&) {
                result.diverged = true;
            }
        }
        if (updated) result.update_steps.push_back(t);

        if (hooks.record_weights && t % hooks.snapshot_stride == 0)
            result.weights.push(t, net.flatten_weights());
        if (hooks.record_io) {
            result.observations.push_back(obs);
            result.actions.push_back(action);
        }
        result.rewards.push_back(sr.reward);
        result.head_velocity.push_back(sr.tracked_velocity);
        result.episode_return += sr.reward;
        result.steps = t + 1;

        if (sr.diverged) result.diverged = true;
        if (result.diverged) break;
        raw_obs = sr.observation;
    }

    if (result.diverged) result.episode_return = kDivergedFitnessFloor;
    return result;
}

double evaluate_genome(const ExperimentConfig& config, const Vector& genome, long generation,
                       int candidate) {
    const PlasticityRule rule = config.rule_from_genome(genome);
    RunningNormalizer normalizer(config.env.observation_dim());
    double total = 0.0;
    for (int r = 0; r < config.train.repeats; ++r) {
        const RolloutResult res =
            run_rollout(config, rule, rollout_env_seed(config, generation, r, candidate),
                        rollout_weight_seed(config, generation, r, candidate), normalizer);
        total += res.episode_return;
    }
    return total / static_cast<double>(config.train.repeats);
}

// ---------------------------------------------------------------------------
// Parallel evaluation

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (workers == 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min(workers, n);
    pool.reserve(count);
    for (int w = 0; w < count; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Meta-training

namespace {

GenerationStats population_stats(long generation, const std::vector<double>& fitness) {
    GenerationStats stats;
    stats.generation = generation;
    stats.best = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (double f : fitness) {
        stats.best = std::max(stats.best, f);
        sum += f;
    }
    stats.mean = sum / static_cast<double>(fitness.size());
    double sq = 0.0;
    for (double f : fitness) sq += (f - stats.mean) * (f - stats.mean);
    stats.stddev = std::sqrt(sq / static_cast<double>(fitness.size()));
    return stats;
}

AttractorReport analyze_rollout(const ExperimentConfig& config, const RolloutResult& res) {
    AttractorReport report;
    report.rho = config.analysis.rho;
    report.early_fraction = config.analysis.early_fraction;
    if (res.diverged || res.weights.size() < 2) {
        report.verdict = AttractorVerdict::Diverged;
        return report;
    }
    const std::vector<double> series = plasticity_series(res.weights);
    report = classify_convergence(series, config.analysis.rho, config.analysis.early_fraction);
    if (report.verdict == AttractorVerdict::LimitCycle && series.size() >= 8) {
        const double snapshot_rate =
            config.env.f_nn_hz / static_cast<double>(std::max<long>(1, config.train.snapshot_stride));
        report.dominant_frequency_hz = spectrum(series, snapshot_rate).dominant_frequency_hz;
    }
    return report;
}

} // namespace

RunRecord run_meta_training(const ExperimentConfig& input, const std::string& out_dir,
                            const std::string& resume_from,
                            const std::function<void(const GenerationStats&)>& on_generation) {
    const auto wall_start = std::chrono::steady_clock::now();
    ExperimentConfig config = input;
    config.validate_and_resolve();

    const GenomeLayout layout = config.genome_layout();
    const long dim = layout.dimension();
    const std::string hash = config_hash(config);

    std::unique_ptr<AdaptiveEs> adaptive;
    std::unique_ptr<OpenAiEs> openai;
    if (config.es_algo == "adaptive")
        adaptive = std::make_unique<AdaptiveEs>(config.adaptive, dim, es_seed(config));
    else
        openai = std::make_unique<OpenAiEs>(config.openai, dim, es_seed(config));

    long start_generation = 0;
    Vector best_genome = adaptive ? adaptive->mean() : openai->mean();
    double best_fitness = std::numeric_limits<double>::quiet_NaN();
    std::vector<GenerationStats> curve;

    if (!resume_from.empty()) {
        const Checkpoint ckpt = load_checkpoint(resume_from);
        if (ckpt.config_hash != hash)
            throw ConfigError("checkpoint was produced by a different configuration");
        start_generation = ckpt.generation;
        best_genome = ckpt.best_genome;
        best_fitness = ckpt.best_fitness;
        curve = ckpt.curve;
        if (adaptive) {
            adaptive->set_mean(ckpt.mean);
            adaptive->set_sigma(ckpt.sigma);
            adaptive->rng().restore(ckpt.rng_state);
        } else {
            openai->restore(ckpt.mean, ckpt.adam_m, ckpt.adam_v, ckpt.generation);
            openai->rng().restore(ckpt.rng_state);
        }
    }

    if (!out_dir.empty()) fs::create_directories(out_dir);

    const int population = adaptive ? adaptive->population() : openai->population();
    for (long g = start_generation; g < config.train.generations; ++g) {
        const std::vector<Vector> pop = adaptive ? adaptive->ask() : openai->ask();
        std::vector<double> fitness(population, 0.0);
        parallel_for(population, config.train.workers,
                     [&](int i) { fitness[i] = evaluate_genome(config, pop[i], g, i); });
        if (adaptive)
            adaptive->tell(pop, fitness);
        else
            openai->tell(fitness);

        const GenerationStats stats = population_stats(g, fitness);
        // elitist bookkeeping only; the search itself is not elitist
        const auto best_it = std::max_element(fitness.begin(), fitness.end());
        if (std::isnan(best_fitness) || *best_it > best_fitness) {
            best_fitness = *best_it;
            best_genome = pop[static_cast<size_t>(best_it - fitness.begin())];
        }
        curve.push_back(stats);
        if (on_generation) on_generation(stats);

        if (!out_dir.empty()) {
            Checkpoint ckpt;
            ckpt.algo = config.es_algo;
            ckpt.generation = g + 1;
            if (adaptive) {
                ckpt.mean = adaptive->mean();
                ckpt.sigma = adaptive->sigma();
                ckpt.rng_state = adaptive->rng().serialize();
            } else {
                ckpt.mean = openai->mean();
                ckpt.adam_m = openai->adam_m();
                ckpt.adam_v = openai->adam_v();
                ckpt.rng_state = openai->rng().serialize();
            }
            ckpt.best_genome = best_genome;
            ckpt.best_fitness = best_fitness;
            ckpt.curve = curve;
            ckpt.config_hash = hash;
            save_checkpoint(ckpt, (fs::path(out_dir) / "checkpoint.json").string());
            save_curve_csv(curve, (fs::path(out_dir) / "curve.csv").string());
        }
    }

    RunRecord record;
    record.config_hash = hash;
    record.curve = curve;
    record.best_genome = best_genome;
    record.best_fitness = best_fitness;

    if (config.train.generations > 0 && config.train.eval_rollouts > 0) {
        const PlasticityRule rule = config.rule_from_genome(best_genome);
        RolloutHooks hooks;
        hooks.record_weights = true;
        hooks.snapshot_stride = config.train.snapshot_stride;
        // one candidate under evaluation: its normalizer statistics persist
        // across all of its rollouts, as during fitness evaluation
        RunningNormalizer normalizer(config.env.observation_dim());
        for (int j = 0; j < config.train.eval_rollouts; ++j) {
            const RolloutResult res = run_rollout(config, rule, eval_env_seed(config, j),
                                                  eval_weight_seed(config, j), normalizer, hooks);
            record.eval_reports.push_back(analyze_rollout(config, res));
            if (!out_dir.empty() && j == 0)
                save_weight_trajectory_csv(res.weights,
                                           (fs::path(out_dir) / "eval_weights_0.csv").string());
        }
    }

    record.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

    if (!out_dir.empty()) {
        save_genome(best_genome, layout, (fs::path(out_dir) / "best_genome.json").string());
        save_coefficients(config.rule_from_genome(best_genome),
                          (fs::path(out_dir) / "best_coefficients.json").string());
        save_record(record, config, (fs::path(out_dir) / "record.json").string());
        save_curve_csv(curve, (fs::path(out_dir) / "curve.csv").string());
    }
    return record;
}

// ---------------------------------------------------------------------------
// Condition grid

GridResult run_condition_grid(const ExperimentConfig& base, const std::vector<int>& m_values,
                              const std::vector<double>& f_hebb_values, int seeds,
                              const std::string& out_dir) {
    if (m_values.empty() || f_hebb_values.empty() || seeds < 1)
        throw ConfigError("grid needs at least one M, one f_hebb and one seed");

    GridResult grid;
    grid.m_values = m_values;
    grid.f_hebb_values = f_hebb_values;
    const long rows = static_cast<long>(m_values.size());
    const long cols = static_cast<long>(f_hebb_values.size());
    grid.converged_ratio = Matrix::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
    grid.mean_fitness = Matrix::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());

    for (long mi = 0; mi < rows; ++mi) {
        for (long fi = 0; fi < cols; ++fi) {
            long fixed = 0, total = 0;
            double fitness_sum = 0.0;
            bool failed = false;
            for (int s = 0; s < seeds && !failed; ++s) {
                ExperimentConfig cell = base;
                cell.plasticity.condition.clear();
                cell.plasticity.m_window = m_values[mi];
                cell.plasticity.f_hebb_hz = f_hebb_values[fi];
                cell.seed = derive_seed(base.seed,
                                        {kTagGridCell, static_cast<std::uint64_t>(mi),
                                         static_cast<std::uint64_t>(fi), static_cast<std::uint64_t>(s)});
                try {
                    cell.validate_and_resolve();
                    const RunRecord record = run_meta_training(cell);
                    for (const auto& report : record.eval_reports) {
                        ++total;
                        if (report.verdict == AttractorVerdict::FixedPoint) ++fixed;
                    }
                    fitness_sum += record.best_fitness;
                } catch (const std::exception&) {
                    failed = true; // cell marked failed; the grid continues
                }
            }
            if (!failed && total > 0) {
                grid.converged_ratio(mi, fi) =
                    static_cast<double>(fixed) / static_cast<double>(total);
                grid.mean_fitness(mi, fi) = fitness_sum / static_cast<double>(seeds);
            }
        }
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        save_grid_csv(grid, out_dir);
    }
    return grid;
}

} // namespace han
