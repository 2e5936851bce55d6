#ifndef HAN_HARNESS_HPP
#define HAN_HARNESS_HPP

#include "han/analysis.hpp"
#include "han/envs.hpp"
#include "han/evolution.hpp"
#include "han/network.hpp"
#include "han/plasticity.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace han {

/// Fitness assigned to rollouts whose weights went non-finite.
inline constexpr double kDivergedFitnessFloor = -1e6;

struct PlasticityConfig {
    std::string condition;      // "", or one of A..E; overrides the explicit fields
    std::string mode = "max_norm"; // max_norm | clip | oja | none
    double clip_epsilon = 5.0;
    int m_window = 10;
    double f_hebb_hz = 5.0;
    std::string eta_mode = "evolved"; // evolved | constant
    double eta_const = 0.01;
    double weight_init = 0.1; // plastic weights from U(-w, w) at every rollout
};

struct TrainConfig {
    int generations = 150;
    int repeats = 4;     // episodes averaged into one fitness value
    int workers = 0;     // 0 = hardware concurrency; never affects results
    bool shared_env_seed = true; // common random numbers across the population
    int eval_rollouts = 10;      // post-training rollouts fed to the classifier
    long snapshot_stride = 1;
};

struct AnalysisConfig {
    double rho = 0.9;
    double early_fraction = 0.05;
};

struct ExperimentConfig {
    int version = 1;
    std::uint64_t seed = 1;
    EnvSpec env;
    std::vector<int> hidden = {16};
    std::string activation = "tanh"; // identity exists for linear-rule experiments
    PlasticityConfig plasticity;
    std::string es_algo = "adaptive"; // adaptive | openai
    AdaptiveEsConfig adaptive;
    OpenAiEsConfig openai;
    TrainConfig train;
    AnalysisConfig analysis;

    /// Applies the condition preset (if any) onto the explicit plasticity
    /// fields and checks every module constraint. Must run before use.
    void validate_and_resolve();

    NetworkShape network_shape() const;
    UpdateSchedule schedule() const;
    StabilizationMode stabilization() const;
    Activation activation_kind() const;
    GenomeLayout genome_layout() const;
    PlasticityRule rule_from_genome(const Vector& genome) const;
};

// Config <-> JSON. Unknown keys are rejected so typos fail loudly.
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config, int indent = 2);
/// Dotted-path override, e.g. set_config_path(cfg, "train.generations", "300").
void set_config_path(ExperimentConfig& config, const std::string& path, const std::string& value);
/// FNV-1a hash of the canonical config JSON, excluding fields that cannot
/// affect results (worker count).
std::string config_hash(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Seed derivation: master -> per-use streams via counter paths, so neither
// evaluation order nor worker count can shift any stream.

std::uint64_t es_seed(const ExperimentConfig& config);
std::uint64_t rollout_env_seed(const ExperimentConfig& config, long generation, int repeat,
                               int candidate);
std::uint64_t rollout_weight_seed(const ExperimentConfig& config, long generation, int repeat,
                                  int candidate);
std::uint64_t eval_env_seed(const ExperimentConfig& config, int rollout);
std::uint64_t eval_weight_seed(const ExperimentConfig& config, int rollout);

// ---------------------------------------------------------------------------
// Rollouts

struct CoefficientSwap {
    long step = 0;
    PlasticityRule coefficients; // only A..D and eta are taken
};

struct RolloutHooks {
    std::optional<std::pair<long, long>> freeze; // Hebbian updates skipped for t in [first, second)
    PerturbationSpec perturbation;
    std::vector<CoefficientSwap> swaps;
    bool record_weights = false;
    long snapshot_stride = 1;
    bool record_io = false; // keep per-step observations/actions
};

struct RolloutResult {
    double episode_return = 0.0;
    bool diverged = false;
    long steps = 0;
    WeightTrajectory weights;
    std::vector<double> rewards;
    std::vector<double> head_velocity;
    std::vector<Vector> observations; // normalized, as consumed by the network
    std::vector<Vector> actions;
    std::vector<long> update_steps; // control steps where a Hebbian tick fired
};

/// One full episode: normalize -> forward -> act -> scheduled Hebbian update.
/// The normalizer is caller-owned so its statistics can persist across the
/// repeats of one fitness evaluation.
RolloutResult run_rollout(const ExperimentConfig& config, const PlasticityRule& rule,
                          std::uint64_t env_seed, std::uint64_t weight_seed,
                          RunningNormalizer& normalizer, const RolloutHooks& hooks = {});

/// Mean episodic return over the configured repeats (fresh normalizer,
/// persisted across repeats). Diverged repeats contribute the fitness floor.
double evaluate_genome(const ExperimentConfig& config, const Vector& genome, long generation,
                       int candidate);

// ---------------------------------------------------------------------------
// Meta-training

struct GenerationStats {
    long generation = 0;
    double best = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct Checkpoint {
    int version = 1;
    std::string algo;
    long generation = 0; // number of completed generations
    Vector mean;
    Vector sigma;  // adaptive
    Vector adam_m; // openai
    Vector adam_v;
    std::array<std::uint64_t, 4> rng_state{};
    Vector best_genome;
    double best_fitness = kDivergedFitnessFloor;
    std::vector<GenerationStats> curve;
    std::string config_hash;
};

struct RunRecord {
    std::string config_hash;
    std::vector<GenerationStats> curve;
    Vector best_genome;
    double best_fitness = kDivergedFitnessFloor;
    std::vector<AttractorReport> eval_reports;
    double wall_clock_s = 0.0; // excluded from the determinism contract
};

/// Full ask -> evaluate -> tell loop with per-generation checkpoints (when
/// out_dir is non-empty) and post-training evaluation rollouts. Resumes from
/// `resume_from` when given; the resumed run is observationally identical to
/// an uninterrupted one.
RunRecord run_meta_training(const ExperimentConfig& config, const std::string& out_dir = "",
                            const std::string& resume_from = "",
                            const std::function<void(const GenerationStats&)>& on_generation = {});

// ---------------------------------------------------------------------------
// Condition grid

struct GridResult {
    std::vector<int> m_values;
    std::vector<double> f_hebb_values;
    Matrix converged_ratio; // m x f cells; NaN marks a failed cell
    Matrix mean_fitness;
};

/// Meta-training plus evaluation/classification per (M, f_hebb) cell over
/// several master seeds. A failing cell is marked and the grid continues.
GridResult run_condition_grid(const ExperimentConfig& base, const std::vector<int>& m_values,
                              const std::vector<double>& f_hebb_values, int seeds,
                              const std::string& out_dir = "");

// ---------------------------------------------------------------------------
// Persistence (all JSON/CSV; save->load->save is byte identical)

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void save_genome(const Vector& genome, const GenomeLayout& layout, const std::string& path);
Vector load_genome(const std::string& path, const GenomeLayout& expected_layout);

void save_coefficients(const PlasticityRule& rule, const std::string& path);
PlasticityRule load_coefficients(const std::string& path);

void save_record(const RunRecord& record, const ExperimentConfig& config, const std::string& path);

void save_curve_csv(const std::vector<GenerationStats>& curve, const std::string& path);
void save_weight_trajectory_csv(const WeightTrajectory& traj, const std::string& path);
WeightTrajectory load_weight_trajectory_csv(const std::string& path);
void save_series_csv(const std::vector<double>& series, const std::string& path,
                     const std::string& column = "value");
void save_attractor_report(const AttractorReport& report, const std::string& path);
void save_spectrum_csv(const SpectrumReport& report, const std::string& path);
void save_pca_csv(const PcaResult& pca, const std::string& path);
void save_rollout_io_csv(const RolloutResult& result, const std::string& path,
                         const std::string& weights_csv_name);
/// Writes grid_converged.csv and grid_fitness.csv with M rows and one column
/// per requested f_hebb value; failed cells print as "failed".
void save_grid_csv(const GridResult& grid, const std::string& out_dir);

/// Run every index in [0, n) on `workers` threads (0 = hardware concurrency),
/// collecting results by index so the schedule cannot affect output.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

} // namespace han

#endif
