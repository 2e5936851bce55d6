#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "han/harness.hpp"

#include <filesystem>
#include <fstream>

using namespace han;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// minutes-scale defaults shrunk to test scale
ExperimentConfig micro_config() {
    ExperimentConfig config;
    config.seed = 42;
    config.env.kind = EnvKind::PointMassTracking;
    config.env.episode_steps = 120;
    config.hidden = {4};
    config.plasticity.condition = "E";
    config.adaptive.population = 8;
    config.train.generations = 4;
    config.train.repeats = 2;
    config.train.workers = 1;
    config.train.eval_rollouts = 2;
    return config;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("config JSON round-trip preserves every field") {
    ExperimentConfig config = micro_config();
    config.env.v_target = 1.75;
    config.plasticity.condition = "";
    config.plasticity.mode = "clip";
    config.plasticity.clip_epsilon = 2.5;
    config.es_algo = "openai";
    const std::string text = config_to_json_text(config);
    const ExperimentConfig back = config_from_json_text(text);
    CHECK(config_to_json_text(back) == text);
    CHECK(back.env.v_target == 1.75);
    CHECK(back.plasticity.clip_epsilon == 2.5);
    CHECK(back.es_algo == "openai");
}

TEST_CASE("partial configs fill defaults, unknown keys fail loudly") {
    const ExperimentConfig config =
        config_from_json_text(R"({"seed": 7, "env": {"v_target": 2.0}})");
    CHECK(config.seed == 7);
    CHECK(config.env.v_target == 2.0);
    CHECK(config.env.f_nn_hz == 20.0);
    CHECK(config.hidden == std::vector<int>{16});
    CHECK_THROWS_AS(config_from_json_text(R"({"sedd": 7})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"env": {"vtarget": 2.0}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text("not json"), ConfigError);
}

TEST_CASE("condition presets resolve onto explicit fields") {
    ExperimentConfig config = micro_config();
    config.plasticity.condition = "E";
    config.validate_and_resolve();
    CHECK(config.plasticity.mode == "max_norm");
    CHECK(config.plasticity.m_window == 10);
    CHECK(config.plasticity.f_hebb_hz == 5.0); // 20 Hz / 4
    CHECK(config.schedule().tau() == 4);

    ExperimentConfig a = micro_config();
    a.plasticity.condition = "A";
    a.validate_and_resolve();
    CHECK(a.plasticity.mode == "none");
    CHECK(a.schedule().tau() == 1);
}

TEST_CASE("set_config_path overrides nested values") {
    ExperimentConfig config = micro_config();
    set_config_path(config, "train.generations", "9");
    CHECK(config.train.generations == 9);
    set_config_path(config, "env.v_target", "1.25");
    CHECK(config.env.v_target == 1.25);
    set_config_path(config, "plasticity.mode", "clip");
    CHECK(config.plasticity.mode == "clip");
    CHECK_THROWS_AS(set_config_path(config, "nope.nope", "1"), ConfigError);
}

TEST_CASE("config hash ignores the worker count but not the seed") {
    ExperimentConfig config = micro_config();
    const std::string h = config_hash(config);
    ExperimentConfig other = config;
    other.train.workers = 8;
    CHECK(config_hash(other) == h);
    other.seed = 43;
    CHECK(config_hash(other) != h);
}

TEST_CASE("network shape derives from the environment") {
    ExperimentConfig config = micro_config();
    config.validate_and_resolve();
    CHECK(config.network_shape().layer_sizes == std::vector<int>{2, 4, 1});
    config.env.kind = EnvKind::ChainCrawler;
    CHECK(config.network_shape().layer_sizes == std::vector<int>{10, 4, 4});
}

TEST_CASE("seed derivation separates streams") {
    ExperimentConfig config = micro_config();
    CHECK(rollout_env_seed(config, 0, 0, 0) != rollout_env_seed(config, 0, 1, 0));
    CHECK(rollout_env_seed(config, 0, 0, 0) != rollout_env_seed(config, 1, 0, 0));
    CHECK(rollout_env_seed(config, 0, 0, 0) != rollout_weight_seed(config, 0, 0, 0));
    CHECK(eval_env_seed(config, 0) != eval_env_seed(config, 1));
    // common random numbers: candidate index must not matter when shared
    CHECK(rollout_env_seed(config, 2, 1, 0) == rollout_env_seed(config, 2, 1, 5));
    ExperimentConfig per_candidate = config;
    per_candidate.train.shared_env_seed = false;
    CHECK(rollout_env_seed(per_candidate, 2, 1, 0) != rollout_env_seed(per_candidate, 2, 1, 5));
}

TEST_CASE("rollout: freezing from step zero keeps weights constant") {
    ExperimentConfig config = micro_config();
    config.validate_and_resolve();
    Rng rng(1);
    const PlasticityRule rule =
        config.rule_from_genome(Vector::NullaryExpr(config.genome_layout().dimension(),
                                                    [&](Eigen::Index) { return rng.uniform(-1, 1); }));
    RolloutHooks hooks;
    hooks.freeze = std::make_pair(0L, config.env.episode_steps);
    hooks.record_weights = true;
    RunningNormalizer norm(config.env.observation_dim());
    const RolloutResult res = run_rollout(config, rule, 1, 2, norm, hooks);
    CHECK(res.update_steps.empty());
    for (double v : plasticity_series(res.weights)) CHECK(v == 0.0);
}

TEST_CASE("rollout: freeze interval riding on a perturbation spec is honored") {
    ExperimentConfig config = micro_config();
    config.validate_and_resolve();
    Rng rng(6);
    Vector genome(config.genome_layout().dimension());
    for (Eigen::Index i = 0; i < genome.size(); ++i) genome(i) = rng.uniform(-1.0, 1.0);
    const PlasticityRule rule = config.rule_from_genome(genome);
    RolloutHooks hooks;
    hooks.perturbation.freeze_interval = std::make_pair(0L, config.env.episode_steps);
    RunningNormalizer norm(config.env.observation_dim());
    const RolloutResult res = run_rollout(config, rule, 3, 4, norm, hooks);
    CHECK(res.update_steps.empty());
}

TEST_CASE("rollout: identity swap leaves the trajectory unchanged") {
    ExperimentConfig config = micro_config();
    config.validate_and_resolve();
    Rng rng(2);
    Vector genome(config.genome_layout().dimension());
    for (Eigen::Index i = 0; i < genome.size(); ++i) genome(i) = rng.uniform(-1.0, 1.0);
    const PlasticityRule rule = config.rule_from_genome(genome);

    RolloutHooks plain;
    plain.record_weights = true;
    RunningNormalizer n1(config.env.observation_dim());
    const RolloutResult base = run_rollout(config, rule, 5, 6, n1, plain);

    RolloutHooks swapped = plain;
    swapped.swaps.push_back({0, rule});
    RunningNormalizer n2(config.env.observation_dim());
    const RolloutResult with_swap = run_rollout(config, rule, 5, 6, n2, swapped);

    CHECK(base.episode_return == with_swap.episode_return);
    REQUIRE(base.weights.size() == with_swap.weights.size());
    for (size_t t = 0; t < base.weights.size(); ++t)
        CHECK((base.weights.snapshots[t] - with_swap.weights.snapshots[t]).cwiseAbs().maxCoeff() ==
              0.0);
}

TEST_CASE("rollout: first Hebbian tick lands on tau") {
    ExperimentConfig config = micro_config();
    config.validate_and_resolve();
    const PlasticityRule rule =
        config.rule_from_genome(Vector::Constant(config.genome_layout().dimension(), 0.3));
    RunningNormalizer norm(config.env.observation_dim());
    const RolloutResult res = run_rollout(config, rule, 1, 1, norm);
    REQUIRE(!res.update_steps.empty());
    CHECK(res.update_steps.front() == config.schedule().tau());
}

TEST_CASE("worker count does not change fitness") {
    ExperimentConfig config = micro_config();
    config.validate_and_resolve();
    Rng rng(3);
    std::vector<Vector> genomes;
    for (int i = 0; i < 4; ++i) {
        Vector g(config.genome_layout().dimension());
        for (Eigen::Index d = 0; d < g.size(); ++d) g(d) = rng.uniform(-1.0, 1.0);
        genomes.push_back(g);
    }
    std::vector<double> serial(4), threaded(4);
    parallel_for(4, 1, [&](int i) { serial[i] = evaluate_genome(config, genomes[i], 0, i); });
    parallel_for(4, 4, [&](int i) { threaded[i] = evaluate_genome(config, genomes[i], 0, i); });
    CHECK(serial == threaded);
}

TEST_CASE("meta-training is deterministic and monotone in best-so-far") {
    const ExperimentConfig config = micro_config();
    const RunRecord a = run_meta_training(config);
    const RunRecord b = run_meta_training(config);
    REQUIRE(a.curve.size() == b.curve.size());
    for (size_t g = 0; g < a.curve.size(); ++g) {
        CHECK(a.curve[g].best == b.curve[g].best);
        CHECK(a.curve[g].mean == b.curve[g].mean);
    }
    CHECK((a.best_genome - b.best_genome).cwiseAbs().maxCoeff() == 0.0);

    double best = -1e300;
    for (const auto& s : a.curve) {
        best = std::max(best, s.best);
    }
    CHECK(a.best_fitness == best);
    CHECK(static_cast<int>(a.eval_reports.size()) == config.train.eval_rollouts);
}

TEST_CASE("generations=0 yields a record holding only the initial state") {
    ExperimentConfig config = micro_config();
    config.train.generations = 0;
    const RunRecord record = run_meta_training(config);
    CHECK(record.curve.empty());
    CHECK(record.eval_reports.empty());
    CHECK(std::isnan(record.best_fitness));
    CHECK(record.best_genome.size() == config.genome_layout().dimension());
}

TEST_CASE("checkpoint resume equals the uninterrupted run") {
    TempDir full_dir("han_test_full"), half_dir("han_test_half");
    ExperimentConfig config = micro_config();
    config.train.generations = 6;
    const RunRecord full = run_meta_training(config, full_dir.path.string());

    ExperimentConfig half = config;
    half.train.generations = 3;
    run_meta_training(half, half_dir.path.string());
    // resume the remaining generations from the half checkpoint
    const RunRecord resumed =
        run_meta_training(config, half_dir.path.string(),
                          (half_dir.path / "checkpoint.json").string());

    REQUIRE(resumed.curve.size() == full.curve.size());
    for (size_t g = 0; g < full.curve.size(); ++g) {
        CHECK(resumed.curve[g].best == full.curve[g].best);
        CHECK(resumed.curve[g].mean == full.curve[g].mean);
        CHECK(resumed.curve[g].stddev == full.curve[g].stddev);
    }
    CHECK((resumed.best_genome - full.best_genome).cwiseAbs().maxCoeff() == 0.0);
    CHECK(slurp(half_dir.path / "checkpoint.json") == slurp(full_dir.path / "checkpoint.json"));
    CHECK(slurp(half_dir.path / "curve.csv") == slurp(full_dir.path / "curve.csv"));
}

TEST_CASE("openai-es training checkpoints and resumes identically") {
    TempDir full_dir("han_test_oai_full"), half_dir("han_test_oai_half");
    ExperimentConfig config = micro_config();
    config.es_algo = "openai";
    config.openai.population = 8;
    config.train.generations = 4;
    const RunRecord full = run_meta_training(config, full_dir.path.string());
    CHECK(full.curve.size() == 4);

    ExperimentConfig half = config;
    half.train.generations = 2;
    run_meta_training(half, half_dir.path.string());
    const RunRecord resumed = run_meta_training(
        config, half_dir.path.string(), (half_dir.path / "checkpoint.json").string());
    REQUIRE(resumed.curve.size() == full.curve.size());
    for (size_t g = 0; g < full.curve.size(); ++g) CHECK(resumed.curve[g].best == full.curve[g].best);
    CHECK(slurp(half_dir.path / "checkpoint.json") == slurp(full_dir.path / "checkpoint.json"));
}

TEST_CASE("resume rejects a checkpoint from another configuration") {
    TempDir dir("han_test_mismatch");
    ExperimentConfig config = micro_config();
    run_meta_training(config, dir.path.string());
    ExperimentConfig other = config;
    other.seed = 999;
    CHECK_THROWS_AS(
        run_meta_training(other, "", (dir.path / "checkpoint.json").string()), ConfigError);
}

TEST_CASE("checkpoint save-load-save is byte identical") {
    TempDir dir("han_test_ckpt");
    ExperimentConfig config = micro_config();
    run_meta_training(config, dir.path.string());
    const fs::path first = dir.path / "checkpoint.json";
    const Checkpoint ckpt = load_checkpoint(first.string());
    const fs::path second = dir.path / "checkpoint2.json";
    save_checkpoint(ckpt, second.string());
    CHECK(slurp(first) == slurp(second));
}

TEST_CASE("corrupt or mismatched files load with IoError") {
    TempDir dir("han_test_corrupt");
    const fs::path bad = dir.path / "bad.json";
    std::ofstream(bad) << "{ definitely not";
    CHECK_THROWS_AS(load_checkpoint(bad.string()), IoError);
    std::ofstream(bad, std::ios::trunc) << R"({"format":"other","version":1})";
    CHECK_THROWS_AS(load_checkpoint(bad.string()), IoError);
    std::ofstream(bad, std::ios::trunc)
        << R"({"format":"han-checkpoint","version":99})";
    CHECK_THROWS_AS(load_checkpoint(bad.string()), IoError);
    CHECK_THROWS_AS(load_checkpoint((dir.path / "missing.json").string()), IoError);
}

TEST_CASE("genome files round-trip and validate the layout") {
    TempDir dir("han_test_genome");
    ExperimentConfig config = micro_config();
    config.validate_and_resolve();
    const GenomeLayout layout = config.genome_layout();
    Rng rng(9);
    Vector genome(layout.dimension());
    for (Eigen::Index i = 0; i < genome.size(); ++i) genome(i) = rng.uniform(-1.0, 1.0);
    const fs::path path = dir.path / "genome.json";
    save_genome(genome, layout, path.string());
    const Vector loaded = load_genome(path.string(), layout);
    CHECK((loaded - genome).cwiseAbs().maxCoeff() == 0.0);

    GenomeLayout wrong = layout;
    wrong.shape = NetworkShape({3, 4, 1});
    CHECK_THROWS_AS(load_genome(path.string(), wrong), ConfigError);
}

TEST_CASE("weight trajectory CSV round-trips") {
    TempDir dir("han_test_traj");
    WeightTrajectory traj;
    traj.layer_dims = {{2, 2}, {1, 2}};
    Rng rng(11);
    for (long t = 0; t < 5; ++t) {
        Vector v(6);
        for (int i = 0; i < 6; ++i) v(i) = rng.uniform(-1.0, 1.0);
        traj.push(t * 2, v);
    }
    const fs::path path = dir.path / "weights.csv";
    save_weight_trajectory_csv(traj, path.string());
    const WeightTrajectory loaded = load_weight_trajectory_csv(path.string());
    REQUIRE(loaded.size() == traj.size());
    CHECK(loaded.layer_dims == traj.layer_dims);
    CHECK(loaded.steps == traj.steps);
    for (size_t t = 0; t < traj.size(); ++t)
        CHECK((loaded.snapshots[t] - traj.snapshots[t]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a 1x1 grid reduces to one meta-training cell") {
    TempDir dir("han_test_grid");
    ExperimentConfig config = micro_config();
    config.train.generations = 2;
    config.train.eval_rollouts = 2;
    const GridResult grid = run_condition_grid(config, {10}, {5.0}, 1, dir.path.string());
    CHECK(grid.converged_ratio.rows() == 1);
    CHECK(grid.converged_ratio.cols() == 1);
    CHECK(std::isfinite(grid.converged_ratio(0, 0)));
    CHECK(grid.converged_ratio(0, 0) >= 0.0);
    CHECK(grid.converged_ratio(0, 0) <= 1.0);

    const std::string csv = slurp(dir.path / "grid_converged.csv");
    CHECK(csv.rfind("M,5\n10,", 0) == 0); // axes labels echo the request
}

TEST_CASE("grid marks failing cells and continues") {
    ExperimentConfig config = micro_config();
    config.train.generations = 1;
    config.train.eval_rollouts = 1;
    // f_hebb above f_nn is invalid -> that cell fails, the other succeeds
    const GridResult grid = run_condition_grid(config, {1}, {40.0, 20.0}, 1);
    CHECK(std::isnan(grid.converged_ratio(0, 0)));
    CHECK(std::isfinite(grid.converged_ratio(0, 1)));
}

TEST_CASE("grid corners: slow smoothed updates converge at least as often") {
    ExperimentConfig config = micro_config();
    config.env.episode_steps = 400;
    config.adaptive.population = 16;
    config.train.generations = 10;
    config.train.eval_rollouts = 5;
    config.train.workers = 0;
    const GridResult grid = run_condition_grid(config, {1, 20}, {1.0, 20.0}, 1);
    const double slow_smoothed = grid.converged_ratio(1, 0); // M=20, f_hebb=1
    const double fast_instant = grid.converged_ratio(0, 1);  // M=1, f_hebb=20
    CHECK(slow_smoothed >= fast_instant);
}
