// Batch CLI for Hebbian attractor network experiments. Talks to the library
// exclusively through the C API in han/han.h; exit codes are the han_status
// values (0 ok, 1 usage/config, 2 numeric divergence, 3 i/o).

#include <han/han.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

int finish(han_status status) {
    if (status != HAN_OK)
        std::fprintf(stderr, "error (%s): %s\n", han_status_name(status), han_last_error());
    return static_cast<int>(status);
}

struct ExperimentGuard {
    han_experiment* handle = nullptr;
    ~ExperimentGuard() {
        if (handle) han_experiment_close(handle);
    }
};

han_status open_experiment(const std::string& config_path,
                           const std::vector<std::string>& overrides, ExperimentGuard& guard) {
    han_status status = han_experiment_open_file(config_path.c_str(), &guard.handle);
    if (status != HAN_OK) return status;
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "--set expects key.path=value, got '%s'\n", kv.c_str());
            return HAN_ERROR_CONFIG;
        }
        status = han_experiment_set(guard.handle, kv.substr(0, eq).c_str(),
                                    kv.substr(eq + 1).c_str());
        if (status != HAN_OK) return status;
    }
    return HAN_OK;
}

void print_progress(long generation, double best, double mean, void*) {
    std::printf("generation %ld  best %.4f  mean %.4f\n", generation, best, mean);
    std::fflush(stdout);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hebbian attractor networks: meta-training, rollouts and weight-dynamics analysis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(han_version()));

    std::string config_path, out_dir, genome_path, resume_path, weights_path;
    std::vector<std::string> overrides;
    bool verbose = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", config_path, "experiment config JSON")->required();
        cmd->add_option("--set", overrides, "override a config value, e.g. train.generations=300");
    };

    // train
    auto* train = app.add_subcommand("train", "meta-train Hebbian coefficients with ES");
    add_common(train, true);
    train->add_option("--out", out_dir, "output directory")->default_val("out/train");
    train->add_option("--resume", resume_path, "checkpoint.json to resume from");
    train->add_flag("--verbose", verbose, "print per-generation fitness");

    // rollout
    auto* rollout = app.add_subcommand("rollout", "deploy a stored genome for one episode");
    add_common(rollout, true);
    rollout->add_option("--genome", genome_path, "genome JSON file")->required();
    rollout->add_option("--out", out_dir, "output directory")->default_val("out/rollout");
    std::string freeze_spec;
    rollout->add_option("--freeze", freeze_spec, "freeze Hebbian updates over steps A:B");
    std::vector<std::string> perturb_specs;
    rollout->add_option("--perturb", perturb_specs,
                        "impulse at time T seconds: T:J or T:j0,j1,... (N·s)");
    std::vector<std::string> swap_specs;
    rollout->add_option("--swap", swap_specs, "load coefficient file at step S: S:FILE");
    int rollout_index = 0;
    rollout->add_option("--index", rollout_index, "evaluation rollout index (seed selector)");
    long stride = 1;
    rollout->add_option("--stride", stride, "weight snapshot stride");
    bool dump_trajectory = false;
    rollout->add_flag("--dump-trajectory", dump_trajectory, "write per-step obs/action/reward CSV");

    // grid
    auto* grid = app.add_subcommand("grid", "sweep averaging window M and f_hebb");
    add_common(grid, true);
    std::string m_values = "1,10", f_values = "5,20";
    grid->add_option("--m", m_values, "comma list of averaging windows");
    grid->add_option("--fhebb", f_values, "comma list of Hebbian frequencies (Hz)");
    int seeds = 3;
    grid->add_option("--seeds", seeds, "independent meta-training seeds per cell");
    grid->add_option("--out", out_dir, "output directory")->default_val("out/grid");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "classify a stored weight trajectory");
    analyze->add_option("--weights", weights_path, "weights.csv from a rollout")->required();
    double rate = 20.0, rho = 0.9, early = 0.05;
    long dist_stride = 1;
    analyze->add_option("--rate", rate, "snapshot sample rate in Hz");
    analyze->add_option("--rho", rho, "convergence threshold factor");
    analyze->add_option("--early", early, "early fraction of the rollout");
    analyze->add_option("--stride", dist_stride, "stride for the distance matrix");
    analyze->add_option("--out", out_dir, "output directory")->default_val("out/analyze");

    // swap-demo
    auto* swap_demo = app.add_subcommand("swap-demo", "hot-swap coefficients mid-episode");
    add_common(swap_demo, true);
    std::string coeff_files, swap_times;
    swap_demo->add_option("--coeffs", coeff_files, "comma list of coefficient files")->required();
    swap_demo->add_option("--times", swap_times, "comma list of swap times in seconds")
        ->required();
    swap_demo->add_option("--out", out_dir, "output directory")->default_val("out/swap_demo");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(HAN_ERROR_CONFIG);
    }

    if (train->parsed()) {
        ExperimentGuard exp;
        han_status status = open_experiment(config_path, overrides, exp);
        if (status != HAN_OK) return finish(status);
        status = han_train(exp.handle, out_dir.c_str(),
                           resume_path.empty() ? nullptr : resume_path.c_str(),
                           verbose ? print_progress : nullptr, nullptr);
        if (status == HAN_OK) std::printf("training complete; outputs in %s\n", out_dir.c_str());
        return finish(status);
    }

    if (rollout->parsed()) {
        ExperimentGuard exp;
        han_status status = open_experiment(config_path, overrides, exp);
        if (status != HAN_OK) return finish(status);

        json hooks;
        hooks["rollout_index"] = rollout_index;
        hooks["snapshot_stride"] = stride;
        hooks["dump_trajectory"] = dump_trajectory;
        if (!freeze_spec.empty()) {
            const auto colon = freeze_spec.find(':');
            if (colon == std::string::npos) {
                std::fprintf(stderr, "--freeze expects A:B\n");
                return static_cast<int>(HAN_ERROR_CONFIG);
            }
            hooks["freeze"] = {std::stol(freeze_spec.substr(0, colon)),
                               std::stol(freeze_spec.substr(colon + 1))};
        }
        json perturbations = json::array();
        for (const auto& spec : perturb_specs) {
            const auto colon = spec.find(':');
            if (colon == std::string::npos) {
                std::fprintf(stderr, "--perturb expects T:J[,J...]\n");
                return static_cast<int>(HAN_ERROR_CONFIG);
            }
            json impulse = json::array();
            std::string rest = spec.substr(colon + 1);
            size_t at = 0;
            while (at < rest.size()) {
                size_t comma = rest.find(',', at);
                if (comma == std::string::npos) comma = rest.size();
                impulse.push_back(std::stod(rest.substr(at, comma - at)));
                at = comma + 1;
            }
            perturbations.push_back({{"time_s", std::stod(spec.substr(0, colon))},
                                     {"impulse", impulse}});
        }
        if (!perturbations.empty()) hooks["perturbations"] = perturbations;
        json swaps = json::array();
        for (const auto& spec : swap_specs) {
            const auto colon = spec.find(':');
            if (colon == std::string::npos) {
                std::fprintf(stderr, "--swap expects S:FILE\n");
                return static_cast<int>(HAN_ERROR_CONFIG);
            }
            swaps.push_back({{"step", std::stol(spec.substr(0, colon))},
                             {"file", spec.substr(colon + 1)}});
        }
        if (!swaps.empty()) hooks["swaps"] = swaps;

        status = han_rollout(exp.handle, genome_path.c_str(), hooks.dump().c_str(),
                             out_dir.c_str());
        if (status == HAN_OK || status == HAN_ERROR_NUMERIC)
            std::printf("rollout report in %s/report.json\n", out_dir.c_str());
        return finish(status);
    }

    if (grid->parsed()) {
        ExperimentGuard exp;
        han_status status = open_experiment(config_path, overrides, exp);
        if (status != HAN_OK) return finish(status);
        status = han_grid(exp.handle, m_values.c_str(), f_values.c_str(), seeds, out_dir.c_str());
        if (status == HAN_OK)
            std::printf("grid tables in %s/grid_converged.csv and grid_fitness.csv\n",
                        out_dir.c_str());
        return finish(status);
    }

    if (analyze->parsed()) {
        const han_status status =
            han_analyze(weights_path.c_str(), rate, rho, early, dist_stride, out_dir.c_str());
        if (status == HAN_OK) std::printf("analysis report in %s/report.json\n", out_dir.c_str());
        return finish(status);
    }

    if (swap_demo->parsed()) {
        ExperimentGuard exp;
        han_status status = open_experiment(config_path, overrides, exp);
        if (status != HAN_OK) return finish(status);
        status = han_swap_demo(exp.handle, coeff_files.c_str(), swap_times.c_str(),
                               out_dir.c_str());
        if (status == HAN_OK || status == HAN_ERROR_NUMERIC)
            std::printf("swap demo outputs in %s\n", out_dir.c_str());
        return finish(status);
    }

    return static_cast<int>(HAN_ERROR_CONFIG);
}
