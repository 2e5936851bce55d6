#include "han/han.h"

#include "han/harness.hpp"
#include "han/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

struct han_experiment {
    han::ExperimentConfig config;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

template <typename Fn> han_status guard(Fn&& fn) {
    try {
        return fn();
    } catch (const han::NumericError& e) {
        set_error(e.what());
        return HAN_ERROR_NUMERIC;
    } catch (const han::IoError& e) {
        set_error(e.what());
        return HAN_ERROR_IO;
    } catch (const han::ConfigError& e) {
        set_error(e.what());
        return HAN_ERROR_CONFIG;
    } catch (const han::InputError& e) {
        set_error(e.what());
        return HAN_ERROR_CONFIG;
    } catch (const std::exception& e) {
        set_error(e.what());
        return HAN_ERROR_CONFIG;
    } catch (...) {
        set_error("unknown error");
        return HAN_ERROR_CONFIG;
    }
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

han::RolloutHooks hooks_from_json(const std::string& text, const han::ExperimentConfig& config,
                                  int* rollout_index) {
    han::RolloutHooks hooks;
    hooks.snapshot_stride = config.train.snapshot_stride;
    *rollout_index = 0;
    if (text.empty()) return hooks;

    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw han::ConfigError(std::string("malformed hooks JSON: ") + e.what());
    }
    *rollout_index = doc.value("rollout_index", 0);
    hooks.snapshot_stride = doc.value("snapshot_stride", hooks.snapshot_stride);
    hooks.record_io = doc.value("dump_trajectory", false);
    if (doc.contains("freeze")) {
        const auto& f = doc["freeze"];
        if (!f.is_array() || f.size() != 2)
            throw han::ConfigError("hooks.freeze must be [start_step, end_step]");
        hooks.freeze = std::make_pair(f[0].get<long>(), f[1].get<long>());
    }
    for (const auto& p : doc.value("perturbations", json::array())) {
        han::PerturbationEvent event;
        event.time_s = p.at("time_s").get<double>();
        const auto& imp = p.at("impulse");
        event.impulse = han::Vector(imp.size());
        for (size_t i = 0; i < imp.size(); ++i)
            event.impulse(static_cast<Eigen::Index>(i)) = imp[i].get<double>();
        hooks.perturbation.events.push_back(std::move(event));
    }
    for (const auto& s : doc.value("swaps", json::array())) {
        han::CoefficientSwap swap;
        swap.step = s.at("step").get<long>();
        swap.coefficients = han::load_coefficients(s.at("file").get<std::string>());
        hooks.swaps.push_back(std::move(swap));
    }
    return hooks;
}

void write_rollout_outputs(const han::ExperimentConfig& config, const han::RolloutResult& result,
                           const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    han::AttractorReport report;
    report.rho = config.analysis.rho;
    report.early_fraction = config.analysis.early_fraction;
    std::vector<double> series;
    if (result.weights.size() >= 2) {
        series = han::plasticity_series(result.weights);
        if (result.diverged) {
            report.verdict = han::AttractorVerdict::Diverged;
        } else {
            report = han::classify_convergence(series, config.analysis.rho,
                                               config.analysis.early_fraction);
        }
    } else if (result.diverged) {
        report.verdict = han::AttractorVerdict::Diverged;
    }

    const double snapshot_rate = config.env.f_nn_hz; // stride-1 analysis rollouts

    json j;
    j["format"] = "han-rollout-report";
    j["version"] = 1;
    j["episode_return"] = result.episode_return;
    j["diverged"] = result.diverged;
    j["steps"] = result.steps;
    j["hebbian_updates"] = result.update_steps.size();
    j["attractor"] = {{"mean_early", report.mean_early},
                      {"mean_late", report.mean_late},
                      {"rho", report.rho},
                      {"early_fraction", report.early_fraction},
                      {"verdict", han::to_string(report.verdict)},
                      {"dominant_frequency_hz", report.dominant_frequency_hz}};
    {
        std::ofstream out(dir / "report.json");
        out << j.dump(2) << "\n";
    }

    if (result.weights.size() > 0)
        han::save_weight_trajectory_csv(result.weights, (dir / "weights.csv").string());
    if (!series.empty()) {
        han::save_series_csv(series, (dir / "series.csv").string(), "plasticity");
        if (series.size() >= 8)
            han::save_spectrum_csv(han::spectrum(series, snapshot_rate),
                                   (dir / "spectrum.csv").string());
    }
    if (result.weights.size() >= 2)
        han::save_pca_csv(han::pca_embed(result.weights, 2), (dir / "pca.csv").string());
    if (result.observations.size() > 0)
        han::save_rollout_io_csv(result, (dir / "trajectory.csv").string(), "weights.csv");
}

} // namespace

extern "C" {

const char* han_version(void) { return "1.0.0"; }

const char* han_status_name(han_status status) {
    switch (status) {
    case HAN_OK: return "ok";
    case HAN_ERROR_CONFIG: return "configuration error";
    case HAN_ERROR_NUMERIC: return "numeric divergence";
    case HAN_ERROR_IO: return "i/o error";
    }
    return "unknown";
}

const char* han_last_error(void) { return g_last_error.c_str(); }

han_status han_experiment_open(const char* config_json, han_experiment** out) {
    return guard([&]() -> han_status {
        if (!config_json || !out) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        auto exp = std::make_unique<han_experiment>();
        exp->config = han::config_from_json_text(config_json);
        *out = exp.release();
        return HAN_OK;
    });
}

han_status han_experiment_open_file(const char* path, han_experiment** out) {
    return guard([&]() -> han_status {
        if (!path || !out) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        std::ifstream in(path);
        if (!in) throw han::IoError(std::string("cannot open config file: ") + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return han_experiment_open(ss.str().c_str(), out);
    });
}

han_status han_experiment_set(han_experiment* exp, const char* key_path, const char* value) {
    return guard([&]() -> han_status {
        if (!exp || !key_path || !value) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        han::set_config_path(exp->config, key_path, value);
        return HAN_OK;
    });
}

han_status han_experiment_config(han_experiment* exp, char** json_out) {
    return guard([&]() -> han_status {
        if (!exp || !json_out) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        const std::string text = han::config_to_json_text(exp->config);
        char* buffer = static_cast<char*>(std::malloc(text.size() + 1));
        if (!buffer) throw std::bad_alloc();
        std::memcpy(buffer, text.c_str(), text.size() + 1);
        *json_out = buffer;
        return HAN_OK;
    });
}

void han_string_free(char* text) { std::free(text); }

void han_experiment_close(han_experiment* exp) { delete exp; }

han_status han_train(han_experiment* exp, const char* out_dir, const char* resume_checkpoint,
                     han_progress_fn progress, void* user) {
    return guard([&]() -> han_status {
        if (!exp || !out_dir) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        std::function<void(const han::GenerationStats&)> on_generation;
        if (progress)
            on_generation = [progress, user](const han::GenerationStats& s) {
                progress(s.generation, s.best, s.mean, user);
            };
        han::run_meta_training(exp->config, out_dir, resume_checkpoint ? resume_checkpoint : "",
                               on_generation);
        return HAN_OK;
    });
}

han_status han_rollout(han_experiment* exp, const char* genome_file, const char* hooks_json,
                       const char* out_dir) {
    return guard([&]() -> han_status {
        if (!exp || !genome_file || !out_dir) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        han::ExperimentConfig config = exp->config;
        config.validate_and_resolve();

        int rollout_index = 0;
        han::RolloutHooks hooks =
            hooks_from_json(hooks_json ? hooks_json : "", config, &rollout_index);
        hooks.record_weights = true;

        const han::Vector genome = han::load_genome(genome_file, config.genome_layout());
        const han::PlasticityRule rule = config.rule_from_genome(genome);

        han::RunningNormalizer normalizer(config.env.observation_dim());
        const han::RolloutResult result =
            han::run_rollout(config, rule, han::eval_env_seed(config, rollout_index),
                             han::eval_weight_seed(config, rollout_index), normalizer, hooks);
        write_rollout_outputs(config, result, out_dir);
        if (result.diverged) {
            set_error("rollout diverged: non-finite dynamics, fitness floored");
            return HAN_ERROR_NUMERIC;
        }
        return HAN_OK;
    });
}

han_status han_grid(han_experiment* exp, const char* m_values, const char* f_hebb_values,
                    int seeds, const char* out_dir) {
    return guard([&]() -> han_status {
        if (!exp || !m_values || !f_hebb_values || !out_dir) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        han::ExperimentConfig config = exp->config;
        config.validate_and_resolve();
        std::vector<int> ms;
        for (const auto& s : split_csv(m_values)) ms.push_back(std::stoi(s));
        std::vector<double> fs_values;
        for (const auto& s : split_csv(f_hebb_values)) fs_values.push_back(std::stod(s));
        han::run_condition_grid(config, ms, fs_values, seeds, out_dir);
        return HAN_OK;
    });
}

han_status han_analyze(const char* weights_csv, double sample_rate_hz, double rho,
                       double early_fraction, long stride, const char* out_dir) {
    return guard([&]() -> han_status {
        if (!weights_csv || !out_dir) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        const han::WeightTrajectory traj = han::load_weight_trajectory_csv(weights_csv);
        if (traj.size() < 2) throw han::InputError("trajectory has fewer than 2 snapshots");
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);

        const std::vector<double> series = han::plasticity_series(traj);
        han::AttractorReport report = han::classify_convergence(series, rho, early_fraction);
        if (report.verdict == han::AttractorVerdict::LimitCycle && series.size() >= 8)
            report.dominant_frequency_hz =
                han::spectrum(series, sample_rate_hz).dominant_frequency_hz;
        han::save_attractor_report(report, (dir / "report.json").string());
        han::save_series_csv(series, (dir / "series.csv").string(), "plasticity");
        if (series.size() >= 8)
            han::save_spectrum_csv(han::spectrum(series, sample_rate_hz),
                                   (dir / "spectrum.csv").string());
        han::save_pca_csv(han::pca_embed(traj, 2), (dir / "pca.csv").string());

        // spectra of up to 30 randomly selected weight signals
        if (traj.size() >= 8) {
            const long dim = traj.snapshots.front().size();
            std::vector<long> picks;
            han::Rng pick_rng(30);
            if (dim <= 30) {
                for (long i = 0; i < dim; ++i) picks.push_back(i);
            } else {
                std::vector<long> pool(dim);
                for (long i = 0; i < dim; ++i) pool[i] = i;
                for (int k = 0; k < 30; ++k) {
                    const long j = k + static_cast<long>(pick_rng.next_below(dim - k));
                    std::swap(pool[k], pool[j]);
                    picks.push_back(pool[k]);
                }
            }
            std::vector<han::SpectrumReport> reports;
            for (long w : picks) {
                std::vector<double> signal;
                signal.reserve(traj.size());
                for (const auto& snap : traj.snapshots) signal.push_back(snap(w));
                reports.push_back(han::spectrum(signal, sample_rate_hz));
            }
            std::string out = "frequency_hz";
            for (long w : picks) out += ",w" + std::to_string(w);
            out += "\n";
            for (size_t bin = 0; bin < reports.front().frequency_hz.size(); ++bin) {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", reports.front().frequency_hz[bin]);
                out += buf;
                for (const auto& r : reports) {
                    std::snprintf(buf, sizeof(buf), ",%.17g", r.magnitude[bin]);
                    out += buf;
                }
                out += "\n";
            }
            std::ofstream wfile(dir / "weight_spectra.csv");
            if (!wfile) throw han::IoError("cannot write weight_spectra.csv");
            wfile << out;
        }

        const long effective_stride = stride >= 1 ? stride : 1;
        const han::Matrix dist = han::distance_matrix(traj, effective_stride);
        std::string out;
        for (Eigen::Index r = 0; r < dist.rows(); ++r) {
            for (Eigen::Index c = 0; c < dist.cols(); ++c) {
                if (c) out += ",";
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", dist(r, c));
                out += buf;
            }
            out += "\n";
        }
        std::ofstream dfile(dir / "distances.csv");
        if (!dfile) throw han::IoError("cannot write distances.csv");
        dfile << out;
        return HAN_OK;
    });
}

han_status han_swap_demo(han_experiment* exp, const char* coefficient_files,
                         const char* swap_times_s, const char* out_dir) {
    return guard([&]() -> han_status {
        if (!exp || !coefficient_files || !swap_times_s || !out_dir) {
            set_error("null argument");
            return HAN_ERROR_CONFIG;
        }
        han::ExperimentConfig config = exp->config;
        config.validate_and_resolve();

        const auto files = split_csv(coefficient_files);
        const auto times = split_csv(swap_times_s);
        if (files.empty()) throw han::ConfigError("swap demo needs at least one coefficient file");
        if (times.size() + 1 != files.size())
            throw han::ConfigError("swap demo needs one more coefficient file than swap times");

        han::PlasticityRule rule = han::load_coefficients(files[0]);
        rule.check_shapes(config.network_shape());
        rule.stabilization = config.stabilization();
        rule.schedule = config.schedule();

        han::RolloutHooks hooks;
        hooks.record_weights = true;
        hooks.record_io = true;
        hooks.snapshot_stride = config.train.snapshot_stride;
        for (size_t i = 0; i < times.size(); ++i) {
            han::CoefficientSwap swap;
            swap.step = static_cast<long>(std::llround(std::stod(times[i]) * config.env.f_nn_hz));
            swap.coefficients = han::load_coefficients(files[i + 1]);
            hooks.swaps.push_back(std::move(swap));
        }

        han::RunningNormalizer normalizer(config.env.observation_dim());
        const han::RolloutResult result =
            han::run_rollout(config, rule, han::eval_env_seed(config, 0),
                             han::eval_weight_seed(config, 0), normalizer, hooks);

        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        std::string velocity = "t,time_s,tracked_velocity,reward\n";
        for (long t = 0; t < result.steps; ++t) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g\n", t,
                          static_cast<double>(t) / config.env.f_nn_hz, result.head_velocity[t],
                          result.rewards[t]);
            velocity += buf;
        }
        {
            std::ofstream out(dir / "velocity.csv");
            if (!out) throw han::IoError("cannot write velocity.csv");
            out << velocity;
        }
        write_rollout_outputs(config, result, out_dir);
        if (result.diverged) {
            set_error("swap demo rollout diverged");
            return HAN_ERROR_NUMERIC;
        }
        return HAN_OK;
    });
}

} // extern "C"
