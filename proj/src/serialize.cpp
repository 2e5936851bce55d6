#include "han/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

// All on-disk formats live here. JSON documents are written through
// nlohmann::json (sorted keys, shortest round-trip doubles), so saving a
// loaded document reproduces it byte for byte. Checkpoints are written to a
// temporary file and renamed so an interrupted run keeps its last checkpoint.

namespace han {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vector vector_from_json(const json& arr) {
    if (!arr.is_array()) throw IoError("expected a JSON array of numbers");
    Vector v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
}

json matrix_to_json(const Matrix& m) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
    return arr;
}

Matrix matrix_from_json(const json& arr, Eigen::Index rows, Eigen::Index cols) {
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols)
        throw IoError("matrix array has the wrong length");
    Matrix m(rows, cols);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = arr[at++].get<double>();
    return m;
}

void write_text_atomic(const std::string& path, const std::string& text) {
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out << text;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("rename failed for " + target.string() + ": " + ec.message());
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in " + path + ": " + e.what());
    }
}

void expect_format(const json& doc, const std::string& format, int version,
                   const std::string& path) {
    if (!doc.is_object() || doc.value("format", "") != format)
        throw IoError(path + " is not a " + format + " document");
    if (doc.value("version", -1) != version)
        throw IoError(path + ": unsupported " + format + " version");
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        bool found = false;
        for (const char* k : known)
            if (key == k) { found = true; break; }
        if (!found) throw ConfigError("unknown config key '" + key + "' in " + where);
    }
}

} // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

namespace {

json env_to_json(const EnvSpec& env) {
    json j;
    j["kind"] = env.kind == EnvKind::PointMassTracking ? "point_mass_tracking" : "chain_crawler";
    j["f_nn_hz"] = env.f_nn_hz;
    j["dt"] = env.dt;
    j["episode_steps"] = env.episode_steps;
    j["v_target"] = env.v_target;
    j["sigma_r"] = env.sigma_r;
    j["mass"] = env.mass;
    j["f_max"] = env.f_max;
    j["drag"] = env.drag;
    j["v0_range"] = env.v0_range;
    j["num_masses"] = env.num_masses;
    j["spring_k"] = env.spring_k;
    j["damping"] = env.damping;
    j["mu_forward"] = env.mu_forward;
    j["mu_backward"] = env.mu_backward;
    j["rest_length"] = env.rest_length;
    j["actuation_amplitude"] = env.actuation_amplitude;
    j["init_jitter"] = env.init_jitter;
    j["gravity"] = env.gravity;
    return j;
}

void env_from_json(const json& j, EnvSpec& env) {
    reject_unknown_keys(j,
                        {"kind", "f_nn_hz", "dt", "episode_steps", "v_target", "sigma_r", "mass",
                         "f_max", "drag", "v0_range", "num_masses", "spring_k", "damping",
                         "mu_forward", "mu_backward", "rest_length", "actuation_amplitude",
                         "init_jitter", "gravity"},
                        "env");
    if (j.contains("kind")) {
        const std::string kind = j["kind"].get<std::string>();
        if (kind == "point_mass_tracking")
            env.kind = EnvKind::PointMassTracking;
        else if (kind == "chain_crawler")
            env.kind = EnvKind::ChainCrawler;
        else
            throw ConfigError("unknown env.kind: " + kind);
    }
    env.f_nn_hz = j.value("f_nn_hz", env.f_nn_hz);
    env.dt = j.value("dt", env.dt);
    env.episode_steps = j.value("episode_steps", env.episode_steps);
    env.v_target = j.value("v_target", env.v_target);
    env.sigma_r = j.value("sigma_r", env.sigma_r);
    env.mass = j.value("mass", env.mass);
    env.f_max = j.value("f_max", env.f_max);
    env.drag = j.value("drag", env.drag);
    env.v0_range = j.value("v0_range", env.v0_range);
    env.num_masses = j.value("num_masses", env.num_masses);
    env.spring_k = j.value("spring_k", env.spring_k);
    env.damping = j.value("damping", env.damping);
    env.mu_forward = j.value("mu_forward", env.mu_forward);
    env.mu_backward = j.value("mu_backward", env.mu_backward);
    env.rest_length = j.value("rest_length", env.rest_length);
    env.actuation_amplitude = j.value("actuation_amplitude", env.actuation_amplitude);
    env.init_jitter = j.value("init_jitter", env.init_jitter);
    env.gravity = j.value("gravity", env.gravity);
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["version"] = c.version;
    j["seed"] = c.seed;
    j["env"] = env_to_json(c.env);
    j["network"] = {{"hidden", c.hidden}, {"activation", c.activation}};
    j["plasticity"] = {{"condition", c.plasticity.condition},
                       {"mode", c.plasticity.mode},
                       {"clip_epsilon", c.plasticity.clip_epsilon},
                       {"m_window", c.plasticity.m_window},
                       {"f_hebb_hz", c.plasticity.f_hebb_hz},
                       {"eta_mode", c.plasticity.eta_mode},
                       {"eta_const", c.plasticity.eta_const},
                       {"weight_init", c.plasticity.weight_init}};
    j["es"] = {{"algo", c.es_algo},
               {"adaptive",
                {{"population", c.adaptive.population},
                 {"sigma_init", c.adaptive.sigma_init},
                 {"c_mu", c.adaptive.c_mu},
                 {"c_sigma", c.adaptive.c_sigma},
                 {"selection_ratio", c.adaptive.selection_ratio},
                 {"mean_init_range", c.adaptive.mean_init_range}}},
               {"openai",
                {{"population", c.openai.population},
                 {"lr_init", c.openai.lr_init},
                 {"lr_decay", c.openai.lr_decay},
                 {"sigma_init", c.openai.sigma_init},
                 {"sigma_decay", c.openai.sigma_decay},
                 {"adam_beta1", c.openai.adam_beta1},
                 {"adam_beta2", c.openai.adam_beta2},
                 {"adam_eps", c.openai.adam_eps},
                 {"mirrored", c.openai.mirrored},
                 {"mean_init_range", c.openai.mean_init_range}}}};
    j["train"] = {{"generations", c.train.generations},
                  {"repeats", c.train.repeats},
                  {"workers", c.train.workers},
                  {"shared_env_seed", c.train.shared_env_seed},
                  {"eval_rollouts", c.train.eval_rollouts},
                  {"snapshot_stride", c.train.snapshot_stride}};
    j["analysis"] = {{"rho", c.analysis.rho}, {"early_fraction", c.analysis.early_fraction}};
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    reject_unknown_keys(j, {"version", "seed", "env", "network", "plasticity", "es", "train",
                            "analysis"},
                        "config");
    c.version = j.value("version", c.version);
    c.seed = j.value("seed", c.seed);
    if (j.contains("env")) env_from_json(j["env"], c.env);
    if (j.contains("network")) {
        const json& n = j["network"];
        reject_unknown_keys(n, {"hidden", "activation"}, "network");
        if (n.contains("hidden")) c.hidden = n["hidden"].get<std::vector<int>>();
        c.activation = n.value("activation", c.activation);
    }
    if (j.contains("plasticity")) {
        const json& p = j["plasticity"];
        reject_unknown_keys(p,
                            {"condition", "mode", "clip_epsilon", "m_window", "f_hebb_hz",
                             "eta_mode", "eta_const", "weight_init"},
                            "plasticity");
        c.plasticity.condition = p.value("condition", c.plasticity.condition);
        c.plasticity.mode = p.value("mode", c.plasticity.mode);
        c.plasticity.clip_epsilon = p.value("clip_epsilon", c.plasticity.clip_epsilon);
        c.plasticity.m_window = p.value("m_window", c.plasticity.m_window);
        c.plasticity.f_hebb_hz = p.value("f_hebb_hz", c.plasticity.f_hebb_hz);
        c.plasticity.eta_mode = p.value("eta_mode", c.plasticity.eta_mode);
        c.plasticity.eta_const = p.value("eta_const", c.plasticity.eta_const);
        c.plasticity.weight_init = p.value("weight_init", c.plasticity.weight_init);
    }
    if (j.contains("es")) {
        const json& e = j["es"];
        reject_unknown_keys(e, {"algo", "adaptive", "openai"}, "es");
        c.es_algo = e.value("algo", c.es_algo);
        if (e.contains("adaptive")) {
            const json& a = e["adaptive"];
            reject_unknown_keys(a,
                                {"population", "sigma_init", "c_mu", "c_sigma", "selection_ratio",
                                 "mean_init_range"},
                                "es.adaptive");
            c.adaptive.population = a.value("population", c.adaptive.population);
            c.adaptive.sigma_init = a.value("sigma_init", c.adaptive.sigma_init);
            c.adaptive.c_mu = a.value("c_mu", c.adaptive.c_mu);
            c.adaptive.c_sigma = a.value("c_sigma", c.adaptive.c_sigma);
            c.adaptive.selection_ratio = a.value("selection_ratio", c.adaptive.selection_ratio);
            c.adaptive.mean_init_range = a.value("mean_init_range", c.adaptive.mean_init_range);
        }
        if (e.contains("openai")) {
            const json& o = e["openai"];
            reject_unknown_keys(o,
                                {"population", "lr_init", "lr_decay", "sigma_init", "sigma_decay",
                                 "adam_beta1", "adam_beta2", "adam_eps", "mirrored",
                                 "mean_init_range"},
                                "es.openai");
            c.openai.population = o.value("population", c.openai.population);
            c.openai.lr_init = o.value("lr_init", c.openai.lr_init);
            c.openai.lr_decay = o.value("lr_decay", c.openai.lr_decay);
            c.openai.sigma_init = o.value("sigma_init", c.openai.sigma_init);
            c.openai.sigma_decay = o.value("sigma_decay", c.openai.sigma_decay);
            c.openai.adam_beta1 = o.value("adam_beta1", c.openai.adam_beta1);
            c.openai.adam_beta2 = o.value("adam_beta2", c.openai.adam_beta2);
            c.openai.adam_eps = o.value("adam_eps", c.openai.adam_eps);
            c.openai.mirrored = o.value("mirrored", c.openai.mirrored);
            c.openai.mean_init_range = o.value("mean_init_range", c.openai.mean_init_range);
        }
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown_keys(t,
                            {"generations", "repeats", "workers", "shared_env_seed",
                             "eval_rollouts", "snapshot_stride"},
                            "train");
        c.train.generations = t.value("generations", c.train.generations);
        c.train.repeats = t.value("repeats", c.train.repeats);
        c.train.workers = t.value("workers", c.train.workers);
        c.train.shared_env_seed = t.value("shared_env_seed", c.train.shared_env_seed);
        c.train.eval_rollouts = t.value("eval_rollouts", c.train.eval_rollouts);
        c.train.snapshot_stride = t.value("snapshot_stride", c.train.snapshot_stride);
    }
    if (j.contains("analysis")) {
        const json& a = j["analysis"];
        reject_unknown_keys(a, {"rho", "early_fraction"}, "analysis");
        c.analysis.rho = a.value("rho", c.analysis.rho);
        c.analysis.early_fraction = a.value("early_fraction", c.analysis.early_fraction);
    }
    return c;
}

} // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config JSON: ") + e.what());
    }
    return config_from_json(doc);
}

std::string config_to_json_text(const ExperimentConfig& config, int indent) {
    return config_to_json(config).dump(indent) + "\n";
}

void set_config_path(ExperimentConfig& config, const std::string& path, const std::string& value) {
    json doc = config_to_json(config);
    std::string pointer = "/" + path;
    for (auto& ch : pointer)
        if (ch == '.') ch = '/';
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value; // bare strings are allowed unquoted
    }
    try {
        json::json_pointer p(pointer);
        if (!doc.contains(p)) throw ConfigError("unknown config path: " + path);
        doc[p] = parsed;
    } catch (const json::exception& e) {
        throw ConfigError("cannot set config path '" + path + "': " + e.what());
    }
    config = config_from_json(doc);
}

std::string config_hash(const ExperimentConfig& config) {
    json doc = config_to_json(config);
    // the hash covers everything that shapes the generation-by-generation
    // stream; worker count cannot affect results and the generation budget is
    // a stopping point, so resuming may extend it
    doc["train"].erase("workers");
    doc["train"].erase("generations");
    const std::string canonical = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json stats_to_json(const GenerationStats& s) {
    return json{{"generation", s.generation}, {"best", s.best}, {"mean", s.mean},
                {"stddev", s.stddev}};
}

GenerationStats stats_from_json(const json& j) {
    GenerationStats s;
    s.generation = j.at("generation").get<long>();
    s.best = j.at("best").get<double>();
    s.mean = j.at("mean").get<double>();
    s.stddev = j.at("stddev").get<double>();
    return s;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j;
    j["format"] = "han-checkpoint";
    j["version"] = ckpt.version;
    j["algo"] = ckpt.algo;
    j["generation"] = ckpt.generation;
    j["mean"] = vector_to_json(ckpt.mean);
    j["sigma"] = vector_to_json(ckpt.sigma);
    j["adam_m"] = vector_to_json(ckpt.adam_m);
    j["adam_v"] = vector_to_json(ckpt.adam_v);
    j["rng"] = {ckpt.rng_state[0], ckpt.rng_state[1], ckpt.rng_state[2], ckpt.rng_state[3]};
    j["best_genome"] = vector_to_json(ckpt.best_genome);
    j["best_fitness"] = ckpt.best_fitness;
    json curve = json::array();
    for (const auto& s : ckpt.curve) curve.push_back(stats_to_json(s));
    j["curve"] = curve;
    j["config_hash"] = ckpt.config_hash;
    write_text_atomic(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
    const json j = parse_json_file(path);
    expect_format(j, "han-checkpoint", 1, path);
    try {
        Checkpoint ckpt;
        ckpt.algo = j.at("algo").get<std::string>();
        ckpt.generation = j.at("generation").get<long>();
        ckpt.mean = vector_from_json(j.at("mean"));
        ckpt.sigma = vector_from_json(j.at("sigma"));
        ckpt.adam_m = vector_from_json(j.at("adam_m"));
        ckpt.adam_v = vector_from_json(j.at("adam_v"));
        for (int i = 0; i < 4; ++i) ckpt.rng_state[i] = j.at("rng")[i].get<std::uint64_t>();
        ckpt.best_genome = vector_from_json(j.at("best_genome"));
        ckpt.best_fitness = j.at("best_fitness").is_null()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : j.at("best_fitness").get<double>();
        for (const auto& s : j.at("curve")) ckpt.curve.push_back(stats_from_json(s));
        ckpt.config_hash = j.at("config_hash").get<std::string>();
        return ckpt;
    } catch (const json::exception& e) {
        throw IoError("corrupt checkpoint " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Genomes and coefficient documents

void save_genome(const Vector& genome, const GenomeLayout& layout, const std::string& path) {
    json j;
    j["format"] = "han-genome";
    j["version"] = 1;
    j["layer_sizes"] = layout.shape.layer_sizes;
    j["eta_mode"] = layout.eta_mode == EtaMode::Evolved ? "evolved" : "constant";
    j["eta_const"] = layout.eta_const;
    j["values"] = vector_to_json(genome);
    write_text_atomic(path, j.dump(2) + "\n");
}

Vector load_genome(const std::string& path, const GenomeLayout& expected_layout) {
    const json j = parse_json_file(path);
    expect_format(j, "han-genome", 1, path);
    try {
        const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
        if (sizes != expected_layout.shape.layer_sizes)
            throw ConfigError("genome file layer sizes do not match the configuration");
        const std::string eta = j.at("eta_mode").get<std::string>();
        const EtaMode mode = eta == "constant" ? EtaMode::Constant : EtaMode::Evolved;
        if (mode != expected_layout.eta_mode)
            throw ConfigError("genome file eta mode does not match the configuration");
        Vector genome = vector_from_json(j.at("values"));
        if (genome.size() != expected_layout.dimension())
            throw ConfigError("genome file length does not match the layout dimension");
        return genome;
    } catch (const json::exception& e) {
        throw IoError("corrupt genome file " + path + ": " + e.what());
    }
}

void save_coefficients(const PlasticityRule& rule, const std::string& path) {
    json layers = json::array();
    for (int k = 0; k < rule.num_weight_layers(); ++k) {
        layers.push_back(json{{"rows", rule.A[k].rows()},
                              {"cols", rule.A[k].cols()},
                              {"A", matrix_to_json(rule.A[k])},
                              {"B", matrix_to_json(rule.B[k])},
                              {"C", matrix_to_json(rule.C[k])},
                              {"D", matrix_to_json(rule.D[k])},
                              {"eta", matrix_to_json(rule.eta[k])}});
    }
    json j;
    j["format"] = "han-coefficients";
    j["version"] = 1;
    j["layers"] = layers;
    write_text_atomic(path, j.dump(2) + "\n");
}

PlasticityRule load_coefficients(const std::string& path) {
    const json j = parse_json_file(path);
    expect_format(j, "han-coefficients", 1, path);
    try {
        PlasticityRule rule;
        for (const auto& layer : j.at("layers")) {
            const auto rows = layer.at("rows").get<Eigen::Index>();
            const auto cols = layer.at("cols").get<Eigen::Index>();
            rule.A.push_back(matrix_from_json(layer.at("A"), rows, cols));
            rule.B.push_back(matrix_from_json(layer.at("B"), rows, cols));
            rule.C.push_back(matrix_from_json(layer.at("C"), rows, cols));
            rule.D.push_back(matrix_from_json(layer.at("D"), rows, cols));
            rule.eta.push_back(matrix_from_json(layer.at("eta"), rows, cols));
        }
        if (rule.A.empty()) throw IoError("coefficient file has no layers: " + path);
        return rule;
    } catch (const json::exception& e) {
        throw IoError("corrupt coefficient file " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Records and CSV outputs

namespace {

json report_to_json(const AttractorReport& r) {
    return json{{"mean_early", r.mean_early},
                {"mean_late", r.mean_late},
                {"rho", r.rho},
                {"early_fraction", r.early_fraction},
                {"verdict", to_string(r.verdict)},
                {"dominant_frequency_hz", r.dominant_frequency_hz}};
}

} // namespace

void save_record(const RunRecord& record, const ExperimentConfig& config, const std::string& path) {
    json j;
    j["format"] = "han-record";
    j["version"] = 1;
    j["config"] = json::parse(config_to_json_text(config, -1));
    j["config_hash"] = record.config_hash;
    json curve = json::array();
    for (const auto& s : record.curve) curve.push_back(stats_to_json(s));
    j["curve"] = curve;
    j["best_genome"] = vector_to_json(record.best_genome);
    j["best_fitness"] = std::isnan(record.best_fitness) ? json(nullptr) : json(record.best_fitness);
    json reports = json::array();
    for (const auto& r : record.eval_reports) reports.push_back(report_to_json(r));
    j["eval_reports"] = reports;
    j["wall_clock_s"] = record.wall_clock_s;
    write_text_atomic(path, j.dump(2) + "\n");
}

void save_curve_csv(const std::vector<GenerationStats>& curve, const std::string& path) {
    std::string out = "generation,best,mean,std\n";
    for (const auto& s : curve) {
        out += std::to_string(s.generation) + "," + fmt_double(s.best) + "," + fmt_double(s.mean) +
               "," + fmt_double(s.stddev) + "\n";
    }
    write_text_atomic(path, out);
}

void save_weight_trajectory_csv(const WeightTrajectory& traj, const std::string& path) {
    traj.check();
    std::string out = "# format=han-weights-v1 layers=";
    for (size_t k = 0; k < traj.layer_dims.size(); ++k) {
        if (k) out += ";";
        out += std::to_string(traj.layer_dims[k].first) + "x" +
               std::to_string(traj.layer_dims[k].second);
    }
    out += "\n";
    const long d = traj.snapshots.empty() ? 0 : traj.snapshots.front().size();
    out += "step";
    for (long i = 0; i < d; ++i) out += ",w" + std::to_string(i);
    out += "\n";
    for (size_t t = 0; t < traj.size(); ++t) {
        out += std::to_string(traj.steps[t]);
        for (long i = 0; i < d; ++i) out += "," + fmt_double(traj.snapshots[t](i));
        out += "\n";
    }
    write_text_atomic(path, out);
}

WeightTrajectory load_weight_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    WeightTrajectory traj;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto at = line.find("layers=");
            if (at != std::string::npos) {
                std::stringstream dims(line.substr(at + 7));
                std::string item;
                while (std::getline(dims, item, ';')) {
                    const auto x = item.find('x');
                    if (x == std::string::npos) throw IoError("bad layer dims in " + path);
                    traj.layer_dims.emplace_back(std::stoi(item.substr(0, x)),
                                                 std::stoi(item.substr(x + 1)));
                }
            }
            continue;
        }
        if (!header_seen) { // column header
            header_seen = true;
            continue;
        }
        std::stringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) throw IoError("bad row in " + path);
        long step = 0;
        std::vector<double> values;
        try {
            step = std::stol(cell);
            while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw IoError("bad numeric cell in " + path);
        }
        Vector flat(values.size());
        for (size_t i = 0; i < values.size(); ++i) flat(static_cast<Eigen::Index>(i)) = values[i];
        try {
            traj.push(step, std::move(flat));
        } catch (const InputError& e) {
            throw IoError(path + ": " + e.what());
        }
    }
    if (traj.size() == 0) throw IoError("no snapshots in " + path);
    traj.check();
    return traj;
}

void save_series_csv(const std::vector<double>& series, const std::string& path,
                     const std::string& column) {
    std::string out = "index," + column + "\n";
    for (size_t i = 0; i < series.size(); ++i)
        out += std::to_string(i) + "," + fmt_double(series[i]) + "\n";
    write_text_atomic(path, out);
}

void save_attractor_report(const AttractorReport& report, const std::string& path) {
    json j = report_to_json(report);
    j["format"] = "han-attractor-report";
    j["version"] = 1;
    write_text_atomic(path, j.dump(2) + "\n");
}

void save_spectrum_csv(const SpectrumReport& report, const std::string& path) {
    std::string out = "frequency_hz,magnitude\n";
    for (size_t i = 0; i < report.frequency_hz.size(); ++i)
        out += fmt_double(report.frequency_hz[i]) + "," + fmt_double(report.magnitude[i]) + "\n";
    write_text_atomic(path, out);
}

void save_pca_csv(const PcaResult& pca, const std::string& path) {
    std::string out = "# explained=";
    for (size_t i = 0; i < pca.explained.size(); ++i) {
        if (i) out += ";";
        out += fmt_double(pca.explained[i]);
    }
    out += "\n";
    for (Eigen::Index c = 0; c < pca.projected.cols(); ++c)
        out += (c ? ",pc" : "pc") + std::to_string(c + 1);
    out += "\n";
    for (Eigen::Index r = 0; r < pca.projected.rows(); ++r) {
        for (Eigen::Index c = 0; c < pca.projected.cols(); ++c) {
            if (c) out += ",";
            out += fmt_double(pca.projected(r, c));
        }
        out += "\n";
    }
    write_text_atomic(path, out);
}

void save_rollout_io_csv(const RolloutResult& result, const std::string& path,
                         const std::string& weights_csv_name) {
    std::string out = "t";
    const long obs_dim = result.observations.empty() ? 0 : result.observations.front().size();
    const long act_dim = result.actions.empty() ? 0 : result.actions.front().size();
    for (long i = 0; i < obs_dim; ++i) out += ",obs" + std::to_string(i);
    for (long i = 0; i < act_dim; ++i) out += ",act" + std::to_string(i);
    out += ",reward,tracked_velocity,snapshot_ref\n";

    size_t next_update = 0;
    for (long t = 0; t < result.steps; ++t) {
        out += std::to_string(t);
        for (long i = 0; i < obs_dim; ++i)
            out += "," + fmt_double(result.observations[t](i));
        for (long i = 0; i < act_dim; ++i) out += "," + fmt_double(result.actions[t](i));
        out += "," + fmt_double(result.rewards[t]);
        out += "," + fmt_double(result.head_velocity[t]);
        out += ",";
        if (next_update < result.update_steps.size() && result.update_steps[next_update] == t) {
            // reference the weight snapshot row holding this Hebbian tick
            out += weights_csv_name + "#" + std::to_string(t);
            ++next_update;
        }
        out += "\n";
    }
    write_text_atomic(path, out);
}

void save_grid_csv(const GridResult& grid, const std::string& out_dir) {
    auto write_table = [&](const Matrix& table, const std::string& name) {
        std::string out = "M";
        for (double f : grid.f_hebb_values) out += "," + fmt_double(f);
        out += "\n";
        for (size_t mi = 0; mi < grid.m_values.size(); ++mi) {
            out += std::to_string(grid.m_values[mi]);
            for (size_t fi = 0; fi < grid.f_hebb_values.size(); ++fi) {
                const double v = table(static_cast<long>(mi), static_cast<long>(fi));
                out += ",";
                out += std::isnan(v) ? "failed" : fmt_double(v);
            }
            out += "\n";
        }
        write_text_atomic((fs::path(out_dir) / name).string(), out);
    };
    write_table(grid.converged_ratio, "grid_converged.csv");
    write_table(grid.mean_fitness, "grid_fitness.csv");
}

} // namespace han
