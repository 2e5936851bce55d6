#ifndef HAN_H
#define HAN_H

/*
 * C boundary of the Hebbian attractor network library. All state lives
 * behind the opaque experiment handle; every call returns a status code that
 * doubles as the CLI exit code. han_last_error() describes the most recent
 * failure on the calling thread.
 */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum han_status {
    HAN_OK = 0,
    HAN_ERROR_CONFIG = 1,  /* bad configuration, arguments or input data */
    HAN_ERROR_NUMERIC = 2, /* rollout dynamics diverged */
    HAN_ERROR_IO = 3       /* file missing, unreadable or malformed */
} han_status;

typedef struct han_experiment han_experiment;

const char* han_version(void);
const char* han_status_name(han_status status);
const char* han_last_error(void);

/* Parses a config document (syntax and key names checked immediately, value
 * constraints at first use). The handle must be released with
 * han_experiment_close. */
han_status han_experiment_open(const char* config_json, han_experiment** out);
han_status han_experiment_open_file(const char* path, han_experiment** out);

/* Dotted-path override, e.g. ("train.generations", "300"). */
han_status han_experiment_set(han_experiment* exp, const char* key_path, const char* value);

/* Full config echo with every default filled in; free with han_string_free. */
han_status han_experiment_config(han_experiment* exp, char** json_out);

void han_string_free(char* text);
void han_experiment_close(han_experiment* exp);

typedef void (*han_progress_fn)(long generation, double best, double mean, void* user);

/* Meta-training: checkpoints and curve land in out_dir each generation,
 * followed by best_genome.json, best_coefficients.json and record.json.
 * resume_checkpoint may be NULL; progress may be NULL. */
han_status han_train(han_experiment* exp, const char* out_dir, const char* resume_checkpoint,
                     han_progress_fn progress, void* user);

/* One deployment episode of a stored genome. hooks_json (optional) supports:
 *   {"rollout_index": 0, "freeze": [500, 1000], "snapshot_stride": 1,
 *    "dump_trajectory": false,
 *    "perturbations": [{"time_s": 19.0, "impulse": [5.0]}],
 *    "swaps": [{"step": 300, "file": "coeffs.json"}]}
 * Writes report.json, weights.csv, series.csv, spectrum.csv and pca.csv into
 * out_dir (plus trajectory.csv when dumping). Returns HAN_ERROR_NUMERIC when
 * the rollout diverged (outputs are still written). */
han_status han_rollout(han_experiment* exp, const char* genome_file, const char* hooks_json,
                       const char* out_dir);

/* Meta-training sweep over averaging windows and Hebbian frequencies,
 * e.g. m_values "1,10,20" and f_hebb_values "1,5,20". Writes
 * grid_converged.csv and grid_fitness.csv. */
han_status han_grid(han_experiment* exp, const char* m_values, const char* f_hebb_values,
                    int seeds, const char* out_dir);

/* Offline analysis of a stored weight trajectory: plasticity series,
 * attractor report, PCA embedding, spectrum and pairwise distances. */
han_status han_analyze(const char* weights_csv, double sample_rate_hz, double rho,
                       double early_fraction, long stride, const char* out_dir);

/* Deployment-time coefficient hot swap: the first file provides the initial
 * coefficients, the remaining files are loaded at the given times (seconds,
 * comma separated). Writes velocity.csv, weights.csv, pca.csv, report.json. */
han_status han_swap_demo(han_experiment* exp, const char* coefficient_files,
                         const char* swap_times_s, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
