#ifndef MPL_MPL_H
#define MPL_MPL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MPL_API __declspec(dllexport)
#else
#define MPL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mpl_population mpl_population;
typedef struct mpl_model mpl_model;
typedef struct mpl_server mpl_server;

typedef enum mpl_status {
    MPL_OK = 0,
    MPL_ERR_INVALID_ARGUMENT = 1,
    MPL_ERR_IO = 2,
    MPL_ERR_PARSE = 3,
    MPL_ERR_SHAPE = 4,
    MPL_ERR_EMPTY_BATCH = 5,
    MPL_ERR_INSUFFICIENT_FLOCK = 6,
    MPL_ERR_INVALID_ENDPOINT = 7,
    MPL_ERR_UNREACHABLE = 8,
    MPL_ERR_INVALID_INSTRUCTION = 9,
    MPL_ERR_PORT_IN_USE = 10,
    MPL_ERR_RUNTIME = 11
} mpl_status;

typedef enum mpl_algo { MPL_ALGO_MAML = 0, MPL_ALGO_REPTILE = 1, MPL_ALGO_BASELINE = 2 } mpl_algo;

enum { MPL_TYPE_AGGRESSIVE = 0, MPL_TYPE_MEDIUM = 1, MPL_TYPE_RESERVED = 2, MPL_TYPE_COUNT = 3 };

/* Message of the last failure on the calling thread ("" if none). */
MPL_API const char *mpl_last_error(void);
MPL_API const char *mpl_status_name(mpl_status status);
MPL_API const char *mpl_version(void);

/* Populations. bands_path may be NULL for the built-in type bands. */
MPL_API mpl_status mpl_population_generate(size_t n, uint64_t seed, const char *bands_path, mpl_population **out);
MPL_API mpl_status mpl_population_load(const char *path, mpl_population **out);
MPL_API mpl_status mpl_population_save(const mpl_population *pop, const char *path);
MPL_API size_t mpl_population_size(const mpl_population *pop);
MPL_API mpl_status mpl_population_type_counts(const mpl_population *pop, size_t counts[MPL_TYPE_COUNT]);
MPL_API void mpl_population_free(mpl_population *pop);

/* Meta-training. meta_lr < 0 selects the algorithm's default. */
typedef struct mpl_train_options {
    mpl_algo algo;
    int epochs;
    double inner_lr;
    double meta_lr;
    int inner_steps;
    int batch_size;
    int support_size;
    int query_size;
    uint64_t seed;
} mpl_train_options;

MPL_API void mpl_train_options_default(mpl_train_options *opts, mpl_algo algo);
/* log_csv_path may be NULL. */
MPL_API mpl_status mpl_meta_train(const mpl_population *users, const mpl_train_options *opts, const char *log_csv_path,
                                  mpl_model **out);

MPL_API mpl_status mpl_model_load(const char *path, mpl_model **out);
MPL_API mpl_status mpl_model_save(const mpl_model *model, const char *path);
/* "maml", "reptile" or "baseline"; owned by the model. */
MPL_API const char *mpl_model_algo(const mpl_model *model);
MPL_API size_t mpl_model_parameter_count(const mpl_model *model);
MPL_API mpl_status mpl_model_params(const mpl_model *model, double *theta, size_t n);
MPL_API void mpl_model_free(mpl_model *model);

/* Mean query loss before and after `steps` SGD steps on each user's support set. */
MPL_API mpl_status mpl_few_shot_loss(const mpl_model *model, const mpl_population *users, size_t support_size,
                                     size_t query_size, int steps, double lr, uint64_t seed, double *loss_before,
                                     double *loss_after);

/* Online adaptation settings shared by evaluation, simulation and serving. */
typedef struct mpl_runtime_options {
    double online_lr;
    size_t window;
    int converge_steps;
    int step_cap;
    int phase_gap;
    unsigned threads;
} mpl_runtime_options;

MPL_API void mpl_runtime_options_default(mpl_runtime_options *opts);

typedef struct mpl_aggregate {
    size_t episodes;
    size_t phases;
    double mean_duration; /* pooled over phases */
    double std_duration;
    double mean_phase_count; /* per episode */
    double std_phase_count;
} mpl_aggregate;

typedef struct mpl_eval_summary {
    mpl_aggregate overall;
    mpl_aggregate by_type[MPL_TYPE_COUNT];
} mpl_eval_summary;

/* Runs every (user, seed) episode for each model and writes one metrics CSV
   with the models' rows in argument order. summaries (n_models entries) and
   csv_path may be NULL. */
MPL_API mpl_status mpl_evaluate(const mpl_model *const *models, size_t n_models, const mpl_population *users,
                                const char *scenario_path, const uint64_t *seeds, size_t n_seeds,
                                const mpl_runtime_options *opts, const char *csv_path, mpl_eval_summary *summaries);

typedef struct mpl_episode_summary {
    int n_phases;
    int total_steps;
    int total_intervention_steps;
    int converged;
    double mean_phase_duration;
    double final_loss;
} mpl_episode_summary;

/* One headless episode for users[user_index]; trace_path (JSON Lines) may be NULL. */
MPL_API mpl_status mpl_simulate(const mpl_model *model, const mpl_population *users, size_t user_index,
                                const char *scenario_path, uint64_t seed, const mpl_runtime_options *opts,
                                const char *trace_path, mpl_episode_summary *out);

/* Steering service. ui_dir and host may be NULL. */
typedef struct mpl_server_options {
    const char *checkpoint_path;
    const char *scenario_path;
    const char *ui_dir;
    const char *host;
    unsigned short port;
    double speedup;
    uint64_t seed;
    unsigned threads;
    int handle_signals;
    mpl_runtime_options runtime;
} mpl_server_options;

MPL_API void mpl_server_options_default(mpl_server_options *opts);
MPL_API mpl_status mpl_server_create(const mpl_server_options *opts, mpl_server **out);
MPL_API unsigned short mpl_server_port(const mpl_server *server);
/* Blocks until mpl_server_stop (or a signal when handle_signals is set). */
MPL_API mpl_status mpl_server_run(mpl_server *server);
/* Safe to call from any thread. */
MPL_API void mpl_server_stop(mpl_server *server);
MPL_API void mpl_server_free(mpl_server *server);

#ifdef __cplusplus
}
#endif

#endif
