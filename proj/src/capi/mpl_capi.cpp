#include "mpl/mpl.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "adaptation.hpp"
#include "error.hpp"
#include "server.hpp"

struct mpl_population {
    std::vector<mpl::UserProfile> users;
};

struct mpl_model {
    mpl::Checkpoint checkpoint;
};

struct mpl_server {
    std::unique_ptr<mpl::Server> server;
};

namespace {

thread_local std::string g_last_error;

mpl_status fail(mpl_status status, const std::string &message) {
    g_last_error = message;
    return status;
}

// Runs f, mapping exceptions to status codes and the thread's last error.
template <class F>
mpl_status guarded(F &&f) {
    try {
        g_last_error.clear();
        f();
        return MPL_OK;
    } catch (const mpl::Error &e) {
        return fail(static_cast<mpl_status>(e.code()), e.what());
    } catch (const std::bad_alloc &) {
        return fail(MPL_ERR_RUNTIME, "out of memory");
    } catch (const std::exception &e) {
        return fail(MPL_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(MPL_ERR_RUNTIME, "unknown error");
    }
}

void require(bool ok, const char *message) {
    if (!ok) throw mpl::Error(mpl::ErrorCode::InvalidArgument, message);
}

mpl::RuntimeConfig runtime_config(const mpl_runtime_options *opts) {
    mpl::RuntimeConfig cfg;
    if (opts) {
        cfg.online_lr = opts->online_lr;
        cfg.window = opts->window;
        cfg.converge_steps = opts->converge_steps;
        cfg.step_cap = opts->step_cap;
        cfg.phase_gap = opts->phase_gap;
    }
    cfg.validate();
    return cfg;
}

mpl_aggregate to_c(const mpl::Aggregate &a) {
    return {a.episodes, a.phases, a.mean_duration, a.std_duration, a.mean_phase_count, a.std_phase_count};
}

}  // namespace

extern "C" {

const char *mpl_last_error(void) { return g_last_error.c_str(); }

const char *mpl_status_name(mpl_status status) {
    switch (status) {
    case MPL_OK: return "ok";
    case MPL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MPL_ERR_IO: return "io error";
    case MPL_ERR_PARSE: return "parse error";
    case MPL_ERR_SHAPE: return "shape mismatch";
    case MPL_ERR_EMPTY_BATCH: return "empty batch";
    case MPL_ERR_INSUFFICIENT_FLOCK: return "insufficient flock";
    case MPL_ERR_INVALID_ENDPOINT: return "invalid endpoint";
    case MPL_ERR_UNREACHABLE: return "unreachable";
    case MPL_ERR_INVALID_INSTRUCTION: return "invalid instruction";
    case MPL_ERR_PORT_IN_USE: return "port in use";
    case MPL_ERR_RUNTIME: return "runtime error";
    }
    return "unknown status";
}

const char *mpl_version(void) { return "1.0.0"; }

mpl_status mpl_population_generate(size_t n, uint64_t seed, const char *bands_path, mpl_population **out) {
    return guarded([&] {
        require(out != nullptr, "out is null");
        require(n >= 1, "population size must be at least 1");
        const auto bands = bands_path ? mpl::load_bands(bands_path) : mpl::default_type_bands();
        *out = new mpl_population{mpl::generate_population(n, bands, seed)};
    });
}

mpl_status mpl_population_load(const char *path, mpl_population **out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new mpl_population{mpl::load_population(path)};
    });
}

mpl_status mpl_population_save(const mpl_population *pop, const char *path) {
    return guarded([&] {
        require(pop && path, "null argument");
        mpl::save_population(pop->users, path);
    });
}

size_t mpl_population_size(const mpl_population *pop) { return pop ? pop->users.size() : 0; }

mpl_status mpl_population_type_counts(const mpl_population *pop, size_t counts[MPL_TYPE_COUNT]) {
    return guarded([&] {
        require(pop && counts, "null argument");
        const auto c = mpl::type_counts(pop->users);
        for (std::size_t t = 0; t < MPL_TYPE_COUNT; ++t) counts[t] = c[t];
    });
}

void mpl_population_free(mpl_population *pop) { delete pop; }

void mpl_train_options_default(mpl_train_options *opts, mpl_algo algo) {
    if (!opts) return;
    const auto cfg = mpl::MetaConfig::defaults(static_cast<mpl::MetaAlgo>(algo));
    *opts = {algo, cfg.epochs, cfg.inner_lr, cfg.meta_lr, cfg.inner_steps,
             cfg.batch_size, cfg.support_size, cfg.query_size, cfg.seed};
}

mpl_status mpl_meta_train(const mpl_population *users, const mpl_train_options *opts, const char *log_csv_path,
                          mpl_model **out) {
    return guarded([&] {
        require(users && opts && out, "null argument");
        require(opts->algo >= MPL_ALGO_MAML && opts->algo <= MPL_ALGO_BASELINE, "unknown algorithm");
        const auto algo = static_cast<mpl::MetaAlgo>(opts->algo);
        auto cfg = mpl::MetaConfig::defaults(algo);
        cfg.epochs = opts->epochs;
        cfg.inner_lr = opts->inner_lr;
        if (opts->meta_lr >= 0.0) cfg.meta_lr = opts->meta_lr;
        cfg.inner_steps = opts->inner_steps;
        cfg.batch_size = opts->batch_size;
        cfg.support_size = opts->support_size;
        cfg.query_size = opts->query_size;
        cfg.seed = opts->seed;
        cfg.validate();

        std::ofstream log;
        if (log_csv_path) {
            log.open(log_csv_path, std::ios::binary);
            if (!log) throw mpl::Error(mpl::ErrorCode::Io, std::string("cannot write training log '") + log_csv_path + "'");
            log << mpl::training_log_header() << '\n';
        }
        std::function<void(const mpl::EpochLog &)> on_epoch;
        if (log_csv_path) on_epoch = [&](const mpl::EpochLog &e) { log << mpl::training_log_row(e) << '\n'; };
        auto model = std::make_unique<mpl_model>();
        model->checkpoint = {mpl::meta_train(users->users, cfg, on_epoch), mpl::meta_algo_name(algo), cfg.seed,
                             mpl::reproducible_timestamp()};
        if (log_csv_path && !log)
            throw mpl::Error(mpl::ErrorCode::Io, std::string("failed writing training log '") + log_csv_path + "'");
        *out = model.release();
    });
}

mpl_status mpl_model_load(const char *path, mpl_model **out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new mpl_model{mpl::load_checkpoint(path)};
    });
}

mpl_status mpl_model_save(const mpl_model *model, const char *path) {
    return guarded([&] {
        require(model && path, "null argument");
        mpl::save_checkpoint(model->checkpoint, path);
    });
}

const char *mpl_model_algo(const mpl_model *model) { return model ? model->checkpoint.trained_with.c_str() : ""; }

size_t mpl_model_parameter_count(const mpl_model *model) { return model ? model->checkpoint.params.theta.size() : 0; }

mpl_status mpl_model_params(const mpl_model *model, double *theta, size_t n) {
    return guarded([&] {
        require(model && theta, "null argument");
        const auto &src = model->checkpoint.params.theta;
        if (n != src.size()) throw mpl::Error(mpl::ErrorCode::Shape, "parameter buffer has the wrong length");
        std::copy(src.begin(), src.end(), theta);
    });
}

void mpl_model_free(mpl_model *model) { delete model; }

mpl_status mpl_few_shot_loss(const mpl_model *model, const mpl_population *users, size_t support_size,
                             size_t query_size, int steps, double lr, uint64_t seed, double *loss_before,
                             double *loss_after) {
    return guarded([&] {
        require(model && users, "null argument");
        require(support_size >= 1 && query_size >= 1 && steps >= 0 && lr >= 0.0, "invalid few-shot settings");
        const auto r = mpl::few_shot_loss(model->checkpoint.params, users->users, support_size, query_size, steps, lr, seed);
        if (loss_before) *loss_before = r.loss_before;
        if (loss_after) *loss_after = r.loss_after;
    });
}

void mpl_runtime_options_default(mpl_runtime_options *opts) {
    if (!opts) return;
    const mpl::RuntimeConfig cfg;
    *opts = {cfg.online_lr, cfg.window, cfg.converge_steps, cfg.step_cap, cfg.phase_gap, 1};
}

mpl_status mpl_evaluate(const mpl_model *const *models, size_t n_models, const mpl_population *users,
                        const char *scenario_path, const uint64_t *seeds, size_t n_seeds,
                        const mpl_runtime_options *opts, const char *csv_path, mpl_eval_summary *summaries) {
    return guarded([&] {
        require(models && n_models >= 1 && users && scenario_path && seeds && n_seeds >= 1, "invalid evaluate arguments");
        for (size_t m = 0; m < n_models; ++m) require(models[m] != nullptr, "null model");
        const auto cfg = runtime_config(opts);
        const auto scenario = mpl::load_scenario(scenario_path);
        const std::vector<std::uint64_t> seed_list(seeds, seeds + n_seeds);
        const unsigned threads = opts ? opts->threads : 1;
        std::vector<mpl::MetricsRow> rows;
        for (size_t m = 0; m < n_models; ++m) {
            auto result = mpl::evaluate_suite(models[m]->checkpoint, users->users, scenario, cfg, seed_list, threads);
            if (summaries) {
                summaries[m].overall = to_c(result.overall);
                for (std::size_t t = 0; t < MPL_TYPE_COUNT; ++t) summaries[m].by_type[t] = to_c(result.by_type[t]);
            }
            rows.insert(rows.end(), result.rows.begin(), result.rows.end());
        }
        if (csv_path) mpl::write_metrics_csv(rows, csv_path);
    });
}

mpl_status mpl_simulate(const mpl_model *model, const mpl_population *users, size_t user_index,
                        const char *scenario_path, uint64_t seed, const mpl_runtime_options *opts,
                        const char *trace_path, mpl_episode_summary *out) {
    return guarded([&] {
        require(model && users && scenario_path, "null argument");
        require(user_index < users->users.size(), "user index out of range");
        auto cfg = runtime_config(opts);
        cfg.record_trace = trace_path != nullptr;
        const auto scenario = mpl::load_scenario(scenario_path);
        const auto result = mpl::run_episode(model->checkpoint.params, users->users[user_index], scenario, cfg, seed);
        const auto &r = result.report;
        if (trace_path) {
            std::ofstream trace(trace_path, std::ios::binary);
            if (!trace) throw mpl::Error(mpl::ErrorCode::Io, std::string("cannot write trace '") + trace_path + "'");
            for (const auto &t : r.trace) trace << mpl::trace_step_to_json(t).dump() << '\n';
            if (!trace) throw mpl::Error(mpl::ErrorCode::Io, std::string("failed writing trace '") + trace_path + "'");
        }
        if (out) {
            *out = {static_cast<int>(r.phases.size()), r.total_steps, r.total_intervention_steps(), r.converged ? 1 : 0,
                    r.mean_phase_duration(), r.final_loss};
        }
    });
}

void mpl_server_options_default(mpl_server_options *opts) {
    if (!opts) return;
    const mpl::ServerConfig cfg;
    *opts = {};
    opts->host = nullptr;
    opts->port = cfg.port;
    opts->speedup = cfg.speedup;
    opts->seed = cfg.seed;
    opts->threads = cfg.threads;
    opts->handle_signals = 0;
    mpl_runtime_options_default(&opts->runtime);
}

mpl_status mpl_server_create(const mpl_server_options *opts, mpl_server **out) {
    return guarded([&] {
        require(opts && out, "null argument");
        require(opts->checkpoint_path && opts->scenario_path, "checkpoint and scenario paths are required");
        mpl::ServerConfig cfg;
        cfg.checkpoint_path = opts->checkpoint_path;
        cfg.scenario_path = opts->scenario_path;
        if (opts->ui_dir) cfg.ui_dir = opts->ui_dir;
        if (opts->host) cfg.host = opts->host;
        cfg.port = opts->port;
        cfg.speedup = opts->speedup;
        cfg.seed = opts->seed;
        cfg.threads = opts->threads;
        cfg.handle_signals = opts->handle_signals != 0;
        cfg.runtime = runtime_config(&opts->runtime);
        auto server = std::make_unique<mpl_server>();
        server->server = std::make_unique<mpl::Server>(cfg);
        *out = server.release();
    });
}

unsigned short mpl_server_port(const mpl_server *server) { return server ? server->server->port() : 0; }

mpl_status mpl_server_run(mpl_server *server) {
    return guarded([&] {
        require(server != nullptr, "null server");
        server->server->run();
    });
}

void mpl_server_stop(mpl_server *server) {
    if (server) server->server->stop();
}

void mpl_server_free(mpl_server *server) { delete server; }

}  // extern "C"
