// Command-line front end. Talks to the library only through the C API.
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "mpl/mpl.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

constexpr const char *kTypeNames[MPL_TYPE_COUNT] = {"aggressive", "medium", "reserved"};

struct PopulationDeleter {
    void operator()(mpl_population *p) const { mpl_population_free(p); }
};
struct ModelDeleter {
    void operator()(mpl_model *m) const { mpl_model_free(m); }
};
using PopulationPtr = std::unique_ptr<mpl_population, PopulationDeleter>;
using ModelPtr = std::unique_ptr<mpl_model, ModelDeleter>;

// Bad inputs are usage errors; everything else is a runtime failure.
int report(mpl_status status, const std::string &what) {
    fmt::print(stderr, "error: {}: {}\n", what, mpl_last_error());
    switch (status) {
    case MPL_ERR_INVALID_ARGUMENT:
    case MPL_ERR_PARSE:
    case MPL_ERR_SHAPE:
        return kExitUsage;
    default:
        return kExitRuntime;
    }
}

struct RuntimeFlags {
    mpl_runtime_options opts{};

    void add(CLI::App *cmd) {
        mpl_runtime_options_default(&opts);
        cmd->add_option("--online-lr", opts.online_lr, "Online fine-tuning learning rate")
            ->capture_default_str()
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--window", opts.window, "Labeled samples per online update")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--step-cap", opts.step_cap, "Maximum steps per episode")->capture_default_str()->check(CLI::PositiveNumber);
        cmd->add_option("--converge-steps", opts.converge_steps, "Consecutive satisfied steps that end an episode")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--phase-gap", opts.phase_gap, "Satisfied steps that do not split an intervention phase")
            ->capture_default_str()
            ->check(CLI::NonNegativeNumber);
    }
};

int cmd_gen_users(std::size_t n, std::uint64_t seed, const std::string &out, const std::string &bands) {
    mpl_population *raw = nullptr;
    if (auto s = mpl_population_generate(n, seed, bands.empty() ? nullptr : bands.c_str(), &raw)) return report(s, "gen-users");
    PopulationPtr pop(raw);
    if (auto s = mpl_population_save(pop.get(), out.c_str())) return report(s, "gen-users");
    std::size_t counts[MPL_TYPE_COUNT];
    mpl_population_type_counts(pop.get(), counts);
    fmt::print("wrote {} users to {}\n", mpl_population_size(pop.get()), out);
    for (int t = 0; t < MPL_TYPE_COUNT; ++t) fmt::print("  {:<10} {}\n", kTypeNames[t], counts[t]);
    return kExitOk;
}

struct TrainArgs {
    std::string algo;
    std::string users;
    std::string val_users;
    std::string out;
    std::string log;
    int epochs = 500;
    double inner_lr = -1.0;
    double meta_lr = -1.0;
    int inner_steps = 3;
    int batch = 10;
    int support = 10;
    int query = 10;
    std::uint64_t seed = 0;
};

int cmd_meta_train(const TrainArgs &a) {
    const mpl_algo algo = a.algo == "maml" ? MPL_ALGO_MAML : a.algo == "reptile" ? MPL_ALGO_REPTILE : MPL_ALGO_BASELINE;
    mpl_train_options opts;
    mpl_train_options_default(&opts, algo);
    opts.epochs = a.epochs;
    if (a.inner_lr >= 0.0) opts.inner_lr = a.inner_lr;
    if (a.meta_lr >= 0.0) opts.meta_lr = a.meta_lr;
    opts.inner_steps = a.inner_steps;
    opts.batch_size = a.batch;
    opts.support_size = a.support;
    opts.query_size = a.query;
    opts.seed = a.seed;

    mpl_population *raw = nullptr;
    if (auto s = mpl_population_load(a.users.c_str(), &raw)) return report(s, "meta-train: users");
    PopulationPtr users(raw);
    PopulationPtr val;
    if (!a.val_users.empty()) {
        if (auto s = mpl_population_load(a.val_users.c_str(), &raw)) return report(s, "meta-train: validation users");
    } else if (auto s = mpl_population_generate(30, a.seed ^ 0x76616c6964ULL, nullptr, &raw)) {
        return report(s, "meta-train: validation users");
    }
    val.reset(raw);

    mpl_model *model_raw = nullptr;
    if (auto s = mpl_meta_train(users.get(), &opts, a.log.empty() ? nullptr : a.log.c_str(), &model_raw))
        return report(s, "meta-train");
    ModelPtr model(model_raw);
    if (auto s = mpl_model_save(model.get(), a.out.c_str())) return report(s, "meta-train: save");

    double before = 0.0;
    double after = 0.0;
    if (auto s = mpl_few_shot_loss(model.get(), val.get(), static_cast<std::size_t>(a.support),
                                   static_cast<std::size_t>(a.query), 2, opts.inner_lr, a.seed, &before, &after))
        return report(s, "meta-train: validation");
    fmt::print("trained {} for {} epochs on {} users -> {}\n", mpl_model_algo(model.get()), opts.epochs,
               mpl_population_size(users.get()), a.out);
    fmt::print("validation few-shot loss ({} users, 2 steps at lr {}): before {:.6f}  after {:.6f}\n",
               mpl_population_size(val.get()), opts.inner_lr, before, after);
    return kExitOk;
}

struct EvalArgs {
    std::vector<std::string> models;
    std::string users;
    std::string scenario;
    std::string out;
    int seeds = 10;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

int cmd_evaluate(const EvalArgs &a, mpl_runtime_options opts) {
    const auto &paths = a.models;
    std::vector<ModelPtr> models;
    std::vector<const mpl_model *> handles;
    for (const auto &p : paths) {
        mpl_model *raw = nullptr;
        if (auto s = mpl_model_load(p.c_str(), &raw)) return report(s, p);
        models.emplace_back(raw);
        handles.push_back(raw);
    }
    mpl_population *raw = nullptr;
    if (auto s = mpl_population_load(a.users.c_str(), &raw)) return report(s, "evaluate: users");
    PopulationPtr users(raw);

    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < a.seeds; ++i) seeds.push_back(a.seed + static_cast<std::uint64_t>(i));
    opts.threads = a.threads;
    std::vector<mpl_eval_summary> summaries(handles.size());
    if (auto s = mpl_evaluate(handles.data(), handles.size(), users.get(), a.scenario.c_str(), seeds.data(), seeds.size(),
                              &opts, a.out.c_str(), summaries.data()))
        return report(s, "evaluate");

    fmt::print("{} users x {} seeds -> {}\n", mpl_population_size(users.get()), seeds.size(), a.out);
    int baseline = -1;
    for (std::size_t m = 0; m < handles.size(); ++m) {
        const auto &o = summaries[m].overall;
        const std::string algo = mpl_model_algo(handles[m]);
        if (algo == "baseline" && baseline < 0) baseline = static_cast<int>(m);
        fmt::print("{:<9} duration {:.3f} +/- {:.3f}  phases/episode {:.3f} +/- {:.3f}\n", algo, o.mean_duration,
                   o.std_duration, o.mean_phase_count, o.std_phase_count);
        for (int t = 0; t < MPL_TYPE_COUNT; ++t) {
            const auto &g = summaries[m].by_type[t];
            fmt::print("  {:<10} duration {:.3f}  phases/episode {:.3f}\n", kTypeNames[t], g.mean_duration, g.mean_phase_count);
        }
    }
    if (baseline >= 0) {
        const double base = summaries[static_cast<std::size_t>(baseline)].overall.mean_duration;
        for (std::size_t m = 0; m < handles.size(); ++m) {
            if (static_cast<int>(m) == baseline) continue;
            if (base > 0.0)
                fmt::print("duration ratio {}/baseline = {:.6f}\n", mpl_model_algo(handles[m]),
                           summaries[m].overall.mean_duration / base);
            else
                fmt::print("duration ratio {}/baseline undefined (baseline had no phases)\n", mpl_model_algo(handles[m]));
        }
    }
    return kExitOk;
}

struct SimArgs {
    std::string model;
    std::string users;
    std::string scenario;
    std::string trace;
    std::size_t user_index = 0;
    std::uint64_t seed = 0;
};

int cmd_simulate(const SimArgs &a, const mpl_runtime_options &opts) {
    mpl_model *model_raw = nullptr;
    if (auto s = mpl_model_load(a.model.c_str(), &model_raw)) return report(s, a.model);
    ModelPtr model(model_raw);
    mpl_population *raw = nullptr;
    if (auto s = mpl_population_load(a.users.c_str(), &raw)) return report(s, "simulate: users");
    PopulationPtr users(raw);
    mpl_episode_summary r{};
    if (auto s = mpl_simulate(model.get(), users.get(), a.user_index, a.scenario.c_str(), a.seed, &opts,
                              a.trace.empty() ? nullptr : a.trace.c_str(), &r))
        return report(s, "simulate");
    fmt::print("user {} with {}: {} steps, {} phases, {} intervention steps, mean duration {:.3f}, converged {}, final loss {:.6f}\n",
               a.user_index, mpl_model_algo(model.get()), r.total_steps, r.n_phases, r.total_intervention_steps,
               r.mean_phase_duration, r.converged ? "yes" : "no", r.final_loss);
    return kExitOk;
}

struct ServeArgs {
    std::string model;
    std::string scenario;
    std::string ui;
    std::string host = "127.0.0.1";
    unsigned short port = 8765;
    double speedup = 1.0;
    std::uint64_t seed = 0;
    unsigned threads = 2;
};

int cmd_serve(const ServeArgs &a, const mpl_runtime_options &runtime) {
    mpl_server_options opts;
    mpl_server_options_default(&opts);
    opts.checkpoint_path = a.model.c_str();
    opts.scenario_path = a.scenario.c_str();
    opts.ui_dir = a.ui.empty() ? nullptr : a.ui.c_str();
    opts.host = a.host.c_str();
    opts.port = a.port;
    opts.speedup = a.speedup;
    opts.seed = a.seed;
    opts.threads = a.threads;
    opts.handle_signals = 1;
    opts.runtime = runtime;
    mpl_server *server = nullptr;
    if (auto s = mpl_server_create(&opts, &server)) return report(s, "serve");
    fmt::print("serving on http://{}:{}/ (websocket on the same port)\n", a.host, mpl_server_port(server));
    std::fflush(stdout);
    const auto s = mpl_server_run(server);
    mpl_server_free(server);
    if (s) return report(s, "serve");
    fmt::print("server stopped\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Meta preference learning for human-steered robot flocks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mpl_version()));

    std::size_t n_users = 2000;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    std::string gen_bands;
    auto *gen = app.add_subcommand("gen-users", "Generate a simulated user population (JSON Lines)");
    gen->add_option("--n", n_users, "Number of users (2000 for training, 30 for held-out evaluation)")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max()));
    gen->add_option("--seed", gen_seed, "Random seed")->required();
    gen->add_option("--out", gen_out, "Output population file")->required();
    gen->add_option("--bands", gen_bands, "Type bands JSON (default: built-in bands)")->check(CLI::ExistingFile);

    TrainArgs train;
    auto *mt = app.add_subcommand("meta-train", "Train a preference model checkpoint");
    mt->add_option("--algo", train.algo, "maml, reptile or baseline")
        ->required()
        ->check(CLI::IsMember({"maml", "reptile", "baseline"}));
    mt->add_option("--users", train.users, "Training population file")->required()->check(CLI::ExistingFile);
    mt->add_option("--out", train.out, "Output checkpoint file")->required();
    mt->add_option("--seed", train.seed, "Seed for initialization and task sampling")->required();
    mt->add_option("--log", train.log, "Training log CSV (epoch, support and query losses)");
    mt->add_option("--val-users", train.val_users,
                   "Validation population for the printed few-shot loss (default: 30 users generated from the seed)")
        ->check(CLI::ExistingFile);
    mt->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
    mt->add_option("--inner-lr", train.inner_lr, "Inner / pooled SGD learning rate (default 0.1)")->check(CLI::NonNegativeNumber);
    mt->add_option("--meta-lr", train.meta_lr, "Meta step size (default 0.1 for maml, 0.5 for reptile)")
        ->check(CLI::NonNegativeNumber);
    mt->add_option("--inner-steps", train.inner_steps, "Inner SGD steps per task")->capture_default_str()->check(CLI::PositiveNumber);
    mt->add_option("--batch", train.batch, "Users per meta-batch")->capture_default_str()->check(CLI::PositiveNumber);
    mt->add_option("--support", train.support, "Support samples per user")->capture_default_str()->check(CLI::PositiveNumber);
    mt->add_option("--query", train.query, "Query samples per user")->capture_default_str()->check(CLI::PositiveNumber);

    EvalArgs eval;
    RuntimeFlags eval_rt;
    auto *ev = app.add_subcommand("evaluate", "Run deployment episodes and write per-episode metrics");
    ev->add_option("--models", eval.models, "Comma-separated checkpoint files")
        ->required()
        ->delimiter(',')
        ->check(CLI::ExistingFile);
    ev->add_option("--users", eval.users, "Held-out population file")->required()->check(CLI::ExistingFile);
    ev->add_option("--scenario", eval.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", eval.out, "Metrics CSV")->required();
    ev->add_option("--seed", eval.seed, "First episode seed; seeds run seed..seed+N-1")->required();
    ev->add_option("--seeds", eval.seeds, "Episode seeds per user (N)")->capture_default_str()->check(CLI::PositiveNumber);
    ev->add_option("--threads", eval.threads, "Worker threads (output does not depend on this)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    eval_rt.add(ev);

    SimArgs sim;
    RuntimeFlags sim_rt;
    auto *sm = app.add_subcommand("simulate", "Run one headless episode");
    sm->add_option("--model", sim.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
    sm->add_option("--users", sim.users, "Population file")->required()->check(CLI::ExistingFile);
    sm->add_option("--scenario", sim.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sm->add_option("--seed", sim.seed, "Episode seed")->required();
    sm->add_option("--user-index", sim.user_index, "Row of the population file")->capture_default_str();
    sm->add_option("--trace", sim.trace, "Per-step trace (JSON Lines)");
    sim_rt.add(sm);

    ServeArgs serve;
    RuntimeFlags serve_rt;
    auto *sv = app.add_subcommand("serve", "Host the live steering service");
    sv->add_option("--model", serve.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
    sv->add_option("--scenario", serve.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sv->add_option("--seed", serve.seed, "World seed for every session")->required();
    sv->add_option("--ui", serve.ui, "Directory of static UI files")->check(CLI::ExistingDirectory);
    sv->add_option("--host", serve.host, "Listen address")->capture_default_str();
    sv->add_option("--port", serve.port, "Listen port (0 picks a free one)")->capture_default_str();
    sv->add_option("--speedup", serve.speedup, "Simulated seconds per wall-clock second")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sv->add_option("--threads", serve.threads, "I/O threads")->capture_default_str()->check(CLI::PositiveNumber);
    serve_rt.add(sv);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitUsage;
    }

    if (*gen) return cmd_gen_users(n_users, gen_seed, gen_out, gen_bands);
    if (*mt) return cmd_meta_train(train);
    if (*ev) return cmd_evaluate(eval, eval_rt.opts);
    if (*sm) return cmd_simulate(sim, sim_rt.opts);
    if (*sv) return cmd_serve(serve, serve_rt.opts);
    return kExitUsage;
}
