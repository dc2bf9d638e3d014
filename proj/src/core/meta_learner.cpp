#include "meta_learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "error.hpp"
#include "rng.hpp"

namespace mpl {

namespace {

constexpr std::uint64_t kBatchStream = 0x6261746368;
constexpr std::uint64_t kTaskStream = 0x7461736b;
constexpr std::uint64_t kPoolStream = 0x706f6f6c;
constexpr std::uint64_t kEvalStream = 0x6576616c;

LabeledSample random_sample(const UserProfile &user, Rng &rng) {
    LabeledSample s;
    const auto situation = static_cast<Situation>(rng.index(kSituationCount));
    for (std::size_t b = 0; b < kBehaviorCount; ++b) s.input[b] = rng.uniform();
    s.input[4 + static_cast<std::size_t>(situation)] = 1.0;
    const bool near_obstacle = situation == Situation::TF || situation == Situation::TT;
    const bool near_target = situation == Situation::FT || situation == Situation::TT;
    // Scaled distances: [0, 0.5] is inside the threshold, (0.5, 1] outside.
    s.input[8] = near_obstacle ? 0.5 * rng.uniform() : 1.0 - 0.5 * rng.uniform();
    s.input[9] = near_target ? 0.5 * rng.uniform() : 1.0 - 0.5 * rng.uniform();
    s.label = user.target(situation);
    return s;
}

void axpy(std::vector<double> &y, double a, const std::vector<double> &x) {
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

}  // namespace

std::string meta_algo_name(MetaAlgo a) {
    switch (a) {
        case MetaAlgo::Maml: return "maml";
        case MetaAlgo::Reptile: return "reptile";
        case MetaAlgo::Baseline: return "baseline";
    }
    return "maml";
}

MetaAlgo meta_algo_from_name(const std::string &name) {
    if (name == "maml") return MetaAlgo::Maml;
    if (name == "reptile") return MetaAlgo::Reptile;
    if (name == "baseline") return MetaAlgo::Baseline;
    throw Error(ErrorCode::InvalidArgument, "unknown algo '" + name + "' (expected maml, reptile or baseline)");
}

MetaConfig MetaConfig::defaults(MetaAlgo algo) {
    MetaConfig cfg;
    cfg.algo = algo;
    cfg.meta_lr = algo == MetaAlgo::Reptile ? 0.5 : 0.1;
    return cfg;
}

void MetaConfig::validate() const {
    if (!(inner_lr >= 0.0)) throw Error(ErrorCode::InvalidArgument, "inner learning rate must be non-negative");
    if (!(meta_lr >= 0.0)) throw Error(ErrorCode::InvalidArgument, "meta learning rate must be non-negative");
    if (inner_steps < 1) throw Error(ErrorCode::InvalidArgument, "inner steps must be at least 1");
    if (epochs < 0) throw Error(ErrorCode::InvalidArgument, "epochs must be non-negative");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be at least 1");
    if (support_size < 1 || query_size < 1)
        throw Error(ErrorCode::InvalidArgument, "support and query sizes must be at least 1");
}

std::vector<LabeledSample> Task::all() const {
    std::vector<LabeledSample> out(support);
    out.insert(out.end(), query.begin(), query.end());
    return out;
}

std::vector<LabeledSample> make_task_dataset(const UserProfile &user, std::size_t m, std::uint64_t seed) {
    if (m < 2) throw Error(ErrorCode::InvalidArgument, "task dataset needs at least two samples");
    Rng rng(derive_seed(seed, kTaskStream, user.id));
    std::vector<LabeledSample> out;
    out.reserve(m);
    for (std::size_t k = 0; k < m; ++k) out.push_back(random_sample(user, rng));
    return out;
}

Task make_task(const UserProfile &user, std::size_t support_size, std::size_t query_size, std::uint64_t seed) {
    auto data = make_task_dataset(user, support_size + query_size, seed);
    Task t;
    t.support.assign(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(support_size));
    t.query.assign(data.begin() + static_cast<std::ptrdiff_t>(support_size), data.end());
    return t;
}

ModelParams inner_adapt(const ModelParams &params, std::span<const LabeledSample> support, double alpha, int k) {
    if (support.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");
    return sgd_steps(params, support, alpha, k);
}

ModelParams maml_epoch(const ModelParams &params, const TaskBatch &batch, const MetaConfig &cfg) {
    if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty task batch");
    std::vector<double> meta_grad(params.theta.size(), 0.0);
    // Reduced in task order so results are bit-reproducible.
    for (const auto &task : batch) {
        const ModelParams adapted = inner_adapt(params, task.support, cfg.inner_lr, cfg.inner_steps);
        axpy(meta_grad, 1.0, gradient(adapted, task.query));
    }
    ModelParams next = params;
    axpy(next.theta, -cfg.meta_lr / static_cast<double>(batch.size()), meta_grad);
    return next;
}

ModelParams reptile_epoch(const ModelParams &params, const TaskBatch &batch, const MetaConfig &cfg) {
    if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty task batch");
    // theta + beta * mean(theta'_i - theta), written as lerp(theta, mean theta'_i, beta).
    // The running mean is exact for one task or identical adapted parameters, and
    // lerp is exact at beta = 0 and beta = 1.
    std::vector<double> mean;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ModelParams adapted = inner_adapt(params, batch[i].all(), cfg.inner_lr, cfg.inner_steps);
        if (i == 0) {
            mean = adapted.theta;
            continue;
        }
        const double w = 1.0 / static_cast<double>(i + 1);
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (adapted.theta[k] - mean[k]) * w;
    }
    ModelParams next = params;
    for (std::size_t k = 0; k < mean.size(); ++k) next.theta[k] = std::lerp(params.theta[k], mean[k], cfg.meta_lr);
    return next;
}

std::size_t gradient_budget_per_epoch(const MetaConfig &cfg) {
    // MAML: k inner gradients plus one query gradient per task.
    return static_cast<std::size_t>(cfg.batch_size) * static_cast<std::size_t>(cfg.inner_steps + 1);
}

TaskBatch sample_task_batch(const std::vector<UserProfile> &users, const MetaConfig &cfg, int epoch) {
    if (users.empty()) throw Error(ErrorCode::InvalidArgument, "empty user population");
    Rng rng(derive_seed(cfg.seed, kBatchStream, static_cast<std::uint64_t>(epoch)));
    const std::size_t n = std::min(users.size(), static_cast<std::size_t>(cfg.batch_size));
    std::vector<std::size_t> order(users.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) std::swap(order[k], order[k + rng.index(order.size() - k)]);
    TaskBatch batch;
    batch.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto task_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), k);
        batch.push_back(make_task(users[order[k]], static_cast<std::size_t>(cfg.support_size),
                                  static_cast<std::size_t>(cfg.query_size), task_seed));
    }
    return batch;
}

namespace {

EpochLog log_epoch(int epoch, const ModelParams &before, const TaskBatch &batch, const MetaConfig &cfg) {
    EpochLog log;
    log.epoch = epoch;
    for (const auto &task : batch) {
        log.mean_support_loss += batch_loss(before, task.support);
        log.mean_query_loss_pre += batch_loss(before, task.query);
        const ModelParams adapted = inner_adapt(before, task.support, cfg.inner_lr, cfg.inner_steps);
        log.mean_query_loss_post += batch_loss(adapted, task.query);
    }
    const double n = static_cast<double>(batch.size());
    log.mean_support_loss /= n;
    log.mean_query_loss_pre /= n;
    log.mean_query_loss_post /= n;
    return log;
}

}  // namespace

std::string training_log_header() { return "epoch,mean_support_loss,mean_query_loss_pre,mean_query_loss_post"; }

std::string training_log_row(const EpochLog &log) {
    return fmt::format("{},{:.9f},{:.9f},{:.9f}", log.epoch, log.mean_support_loss, log.mean_query_loss_pre,
                       log.mean_query_loss_post);
}

ModelParams train_baseline(const ModelParams &params, const std::vector<UserProfile> &users, const MetaConfig &cfg,
                           const std::function<void(const EpochLog &)> &on_epoch) {
    if (users.empty()) throw Error(ErrorCode::InvalidArgument, "empty user population");
    cfg.validate();
    ModelParams theta = params;
    const std::size_t steps = gradient_budget_per_epoch(cfg);
    std::vector<LabeledSample> batch(static_cast<std::size_t>(cfg.support_size));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const ModelParams before = theta;
        Rng rng(derive_seed(cfg.seed, kPoolStream, static_cast<std::uint64_t>(epoch)));
        for (std::size_t s = 0; s < steps; ++s) {
            for (auto &sample : batch) sample = random_sample(users[rng.index(users.size())], rng);
            theta = sgd_step(theta, batch, cfg.inner_lr);
        }
        if (on_epoch) on_epoch(log_epoch(epoch, before, sample_task_batch(users, cfg, epoch), cfg));
    }
    return theta;
}

ModelParams meta_train(const std::vector<UserProfile> &users, const MetaConfig &cfg,
                       const std::function<void(const EpochLog &)> &on_epoch) {
    cfg.validate();
    ModelParams theta = init_params(cfg.layer_dims, cfg.seed);
    if (cfg.algo == MetaAlgo::Baseline) return train_baseline(theta, users, cfg, on_epoch);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const TaskBatch batch = sample_task_batch(users, cfg, epoch);
        if (on_epoch) on_epoch(log_epoch(epoch, theta, batch, cfg));
        theta = cfg.algo == MetaAlgo::Maml ? maml_epoch(theta, batch, cfg) : reptile_epoch(theta, batch, cfg);
    }
    return theta;
}

FewShotResult few_shot_loss(const ModelParams &params, const std::vector<UserProfile> &users, std::size_t support_size,
                            std::size_t query_size, int steps, double lr, std::uint64_t seed) {
    if (users.empty()) throw Error(ErrorCode::InvalidArgument, "empty user population");
    FewShotResult r;
    for (std::size_t u = 0; u < users.size(); ++u) {
        const Task task = make_task(users[u], support_size, query_size, derive_seed(seed, kEvalStream, u));
        r.loss_before += batch_loss(params, task.query);
        r.loss_after += batch_loss(sgd_steps(params, task.support, lr, steps), task.query);
    }
    r.loss_before /= static_cast<double>(users.size());
    r.loss_after /= static_cast<double>(users.size());
    return r;
}

}  // namespace mpl
