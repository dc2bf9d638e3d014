#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "preference_net.hpp"
#include "user_oracle.hpp"

namespace mpl {

enum class MetaAlgo { Maml, Reptile, Baseline };

std::string meta_algo_name(MetaAlgo a);
MetaAlgo meta_algo_from_name(const std::string &name);

struct MetaConfig {
    MetaAlgo algo = MetaAlgo::Maml;
    double inner_lr = 0.1;   // alpha
    double meta_lr = 0.1;    // beta
    int inner_steps = 3;     // k
    int epochs = 500;
    int batch_size = 10;     // users per meta-batch
    int support_size = 10;
    int query_size = 10;
    std::uint64_t seed = 7;
    std::vector<int> layer_dims = kDefaultLayerDims;

    /// Defaults per algorithm (Reptile takes a larger meta step).
    static MetaConfig defaults(MetaAlgo algo);
    void validate() const;
};

/// One user's samples split into disjoint support and query sets.
struct Task {
    std::vector<LabeledSample> support;
    std::vector<LabeledSample> query;

    std::vector<LabeledSample> all() const;
};

using TaskBatch = std::vector<Task>;

/// m random feature vectors for the user, each labeled with the user's target
/// for the situation encoded in the features.
std::vector<LabeledSample> make_task_dataset(const UserProfile &user, std::size_t m, std::uint64_t seed);

Task make_task(const UserProfile &user, std::size_t support_size, std::size_t query_size, std::uint64_t seed);

/// k full-batch SGD steps at rate alpha on the support set.
ModelParams inner_adapt(const ModelParams &params, std::span<const LabeledSample> support, double alpha, int k);

/// First-order MAML: meta-gradient is the query gradient at the adapted parameters.
ModelParams maml_epoch(const ModelParams &params, const TaskBatch &batch, const MetaConfig &cfg);

/// Reptile: theta += beta * mean(theta'_i - theta), adapting on each task's full set.
ModelParams reptile_epoch(const ModelParams &params, const TaskBatch &batch, const MetaConfig &cfg);

/// Gradient evaluations a meta run spends per epoch; the baseline gets the same budget.
std::size_t gradient_budget_per_epoch(const MetaConfig &cfg);

struct EpochLog {
    int epoch = 0;
    double mean_support_loss = 0.0;
    double mean_query_loss_pre = 0.0;
    double mean_query_loss_post = 0.0;
};

std::string training_log_header();
std::string training_log_row(const EpochLog &log);

/// Pooled SGD over all users (no meta mechanism) for `epochs` epochs of
/// gradient_budget_per_epoch steps each. Batches mix samples from uniformly drawn users.
ModelParams train_baseline(const ModelParams &params, const std::vector<UserProfile> &users, const MetaConfig &cfg,
                           const std::function<void(const EpochLog &)> &on_epoch = {});

/// Full training run for cfg.algo from a seeded initialization.
ModelParams meta_train(const std::vector<UserProfile> &users, const MetaConfig &cfg,
                       const std::function<void(const EpochLog &)> &on_epoch = {});

/// Users (without replacement) and their tasks for one epoch.
TaskBatch sample_task_batch(const std::vector<UserProfile> &users, const MetaConfig &cfg, int epoch);

struct FewShotResult {
    double loss_before = 0.0;
    double loss_after = 0.0;
};

/// Mean query loss over users after `steps` SGD steps at `lr` on each user's support set.
FewShotResult few_shot_loss(const ModelParams &params, const std::vector<UserProfile> &users, std::size_t support_size,
                            std::size_t query_size, int steps, double lr, std::uint64_t seed);

}  // namespace mpl
