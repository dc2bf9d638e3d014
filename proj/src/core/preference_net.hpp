#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "world.hpp"

namespace mpl {

inline constexpr std::size_t kFeatureCount = 10;

/// Model input: normalized motion status (4), situation one-hot FF/TF/FT/TT (4),
/// distance to nearest obstacle and target scaled by 2x threshold and clamped (2).
using FeatureVector = std::array<double, kFeatureCount>;

FeatureVector make_features(const PreferenceVector &status, const SituationContext &ctx,
                            const SituationThresholds &thresholds = {});
Situation feature_situation(const FeatureVector &f);

enum class Activation { Tanh, Logistic };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string &name);

/// Feed-forward network parameters. theta is laid out layer by layer, each layer
/// as a row-major [fan_out x fan_in] weight block followed by fan_out biases.
struct ModelParams {
    std::vector<int> layer_dims;
    std::vector<Activation> activations;  // one per weight layer
    std::vector<double> theta;

    std::size_t input_dim() const { return static_cast<std::size_t>(layer_dims.front()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(layer_dims.back()); }
    std::size_t layer_count() const { return activations.size(); }

    /// Throws Error(Shape) on inconsistent metadata or non-finite theta.
    void validate() const;
    friend bool operator==(const ModelParams &, const ModelParams &) = default;
};

std::size_t parameter_count(std::span<const int> layer_dims);

inline const std::vector<int> kDefaultLayerDims = {10, 64, 64, 4};

/// Tanh hidden layers, logistic output, Glorot-uniform weights, zero biases.
ModelParams init_params(std::span<const int> layer_dims, std::uint64_t seed);
ModelParams zero_params(std::span<const int> layer_dims);

struct LabeledSample {
    FeatureVector input{};
    PreferenceVector label;
};

PreferenceVector forward(const ModelParams &params, std::span<const double> input);
inline PreferenceVector forward(const ModelParams &params, const FeatureVector &input) {
    return forward(params, std::span<const double>(input));
}

/// Half squared L2 distance summed over the four behaviors.
double loss(const PreferenceVector &prediction, const PreferenceVector &label);
double batch_loss(const ModelParams &params, std::span<const LabeledSample> batch);

/// Exact backprop gradient of batch_loss. Throws Error(EmptyBatch).
std::vector<double> gradient(const ModelParams &params, std::span<const LabeledSample> batch);

ModelParams sgd_step(const ModelParams &params, std::span<const LabeledSample> batch, double lr);
ModelParams sgd_steps(ModelParams params, std::span<const LabeledSample> batch, double lr, int steps);

/// On-disk checkpoint. Round trip is bit-exact on theta.
struct Checkpoint {
    ModelParams params;
    std::string trained_with = "baseline";
    std::uint64_t seed = 0;
    std::string created_at;
};

inline constexpr int kCheckpointSchemaVersion = 1;

nlohmann::json checkpoint_to_json(const Checkpoint &ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json &j);
void save_checkpoint(const Checkpoint &ckpt, const std::string &path);
Checkpoint load_checkpoint(const std::string &path);

/// Timestamp for checkpoint metadata: SOURCE_DATE_EPOCH when set, else the Unix epoch.
std::string reproducible_timestamp();

}  // namespace mpl
