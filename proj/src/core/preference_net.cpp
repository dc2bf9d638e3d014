#include "preference_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "error.hpp"
#include "rng.hpp"

namespace mpl {

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double activate(Activation a, double z) { return a == Activation::Tanh ? std::tanh(z) : logistic(z); }

// Derivative expressed through the activation output y.
double activation_slope(Activation a, double y) { return a == Activation::Tanh ? 1.0 - y * y : y * (1.0 - y); }

struct LayerView {
    std::size_t fan_in;
    std::size_t fan_out;
    std::size_t offset;  // weights start; biases follow at offset + fan_in*fan_out
};

std::vector<LayerView> layer_views(const ModelParams &p) {
    std::vector<LayerView> views;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
        const auto in = static_cast<std::size_t>(p.layer_dims[l]);
        const auto out = static_cast<std::size_t>(p.layer_dims[l + 1]);
        views.push_back({in, out, offset});
        offset += (in + 1) * out;
    }
    return views;
}

// Activations of every layer (index 0 is the input) for one sample.
std::vector<std::vector<double>> forward_all(const ModelParams &p, const std::vector<LayerView> &views,
                                             std::span<const double> input) {
    std::vector<std::vector<double>> acts;
    acts.reserve(views.size() + 1);
    acts.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < views.size(); ++l) {
        const auto &v = views[l];
        const double *w = p.theta.data() + v.offset;
        const double *b = w + v.fan_in * v.fan_out;
        const auto &x = acts.back();
        std::vector<double> y(v.fan_out);
        for (std::size_t o = 0; o < v.fan_out; ++o) {
            double z = b[o];
            const double *row = w + o * v.fan_in;
            for (std::size_t k = 0; k < v.fan_in; ++k) z += row[k] * x[k];
            y[o] = activate(p.activations[l], z);
        }
        acts.push_back(std::move(y));
    }
    return acts;
}

void check_input(const ModelParams &p, std::size_t n) {
    if (p.layer_dims.size() < 2 || n != p.input_dim())
        throw Error(ErrorCode::Shape, "shape error: input has " + std::to_string(n) + " features");
    if (p.output_dim() != kBehaviorCount) throw Error(ErrorCode::Shape, "shape error: output must have 4 units");
}

}  // namespace

FeatureVector make_features(const PreferenceVector &status, const SituationContext &ctx,
                            const SituationThresholds &thresholds) {
    FeatureVector f{};
    for (std::size_t i = 0; i < kBehaviorCount; ++i) f[i] = std::clamp(status[i], 0.0, 1.0);
    f[4 + static_cast<std::size_t>(ctx.situation())] = 1.0;
    f[8] = std::clamp(ctx.dist_obstacle / (2.0 * thresholds.obstacle), 0.0, 1.0);
    f[9] = std::clamp(ctx.dist_target / (2.0 * thresholds.target), 0.0, 1.0);
    return f;
}

Situation feature_situation(const FeatureVector &f) {
    for (std::size_t s = 0; s < kSituationCount; ++s)
        if (f[4 + s] == 1.0) return static_cast<Situation>(s);
    throw Error(ErrorCode::Shape, "feature vector carries no situation");
}

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "logistic"; }

Activation activation_from_name(const std::string &name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "logistic") return Activation::Logistic;
    throw Error(ErrorCode::Parse, "unknown activation '" + name + "'");
}

std::size_t parameter_count(std::span<const int> layer_dims) {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
        total += static_cast<std::size_t>(layer_dims[l] + 1) * static_cast<std::size_t>(layer_dims[l + 1]);
    return total;
}

void ModelParams::validate() const {
    if (layer_dims.size() < 2) throw Error(ErrorCode::Shape, "shape error: need at least two layer dims");
    for (int d : layer_dims)
        if (d <= 0) throw Error(ErrorCode::Shape, "shape error: layer dims must be positive");
    if (activations.size() != layer_dims.size() - 1)
        throw Error(ErrorCode::Shape, "shape error: one activation per layer required");
    if (theta.size() != parameter_count(layer_dims))
        throw Error(ErrorCode::Shape, "shape error: theta length " + std::to_string(theta.size()) + " != " +
                                          std::to_string(parameter_count(layer_dims)));
    for (double t : theta)
        if (!std::isfinite(t)) throw Error(ErrorCode::Shape, "shape error: non-finite parameter");
}

ModelParams zero_params(std::span<const int> layer_dims) {
    ModelParams p;
    p.layer_dims.assign(layer_dims.begin(), layer_dims.end());
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
        p.activations.push_back(l + 2 == layer_dims.size() ? Activation::Logistic : Activation::Tanh);
    p.theta.assign(parameter_count(layer_dims), 0.0);
    p.validate();
    return p;
}

ModelParams init_params(std::span<const int> layer_dims, std::uint64_t seed) {
    ModelParams p = zero_params(layer_dims);
    Rng rng(derive_seed(seed, 0x696e6974));
    for (const auto &v : layer_views(p)) {
        const double limit = std::sqrt(6.0 / static_cast<double>(v.fan_in + v.fan_out));
        for (std::size_t k = 0; k < v.fan_in * v.fan_out; ++k) p.theta[v.offset + k] = rng.uniform(-limit, limit);
    }
    return p;
}

PreferenceVector forward(const ModelParams &params, std::span<const double> input) {
    check_input(params, input.size());
    const auto acts = forward_all(params, layer_views(params), input);
    PreferenceVector out;
    std::copy(acts.back().begin(), acts.back().end(), out.v.begin());
    return out;
}

double loss(const PreferenceVector &prediction, const PreferenceVector &label) {
    double s = 0.0;
    for (std::size_t i = 0; i < kBehaviorCount; ++i) {
        const double d = prediction[i] - label[i];
        s += d * d;
    }
    return 0.5 * s;
}

double batch_loss(const ModelParams &params, std::span<const LabeledSample> batch) {
    if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");
    double total = 0.0;
    for (const auto &s : batch) total += loss(forward(params, s.input), s.label);
    return total / static_cast<double>(batch.size());
}

std::vector<double> gradient(const ModelParams &params, std::span<const LabeledSample> batch) {
    if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");
    check_input(params, kFeatureCount);
    const auto views = layer_views(params);
    std::vector<double> grad(params.theta.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());

    for (const auto &sample : batch) {
        const auto acts = forward_all(params, views, sample.input);
        // delta = dL/dz for the current layer.
        std::vector<double> delta(views.back().fan_out);
        for (std::size_t o = 0; o < delta.size(); ++o) {
            const double y = acts.back()[o];
            delta[o] = (y - sample.label[o]) * activation_slope(params.activations.back(), y) * scale;
        }
        for (std::size_t l = views.size(); l-- > 0;) {
            const auto &v = views[l];
            const auto &x = acts[l];
            double *gw = grad.data() + v.offset;
            double *gb = gw + v.fan_in * v.fan_out;
            for (std::size_t o = 0; o < v.fan_out; ++o) {
                double *row = gw + o * v.fan_in;
                for (std::size_t k = 0; k < v.fan_in; ++k) row[k] += delta[o] * x[k];
                gb[o] += delta[o];
            }
            if (l == 0) break;
            const double *w = params.theta.data() + v.offset;
            std::vector<double> prev(v.fan_in, 0.0);
            for (std::size_t o = 0; o < v.fan_out; ++o) {
                const double *row = w + o * v.fan_in;
                for (std::size_t k = 0; k < v.fan_in; ++k) prev[k] += row[k] * delta[o];
            }
            for (std::size_t k = 0; k < v.fan_in; ++k) prev[k] *= activation_slope(params.activations[l - 1], x[k]);
            delta = std::move(prev);
        }
    }
    return grad;
}

ModelParams sgd_step(const ModelParams &params, std::span<const LabeledSample> batch, double lr) {
    if (!(lr >= 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be non-negative");
    const auto g = gradient(params, batch);
    ModelParams next = params;
    for (std::size_t k = 0; k < g.size(); ++k) next.theta[k] -= lr * g[k];
    return next;
}

ModelParams sgd_steps(ModelParams params, std::span<const LabeledSample> batch, double lr, int steps) {
    for (int s = 0; s < steps; ++s) params = sgd_step(params, batch, lr);
    return params;
}

std::string reproducible_timestamp() {
    std::time_t t = 0;
    if (const char *env = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json checkpoint_to_json(const Checkpoint &ckpt) {
    nlohmann::json acts = nlohmann::json::array();
    for (auto a : ckpt.params.activations) acts.push_back(activation_name(a));
    return {{"schema_version", kCheckpointSchemaVersion},
            {"layer_dims", ckpt.params.layer_dims},
            {"activations", std::move(acts)},
            {"theta", ckpt.params.theta},
            {"trained_with", ckpt.trained_with},
            {"seed", ckpt.seed},
            {"created_at", ckpt.created_at}};
}

Checkpoint checkpoint_from_json(const nlohmann::json &j) {
    Checkpoint c;
    try {
        if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion)
            throw Error(ErrorCode::Parse, "unsupported checkpoint schema_version");
        c.params.layer_dims = j.at("layer_dims").get<std::vector<int>>();
        for (const auto &a : j.at("activations")) c.params.activations.push_back(activation_from_name(a.get<std::string>()));
        c.params.theta = j.at("theta").get<std::vector<double>>();
        c.trained_with = j.at("trained_with").get<std::string>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.created_at = j.value("created_at", std::string{});
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, std::string("checkpoint: ") + e.what());
    }
    if (c.trained_with != "maml" && c.trained_with != "reptile" && c.trained_with != "baseline")
        throw Error(ErrorCode::Parse, "checkpoint: unknown trained_with '" + c.trained_with + "'");
    c.params.validate();
    if (c.params.input_dim() != kFeatureCount || c.params.output_dim() != kBehaviorCount)
        throw Error(ErrorCode::Shape, "shape error: checkpoint must map 10 features to 4 outputs");
    return c;
}

void save_checkpoint(const Checkpoint &ckpt, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint '" + path + "'");
    out << checkpoint_to_json(ckpt).dump() << '\n';
    if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, "checkpoint '" + path + "': " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace mpl
