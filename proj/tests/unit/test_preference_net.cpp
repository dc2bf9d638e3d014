#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <vector>

#include "error.hpp"
#include "preference_net.hpp"
#include "rng.hpp"

using namespace mpl;

namespace {

FeatureVector random_features(Rng &rng) {
    FeatureVector f{};
    for (std::size_t i = 0; i < 4; ++i) f[i] = rng.uniform();
    f[4 + rng.index(4)] = 1.0;
    f[8] = rng.uniform();
    f[9] = rng.uniform();
    return f;
}

LabeledSample random_sample(Rng &rng) {
    LabeledSample s;
    s.input = random_features(rng);
    for (std::size_t b = 0; b < kBehaviorCount; ++b) s.label[b] = rng.uniform();
    return s;
}

// Second forward pass written directly against the documented theta layout.
template <class T>
std::array<T, 4> reference_forward(const ModelParams &p, const std::vector<T> &theta, const FeatureVector &x) {
    std::vector<T> a(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
        const int in = p.layer_dims[l], out = p.layer_dims[l + 1];
        const std::size_t bias = off + static_cast<std::size_t>(in * out);
        std::vector<T> z(static_cast<std::size_t>(out));
        for (int o = 0; o < out; ++o) {
            T s = theta[bias + o];
            for (int i = 0; i < in; ++i) s += theta[off + static_cast<std::size_t>(o * in + i)] * a[i];
            z[o] = p.activations[l] == Activation::Tanh ? std::tanh(s) : T(1) / (T(1) + std::exp(-s));
        }
        a = z;
        off = bias + out;
    }
    return {a[0], a[1], a[2], a[3]};
}

// Loss evaluated in extended precision so the finite-difference quotient is
// not dominated by double rounding.
long double reference_loss(const ModelParams &p, const std::vector<long double> &theta, const LabeledSample &s) {
    auto h = reference_forward(p, theta, s.input);
    long double total = 0;
    for (std::size_t b = 0; b < 4; ++b) total += (h[b] - s.label[b]) * (h[b] - s.label[b]);
    return total / 2;
}

}  // namespace

TEST_CASE("zero parameters predict one half") {
    auto p = zero_params(kDefaultLayerDims);
    Rng rng(1);
    auto h = forward(p, random_features(rng));
    for (std::size_t b = 0; b < 4; ++b) CHECK(h[b] == 0.5);
}

TEST_CASE("parameter layout and initialization") {
    CHECK(parameter_count(kDefaultLayerDims) == 11 * 64 + 65 * 64 + 65 * 4);
    auto p = init_params(kDefaultLayerDims, 5);
    CHECK(p.theta.size() == parameter_count(kDefaultLayerDims));
    CHECK(p.activations == std::vector<Activation>{Activation::Tanh, Activation::Tanh, Activation::Logistic});
    CHECK(init_params(kDefaultLayerDims, 5) == p);
    CHECK_FALSE(init_params(kDefaultLayerDims, 6) == p);
    // First layer weights within the Glorot bound, biases zero.
    const double bound = std::sqrt(6.0 / (10 + 64));
    for (std::size_t k = 0; k < 640; ++k) CHECK(std::abs(p.theta[k]) <= bound);
    for (std::size_t k = 640; k < 704; ++k) CHECK(p.theta[k] == 0.0);
}

TEST_CASE("forward matches a reference implementation") {
    Rng rng(31);
    for (int k = 0; k < 200; ++k) {
        auto p = init_params(kDefaultLayerDims, rng.next());
        for (auto &t : p.theta) t += rng.uniform(-0.3, 0.3);
        auto x = random_features(rng);
        auto h = forward(p, x);
        auto ref = reference_forward(p, p.theta, x);
        for (std::size_t b = 0; b < 4; ++b) {
            CHECK(h[b] == doctest::Approx(ref[b]).epsilon(1e-13));
            CHECK(h[b] > 0.0);
            CHECK(h[b] < 1.0);
        }
    }
}

TEST_CASE("forward rejects a wrong input width") {
    auto p = init_params(kDefaultLayerDims, 1);
    std::vector<double> x(7, 0.0);
    try {
        forward(p, std::span<const double>(x));
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::Shape);
        CHECK(std::string(e.what()).starts_with("shape error"));
    }
}

TEST_CASE("loss values") {
    CHECK(loss({{0.3, 0.4, 0.5, 0.6}}, {{0.3, 0.4, 0.5, 0.6}}) == 0.0);
    CHECK(loss({{0, 0, 0, 0}}, {{1, 1, 1, 1}}) == doctest::Approx(2.0));
    CHECK(loss({{0.5, 0.5, 0.5, 0.5}}, {{0.6, 0.4, 0.5, 0.5}}) == doctest::Approx(0.01));
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(4);
    double worst = 0.0;
    for (int draw = 0; draw < 10; ++draw) {
        auto p = init_params(kDefaultLayerDims, rng.next());
        auto s = random_sample(rng);
        std::vector<LabeledSample> batch = {s};
        auto g = gradient(p, batch);
        std::vector<long double> theta(p.theta.begin(), p.theta.end());
        for (std::size_t k = 0; k < theta.size(); k += 7) {
            const long double eps = 1e-5L;
            auto t = theta;
            t[k] = theta[k] + eps;
            const long double up = reference_loss(p, t, s);
            t[k] = theta[k] - eps;
            const long double down = reference_loss(p, t, s);
            const double fd = static_cast<double>((up - down) / (2 * eps));
            const double scale = std::max(std::abs(fd), std::abs(g[k]));
            if (scale > 0.0) worst = std::max(worst, std::abs(fd - g[k]) / scale);
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("gradient vanishes at an exact fit") {
    auto p = init_params(kDefaultLayerDims, 9);
    Rng rng(9);
    std::vector<LabeledSample> batch;
    for (int k = 0; k < 5; ++k) {
        LabeledSample s;
        s.input = random_features(rng);
        s.label = forward(p, s.input);
        batch.push_back(s);
    }
    for (double x : gradient(p, batch)) CHECK(std::abs(x) <= 1e-12);
}

TEST_CASE("gradient is a batch mean") {
    Rng rng(10);
    auto p = init_params(kDefaultLayerDims, 10);
    auto s = random_sample(rng);
    std::vector<LabeledSample> one = {s}, two = {s, s};
    auto g1 = gradient(p, one);
    auto g2 = gradient(p, two);
    for (std::size_t k = 0; k < g1.size(); ++k) CHECK(g2[k] == doctest::Approx(g1[k]).epsilon(1e-14));
}

TEST_CASE("empty batch") {
    auto p = init_params(kDefaultLayerDims, 1);
    std::vector<LabeledSample> none;
    try {
        gradient(p, none);
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::EmptyBatch);
        CHECK(std::string(e.what()) == "empty batch");
    }
    CHECK_THROWS_AS(batch_loss(p, none), Error);
}

TEST_CASE("sgd step semantics") {
    Rng rng(12);
    auto p = init_params(kDefaultLayerDims, 12);
    const auto original = p;
    std::vector<LabeledSample> batch = {random_sample(rng)};

    CHECK(sgd_step(p, batch, 0.0) == p);
    auto q = sgd_step(p, batch, 0.05);
    CHECK(p == original);
    CHECK_FALSE(q == p);

    auto g = gradient(p, batch);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(q.theta[k] == p.theta[k] - 0.05 * g[k]);

    CHECK(sgd_steps(p, batch, 0.05, 2) == sgd_step(sgd_step(p, batch, 0.05), batch, 0.05));
    CHECK_THROWS_AS(sgd_step(p, batch, -1.0), Error);
}

TEST_CASE("small steps descend") {
    Rng rng(13);
    for (int k = 0; k < 100; ++k) {
        auto p = init_params(kDefaultLayerDims, rng.next());
        std::vector<LabeledSample> batch = {random_sample(rng)};
        const double before = batch_loss(p, batch);
        if (before < 1e-9) continue;
        CHECK(batch_loss(sgd_step(p, batch, 1e-3), batch) < before);
    }
}

TEST_CASE("batch loss ignores sample order") {
    Rng rng(14);
    auto p = init_params(kDefaultLayerDims, 14);
    std::vector<LabeledSample> batch;
    for (int k = 0; k < 16; ++k) batch.push_back(random_sample(rng));
    const double base = batch_loss(p, batch);
    for (int t = 0; t < 20; ++t) {
        for (std::size_t i = batch.size() - 1; i > 0; --i) std::swap(batch[i], batch[rng.index(i + 1)]);
        CHECK(batch_loss(p, batch) == doctest::Approx(base).epsilon(1e-14));
    }
}

TEST_CASE("feature vector encoding") {
    SituationContext ctx;
    ctx.near_obstacle = true;
    ctx.dist_obstacle = 10.0;
    ctx.dist_target = 1000.0;
    auto f = make_features({{0.1, 0.2, 0.3, 0.4}}, ctx);
    CHECK(f[0] == 0.1);
    CHECK(f[3] == 0.4);
    CHECK(f[4] == 0.0);
    CHECK(f[5] == 1.0);
    CHECK(f[6] == 0.0);
    CHECK(f[7] == 0.0);
    CHECK(f[8] == doctest::Approx(10.0 / 50.0));
    CHECK(f[9] == 1.0);
    CHECK(feature_situation(f) == Situation::TF);
    for (double x : f) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
}

TEST_CASE("checkpoint round trip is bit exact") {
    Checkpoint c;
    c.params = init_params(kDefaultLayerDims, 99);
    Rng rng(99);
    for (auto &t : c.params.theta) t += rng.uniform(-1e-3, 1e-3) * 1e-7;
    c.trained_with = "maml";
    c.seed = 99;
    c.created_at = reproducible_timestamp();
    const auto path = (std::filesystem::temp_directory_path() / "mpl_ckpt_test.json").string();
    save_checkpoint(c, path);
    auto back = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(back.params == c.params);
    CHECK(back.trained_with == "maml");
    CHECK(back.seed == 99);
    CHECK(back.created_at == c.created_at);

    auto j = checkpoint_to_json(c);
    CHECK(j["schema_version"] == kCheckpointSchemaVersion);
    j["trained_with"] = "magic";
    CHECK_THROWS_AS(checkpoint_from_json(j), Error);
    j = checkpoint_to_json(c);
    j["theta"].erase(0);
    CHECK_THROWS_AS(checkpoint_from_json(j), Error);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), Error);
}

TEST_CASE("reproducible timestamp follows SOURCE_DATE_EPOCH") {
    const char *old = std::getenv("SOURCE_DATE_EPOCH");
    std::string saved = old ? old : "";
    setenv("SOURCE_DATE_EPOCH", "86400", 1);
    CHECK(reproducible_timestamp() == "1970-01-02T00:00:00Z");
    unsetenv("SOURCE_DATE_EPOCH");
    CHECK(reproducible_timestamp() == "1970-01-01T00:00:00Z");
    if (old) setenv("SOURCE_DATE_EPOCH", saved.c_str(), 1);
}
