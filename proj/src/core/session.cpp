#include "session.hpp"

#include "error.hpp"

namespace mpl {

namespace {

nlohmann::json pref_json(const PreferenceVector &p) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t b = 0; b < kBehaviorCount; ++b) j[std::string(kBehaviorNames[b])] = p[b];
    return j;
}

nlohmann::json vec_json(const Vec3 &v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace

Instruction instruction_from_json(const nlohmann::json &j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidInstruction, "invalid instruction");
    Instruction ins;
    for (std::size_t b = 0; b < kBehaviorCount; ++b) {
        auto it = j.find(std::string(kBehaviorNames[b]));
        if (it == j.end() || !it->is_number()) throw Error(ErrorCode::InvalidInstruction, "invalid instruction");
        const double v = it->get<double>();
        if (v != -1.0 && v != 0.0 && v != 1.0) throw Error(ErrorCode::InvalidInstruction, "invalid instruction");
        ins[b] = static_cast<int>(v);
    }
    return ins;
}

Session::Session(std::string id, Checkpoint checkpoint, Scenario scenario, std::uint64_t seed,
                 const RuntimeConfig &cfg)
    : id_(std::move(id)), checkpoint_(std::move(checkpoint)), scenario_(std::move(scenario)), seed_(seed), cfg_(cfg) {
    checkpoint_.params.validate();
    reset();
}

void Session::reset() {
    world_ = std::make_unique<FlockWorld>(scenario_, seed_);
    adapter_ = std::make_unique<OnlineAdapter>(checkpoint_.params, cfg_);
    step_ = 0;
    instructions_.assign(1, Instruction{});
}

FeatureVector Session::features() const {
    return make_features(world_->measured(), world_->situation(), scenario_.thresholds);
}

nlohmann::json Session::envelope(const char *type) const {
    return {{"type", type}, {"schema_version", kWireSchemaVersion}, {"session_id", id_}};
}

nlohmann::json Session::hello_message() const {
    auto j = envelope("hello");
    j["algo"] = checkpoint_.trained_with;
    j["dt"] = scenario_.flock.dt;
    j["robot_count"] = scenario_.robot_count;
    return j;
}

nlohmann::json Session::arena_message() const {
    auto j = envelope("arena");
    const auto arena = arena_to_json(scenario_.arena);
    for (auto it = arena.begin(); it != arena.end(); ++it) j[it.key()] = it.value();
    return j;
}

nlohmann::json Session::frame() const {
    auto j = envelope("frame");
    j["step"] = step_;
    j["algo"] = checkpoint_.trained_with;
    nlohmann::json robots = nlohmann::json::array();
    for (const auto &r : world_->robots()) robots.push_back({{"p", vec_json(r.position)}, {"v", vec_json(r.velocity)}});
    j["robots"] = std::move(robots);
    j["H_hat"] = pref_json(h_hat());
    j["R"] = pref_json(world_->measured());
    j["situation"] = situation_name(world_->situation().situation());
    j["paused"] = paused_;
    j["phase_active"] = phase_active();
    j["metrics"] = {{"n_phases", phases().size()}, {"current_phase_len", current_phase_length()}};
    if (step_ == 0) j["arena"] = arena_to_json(scenario_.arena);
    return j;
}

std::vector<nlohmann::json> Session::opening_messages() const { return {hello_message(), arena_message(), frame()}; }

bool Session::tick() {
    if (paused_) return false;
    world_->advance(h_hat());
    ++step_;
    instructions_.emplace_back();
    return true;
}

bool Session::phase_active() const {
    const auto ps = phases();
    return !ps.empty() && step_ - ps.back().end_step <= cfg_.phase_gap;
}

int Session::current_phase_length() const {
    if (!phase_active()) return 0;
    return step_ - phases().back().start_step + 1;
}

nlohmann::json Session::apply_instruction(const Instruction &ins) {
    const FeatureVector f = features();
    const PreferenceVector before = adapter_->predict(f);
    const bool updated = adapter_->apply(f, before, ins);
    if (updated) instructions_.back() = ins;
    auto j = envelope("ack");
    j["step"] = step_;
    j["updated"] = updated;
    j["H_hat"] = pref_json(adapter_->predict(f));
    return j;
}

std::vector<nlohmann::json> Session::handle(const nlohmann::json &msg) {
    if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string())
        return {error_message("malformed message")};
    const std::string type = msg.at("type").get<std::string>();
    if (type == "instruction") {
        try {
            return {apply_instruction(instruction_from_json(msg.value("ins", nlohmann::json())))};
        } catch (const Error &e) {
            return {error_message(e.what())};
        }
    }
    if (type == "pause" || type == "resume") {
        paused_ = type == "pause";
        auto j = envelope("ack");
        j["command"] = type;
        j["step"] = step_;
        return {j};
    }
    if (type == "reset") {
        reset();
        auto j = envelope("ack");
        j["command"] = type;
        j["step"] = step_;
        return {j, arena_message(), frame()};
    }
    return {error_message("unknown message type '" + type + "'")};
}

std::vector<nlohmann::json> Session::handle_text(const std::string &text) {
    nlohmann::json msg;
    try {
        msg = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &) {
        return {error_message("malformed message")};
    }
    return handle(msg);
}

nlohmann::json Session::error_message(const std::string &message) const {
    auto j = envelope("error");
    j["message"] = message;
    return j;
}

nlohmann::json Session::shutdown_message() const { return envelope("server_shutdown"); }

}  // namespace mpl
