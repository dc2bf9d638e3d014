#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaptation.hpp"

namespace mpl {

inline constexpr const char *kWireSchemaVersion = "1";

/// Parses {inner, height, speed, safety}; every component must be -1, 0 or 1.
Instruction instruction_from_json(const nlohmann::json &j);

/// One live steering session: a world, an evolving model and the phase
/// bookkeeping. Not thread-safe; the owner serializes all calls.
class Session {
public:
    Session(std::string id, Checkpoint checkpoint, Scenario scenario, std::uint64_t seed,
            const RuntimeConfig &cfg = {});

    const std::string &id() const { return id_; }
    int step() const { return step_; }
    bool paused() const { return paused_; }
    const ModelParams &params() const { return adapter_->params(); }
    const FlockWorld &world() const { return *world_; }

    FeatureVector features() const;
    PreferenceVector h_hat() const { return adapter_->predict(features()); }

    /// Messages sent when a client attaches or after a reset.
    std::vector<nlohmann::json> opening_messages() const;
    nlohmann::json hello_message() const;
    nlohmann::json arena_message() const;
    nlohmann::json frame() const;

    /// Advances one step unless paused. Returns true if the world moved.
    bool tick();

    /// Handles one client message; replies are returned in order.
    std::vector<nlohmann::json> handle(const nlohmann::json &msg);
    std::vector<nlohmann::json> handle_text(const std::string &text);

    nlohmann::json apply_instruction(const Instruction &ins);
    void reset();

    std::vector<InterventionPhase> phases() const { return detect_phases(instructions_, cfg_.phase_gap); }
    bool phase_active() const;
    int current_phase_length() const;

    nlohmann::json error_message(const std::string &message) const;
    nlohmann::json shutdown_message() const;

private:
    nlohmann::json envelope(const char *type) const;

    std::string id_;
    Checkpoint checkpoint_;
    Scenario scenario_;
    std::uint64_t seed_;
    RuntimeConfig cfg_;
    std::unique_ptr<FlockWorld> world_;
    std::unique_ptr<OnlineAdapter> adapter_;
    int step_ = 0;
    bool paused_ = false;
    // One entry per step; the last nonzero instruction received during it.
    std::vector<Instruction> instructions_;
};

}  // namespace mpl
