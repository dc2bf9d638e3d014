#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "world.hpp"

namespace mpl {

enum class PreferenceType { Aggressive = 0, Medium = 1, Reserved = 2 };
inline constexpr std::size_t kPreferenceTypeCount = 3;

std::string_view preference_type_name(PreferenceType t);
PreferenceType preference_type_from_name(std::string_view name);

/// Ternary per-behavior correction in {-1, 0, +1}.
struct Instruction {
    std::array<int, kBehaviorCount> v{};

    int &operator[](std::size_t i) { return v[i]; }
    int operator[](std::size_t i) const { return v[i]; }
    bool is_zero() const { return v == std::array<int, kBehaviorCount>{}; }
    friend bool operator==(const Instruction &, const Instruction &) = default;
};

struct UserProfile {
    std::uint64_t id = 0;
    PreferenceType ptype = PreferenceType::Medium;
    std::array<PreferenceVector, kSituationCount> targets{};  // indexed by Situation

    const PreferenceVector &target(Situation s) const { return targets[static_cast<std::size_t>(s)]; }
};

struct Band {
    double lo = 0.0;
    double hi = 1.0;
};

/// Sampling bands per preference type, situation and behavior.
struct TypeBands {
    std::array<std::array<std::array<Band, kBehaviorCount>, kSituationCount>, kPreferenceTypeCount> bands{};

    const Band &at(PreferenceType t, Situation s, std::size_t behavior) const {
        return bands[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)][behavior];
    }
    Band &at(PreferenceType t, Situation s, std::size_t behavior) {
        return bands[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)][behavior];
    }
    void validate() const;
};

TypeBands default_type_bands();
nlohmann::json bands_to_json(const TypeBands &bands);
TypeBands bands_from_json(const nlohmann::json &j);
TypeBands load_bands(const std::string &path);

/// Types assigned round-robin by id. Each user draws one uniform quantile per
/// behavior and sits at that quantile of the band in every situation.
std::vector<UserProfile> generate_population(std::size_t n, const TypeBands &bands, std::uint64_t seed);

inline constexpr double kInstructionDeadBand = 0.1;

Instruction instruct(const PreferenceVector &target, const PreferenceVector &observed);
Instruction instruct(const UserProfile &user, const SituationContext &situation, const PreferenceVector &observed);
bool is_satisfied(const UserProfile &user, const SituationContext &situation, const PreferenceVector &observed);

nlohmann::ordered_json user_to_json(const UserProfile &user);
UserProfile user_from_json(const nlohmann::json &j);
void save_population(const std::vector<UserProfile> &users, const std::string &path);
std::vector<UserProfile> load_population(const std::string &path);

std::array<std::size_t, kPreferenceTypeCount> type_counts(const std::vector<UserProfile> &users);

}  // namespace mpl
