#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mpl {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 &operator+=(const Vec3 &o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3 &operator-=(const Vec3 &o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3 &operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    friend Vec3 operator+(Vec3 a, const Vec3 &b) { return a += b; }
    friend Vec3 operator-(Vec3 a, const Vec3 &b) { return a -= b; }
    friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend Vec3 operator-(Vec3 a) { return a *= -1.0; }
    friend bool operator==(const Vec3 &, const Vec3 &) = default;
};

inline double dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3 &a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3 &a, const Vec3 &b) { return norm(a - b); }

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2 &, const Vec2 &) = default;
};

inline double distance(const Vec2 &a, const Vec2 &b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned box obstacle (a building in the disaster site).
struct Obstacle {
    Vec3 center;
    Vec3 half_extents;

    Vec3 closest_point(const Vec3 &p) const;
    /// Euclidean distance from p to the box surface; 0 when p is inside.
    double surface_distance(const Vec3 &p) const;
    /// Distance from a ground point to the box footprint.
    double footprint_distance(const Vec2 &p) const;
};

struct TargetZone {
    Vec2 center;
    double radius = 1.0;
};

struct Arena {
    double width = 400.0;
    double depth = 400.0;
    double max_altitude = 40.0;
    std::vector<Obstacle> obstacles;
    std::vector<TargetZone> targets;

    /// Throws Error(InvalidArgument) when an invariant is violated.
    void validate() const;
    Vec3 clamp(const Vec3 &p) const;
};

struct RobotState {
    Vec3 position;
    Vec3 velocity;
};

/// Measured flock statistics in physical units.
struct MotionStatus {
    double inner = 0.0;   // m, min pairwise distance
    double height = 0.0;  // m, mean altitude
    double speed = 0.0;   // m/s, mean speed magnitude
    double safety = 0.0;  // m, min clearance to obstacle surfaces
};

inline constexpr std::size_t kBehaviorCount = 4;
inline constexpr std::array<std::string_view, kBehaviorCount> kBehaviorNames = {"inner", "height", "speed", "safety"};

/// Normalized preference/behavior values, each in [0,1]. Component order is
/// inner, height, speed, safety everywhere in the code base.
struct PreferenceVector {
    std::array<double, kBehaviorCount> v{};

    double &operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
    double inner() const { return v[0]; }
    double height() const { return v[1]; }
    double speed() const { return v[2]; }
    double safety() const { return v[3]; }
    friend bool operator==(const PreferenceVector &, const PreferenceVector &) = default;
};

enum class Situation { FF = 0, TF = 1, FT = 2, TT = 3 };
inline constexpr std::size_t kSituationCount = 4;
inline constexpr std::array<Situation, kSituationCount> kSituations = {Situation::FF, Situation::TF, Situation::FT,
                                                                       Situation::TT};

std::string_view situation_name(Situation s);
Situation situation_from_name(std::string_view name);
inline Situation make_situation(bool near_obstacle, bool near_target) {
    return static_cast<Situation>((near_obstacle ? 1 : 0) + (near_target ? 2 : 0));
}

struct SituationContext {
    bool near_obstacle = false;
    bool near_target = false;
    double dist_obstacle = std::numeric_limits<double>::infinity();
    double dist_target = std::numeric_limits<double>::infinity();

    Situation situation() const { return make_situation(near_obstacle, near_target); }
};

struct SituationThresholds {
    double obstacle = 25.0;  // m
    double target = 25.0;    // m
};

/// Physical behavior ranges that map onto [0,1].
struct BehaviorRange {
    double lo;
    double hi;
};
inline constexpr std::array<BehaviorRange, kBehaviorCount> kBehaviorRanges = {{
    {2.0, 5.0},   // inner distance, m
    {0.0, 30.0},  // flying height, m
    {3.0, 8.0},   // flying speed, m/s
    {0.0, 3.0},   // safety distance, m
}};

SituationContext classify_situation(const Vec3 &flock_centroid, const Arena &arena,
                                    const SituationThresholds &thresholds = {});

PreferenceVector normalize(const MotionStatus &status);
MotionStatus denormalize(const PreferenceVector &pref);

/// Throws Error(InsufficientFlock) for fewer than two robots.
MotionStatus measure_motion_status(std::span<const RobotState> robots, const Arena &arena);

Vec3 centroid(std::span<const RobotState> robots);

/// Index of the obstacle whose surface is nearest to p, or -1 when none exist.
int nearest_obstacle(const Vec3 &p, const Arena &arena, double *surface_distance = nullptr);

Arena arena_from_json(const nlohmann::json &j);
nlohmann::json arena_to_json(const Arena &arena);

}  // namespace mpl
