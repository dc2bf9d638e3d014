#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "world.hpp"

namespace mpl {

/// Spring constants and cutoffs of the preference-modulated flocking model.
struct FlockParams {
    double gain_flock = 1.0;
    double gain_rep = 0.6;
    double gain_att = 0.15;
    double gain_saf = 1.2;
    double gain_hei = 0.8;
    double gain_ali = 0.3;
    double attraction_radius_factor = 1.5;
    double dt = 0.1;           // s
    double v_max_hard = 10.0;  // m/s

    void validate() const;
};

FlockParams flock_params_from_json(const nlohmann::json &j);
nlohmann::json flock_params_to_json(const FlockParams &p);

struct VelocityTerms {
    Vec3 flock;
    Vec3 rep;
    Vec3 att;
    Vec3 saf;
    Vec3 hei;
    Vec3 ali;

    Vec3 sum() const { return flock + rep + att + saf + hei + ali; }
};

/// Six velocity terms for robot i. `pref` holds the physical set-points
/// (inner distance, height, speed, safety distance). The flock term points
/// from the flock centroid to the waypoint.
VelocityTerms compute_velocity_terms(std::size_t i, std::span<const RobotState> robots, const Vec3 &waypoint,
                                     const MotionStatus &pref, const Arena &arena, const FlockParams &params);

/// Caps |v| at h_speed; vectors already below the cap are returned unchanged.
Vec3 apply_speed_limit(const Vec3 &v, double h_speed);

/// Outward unit normal of an obstacle at p; for points on or inside the box the
/// axis of least penetration is used (lowest axis wins ties).
Vec3 outward_normal(const Obstacle &obstacle, const Vec3 &p);

/// One explicit-Euler step of the whole flock under the normalized preference.
std::vector<RobotState> step(std::span<const RobotState> robots, const Vec3 &waypoint, const PreferenceVector &pref,
                             const Arena &arena, const FlockParams &params);

}  // namespace mpl
