#include "flocking.hpp"

#include <algorithm>

#include "error.hpp"

namespace mpl {

void FlockParams::validate() const {
    for (double g : {gain_flock, gain_rep, gain_att, gain_saf, gain_hei, gain_ali})
        if (!(g >= 0.0)) throw Error(ErrorCode::InvalidArgument, "flock gains must be non-negative");
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "flock dt must be positive");
    if (!(attraction_radius_factor > 1.0))
        throw Error(ErrorCode::InvalidArgument, "attraction_radius_factor must exceed 1");
    if (!(v_max_hard > 0.0)) throw Error(ErrorCode::InvalidArgument, "v_max_hard must be positive");
}

FlockParams flock_params_from_json(const nlohmann::json &j) {
    FlockParams p;
    if (j.is_null()) return p;
    try {
        p.gain_flock = j.value("gain_flock", p.gain_flock);
        p.gain_rep = j.value("gain_rep", p.gain_rep);
        p.gain_att = j.value("gain_att", p.gain_att);
        p.gain_saf = j.value("gain_saf", p.gain_saf);
        p.gain_hei = j.value("gain_hei", p.gain_hei);
        p.gain_ali = j.value("gain_ali", p.gain_ali);
        p.attraction_radius_factor = j.value("attraction_radius_factor", p.attraction_radius_factor);
        p.dt = j.value("dt", p.dt);
        p.v_max_hard = j.value("v_max_hard", p.v_max_hard);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, std::string("flock_params: ") + e.what());
    }
    p.validate();
    return p;
}

nlohmann::json flock_params_to_json(const FlockParams &p) {
    return {{"gain_flock", p.gain_flock}, {"gain_rep", p.gain_rep},
            {"gain_att", p.gain_att},     {"gain_saf", p.gain_saf},
            {"gain_hei", p.gain_hei},     {"gain_ali", p.gain_ali},
            {"attraction_radius_factor", p.attraction_radius_factor},
            {"dt", p.dt},                 {"v_max_hard", p.v_max_hard}};
}

Vec3 outward_normal(const Obstacle &obstacle, const Vec3 &p) {
    const Vec3 q = obstacle.closest_point(p);
    const Vec3 delta = p - q;
    const double d = norm(delta);
    if (d > 0.0) return delta * (1.0 / d);

    const std::array<double, 3> offset = {p.x - obstacle.center.x, p.y - obstacle.center.y,
                                          p.z - obstacle.center.z};
    const std::array<double, 3> half = {obstacle.half_extents.x, obstacle.half_extents.y, obstacle.half_extents.z};
    std::size_t axis = 0;
    double best = half[0] - std::abs(offset[0]);
    for (std::size_t a = 1; a < 3; ++a) {
        double depth = half[a] - std::abs(offset[a]);
        if (depth < best) {
            best = depth;
            axis = a;
        }
    }
    std::array<double, 3> n{};
    n[axis] = offset[axis] < 0.0 ? -1.0 : 1.0;
    return {n[0], n[1], n[2]};
}

VelocityTerms compute_velocity_terms(std::size_t i, std::span<const RobotState> robots, const Vec3 &waypoint,
                                     const MotionStatus &pref, const Arena &arena, const FlockParams &params) {
    if (i >= robots.size()) throw Error(ErrorCode::InvalidArgument, "robot index out of range");
    VelocityTerms t;
    const RobotState &me = robots[i];

    // Shared heading from the flock centroid, so robots travel in parallel
    // instead of converging on the waypoint itself.
    const Vec3 to_goal = waypoint - centroid(robots);
    const double goal_dist = norm(to_goal);
    if (goal_dist > 0.0) t.flock = to_goal * (params.gain_flock * pref.speed / goal_dist);

    const double r0 = pref.inner;
    const double r_att = params.attraction_radius_factor * r0;
    Vec3 mean_velocity;
    for (std::size_t j = 0; j < robots.size(); ++j) {
        if (j == i) continue;
        const Vec3 diff = me.position - robots[j].position;
        const double d = norm(diff);
        if (d < r0) {
            // Coincident robots: +x for the lower index, -x for the higher one,
            // which keeps the pair term antisymmetric.
            Vec3 dir = d > 0.0 ? diff * (1.0 / d) : Vec3{i < j ? 1.0 : -1.0, 0.0, 0.0};
            t.rep += dir * (params.gain_rep * (r0 - d));
        } else if (d > r_att) {
            t.att += diff * (-params.gain_att * (d - r_att) / d);
        }
        mean_velocity += robots[j].velocity;
    }
    if (robots.size() > 1) {
        mean_velocity *= 1.0 / static_cast<double>(robots.size() - 1);
        t.ali = (mean_velocity - me.velocity) * params.gain_ali;
    }

    double clearance = 0.0;
    int k = nearest_obstacle(me.position, arena, &clearance);
    if (k >= 0 && clearance < pref.safety) {
        t.saf = outward_normal(arena.obstacles[static_cast<std::size_t>(k)], me.position) *
                (params.gain_saf * (pref.safety - clearance));
    }

    t.hei = {0.0, 0.0, params.gain_hei * (pref.height - me.position.z)};
    return t;
}

Vec3 apply_speed_limit(const Vec3 &v, double h_speed) {
    const double n = norm(v);
    if (n > h_speed) return v * (h_speed / n);
    return v;
}

std::vector<RobotState> step(std::span<const RobotState> robots, const Vec3 &waypoint, const PreferenceVector &pref,
                             const Arena &arena, const FlockParams &params) {
    const MotionStatus physical = denormalize(pref);
    const double cap = std::min(physical.speed, params.v_max_hard);
    std::vector<RobotState> next(robots.begin(), robots.end());
    for (std::size_t i = 0; i < robots.size(); ++i) {
        const Vec3 v = apply_speed_limit(compute_velocity_terms(i, robots, waypoint, physical, arena, params).sum(), cap);
        next[i].velocity = v;
        next[i].position = arena.clamp(robots[i].position + v * params.dt);
    }
    return next;
}

}  // namespace mpl
