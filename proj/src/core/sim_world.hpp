#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flocking.hpp"
#include "planner.hpp"
#include "rng.hpp"
#include "world.hpp"

namespace mpl {

/// Everything a simulated deployment needs besides the model and the user.
struct Scenario {
    Arena arena;
    FlockParams flock;
    SituationThresholds thresholds;
    int robot_count = 5;
    double robot_radius = 0.5;  // m
    double cell_size = 2.0;     // m
    double initial_altitude = 10.0;
    std::optional<Vec2> start;
    std::optional<Vec2> goal;
};

Scenario scenario_from_json(const nlohmann::json &j);
Scenario load_scenario(const std::string &path);

/// A flock flying A* legs between goals (target zones first, then random
/// free points), replanning when the preferred safety distance moves the
/// grid inflation by more than one cell.
class FlockWorld {
public:
    FlockWorld(Scenario scenario, std::uint64_t seed);

    const Scenario &scenario() const { return scenario_; }
    const std::vector<RobotState> &robots() const { return robots_; }
    const Path &path() const { return path_; }
    Vec2 goal() const { return goal_; }
    std::size_t legs_completed() const { return legs_completed_; }

    SituationContext situation() const;
    MotionStatus motion_status() const { return measure_motion_status(robots_, scenario_.arena); }
    /// Normalized measured behavior R.
    PreferenceVector measured() const { return normalize(motion_status()); }

    /// Waypoint the flock steers to under the given preference.
    Vec3 waypoint(const PreferenceVector &pref) const;

    /// One control step under the normalized preference.
    void advance(const PreferenceVector &pref);

private:
    void rebuild_grid(double inflation);
    Vec2 free_point_near(const Vec2 &p) const;
    Vec2 random_free_point(const Vec2 &away_from);
    Vec2 next_goal(const Vec2 &from);
    void replan();

    Scenario scenario_;
    Rng rng_;
    GridMap grid_;
    double grid_inflation_ = 0.0;
    std::vector<RobotState> robots_;
    Path path_;
    std::size_t waypoint_index_ = 0;
    Vec2 goal_;
    std::vector<std::size_t> target_order_;
    std::size_t next_target_ = 0;
    std::size_t legs_completed_ = 0;
};

}  // namespace mpl
