#include "sim_world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "error.hpp"

namespace mpl {

namespace {

constexpr double kLookahead = 6.0;       // m, waypoint advance radius
constexpr double kGoalReached = 4.0;     // m
constexpr double kMinLegLength = 150.0;  // m, for random goals
constexpr int kMaxSampleAttempts = 1000;

std::optional<Vec2> vec2_opt(const nlohmann::json &j, const char *key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    const auto &v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::Parse, std::string(key) + " must be [x, y]");
    return Vec2{v[0].get<double>(), v[1].get<double>()};
}

double max_inflation(const Scenario &s) { return kBehaviorRanges[3].hi + s.robot_radius; }

}  // namespace

Scenario scenario_from_json(const nlohmann::json &j) {
    Scenario s;
    s.arena = arena_from_json(j);
    s.flock = flock_params_from_json(j.value("flock_params", nlohmann::json()));
    try {
        if (j.contains("situation_thresholds")) {
            const auto &t = j.at("situation_thresholds");
            s.thresholds.obstacle = t.value("obstacle", s.thresholds.obstacle);
            s.thresholds.target = t.value("target", s.thresholds.target);
        }
        s.robot_count = j.value("robot_count", s.robot_count);
        s.robot_radius = j.value("robot_radius", s.robot_radius);
        s.cell_size = j.value("cell_size", s.cell_size);
        s.initial_altitude = j.value("initial_altitude", s.initial_altitude);
        s.start = vec2_opt(j, "start");
        s.goal = vec2_opt(j, "goal");
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, std::string("scenario: ") + e.what());
    }
    if (s.robot_count < 2) throw Error(ErrorCode::InvalidArgument, "scenario needs at least two robots");
    if (!(s.thresholds.obstacle > 0.0) || !(s.thresholds.target > 0.0))
        throw Error(ErrorCode::InvalidArgument, "situation thresholds must be positive");
    if (!(s.cell_size > 0.0) || !(s.robot_radius >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "cell_size must be positive and robot_radius non-negative");
    return s;
}

Scenario load_scenario(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open scenario '" + path + "'");
    try {
        return scenario_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, "scenario '" + path + "': " + e.what());
    }
}

FlockWorld::FlockWorld(Scenario scenario, std::uint64_t seed)
    : scenario_(std::move(scenario)), rng_(derive_seed(seed, 0x776f726c64)) {
    scenario_.arena.validate();
    scenario_.flock.validate();
    rebuild_grid(max_inflation(scenario_));

    target_order_.resize(scenario_.arena.targets.size());
    std::iota(target_order_.begin(), target_order_.end(), std::size_t{0});
    for (std::size_t k = target_order_.size(); k > 1; --k) std::swap(target_order_[k - 1], target_order_[rng_.index(k)]);

    const Vec2 start = scenario_.start ? free_point_near(*scenario_.start)
                                       : random_free_point({-1e9, -1e9});
    const double n = static_cast<double>(scenario_.robot_count);
    for (int i = 0; i < scenario_.robot_count; ++i) {
        const double angle = 2.0 * M_PI * i / n;
        RobotState r;
        r.position = scenario_.arena.clamp({start.x + 3.0 * std::cos(angle) + rng_.uniform(-0.5, 0.5),
                                            start.y + 3.0 * std::sin(angle) + rng_.uniform(-0.5, 0.5),
                                            scenario_.initial_altitude + rng_.uniform(-0.5, 0.5)});
        robots_.push_back(r);
    }
    goal_ = scenario_.goal ? free_point_near(*scenario_.goal) : next_goal(start);
    replan();
}

SituationContext FlockWorld::situation() const {
    return classify_situation(centroid(robots_), scenario_.arena, scenario_.thresholds);
}

Vec3 FlockWorld::waypoint(const PreferenceVector &pref) const {
    const double height = denormalize(pref).height;
    if (path_.waypoints.empty()) {
        const Vec3 c = centroid(robots_);
        return {c.x, c.y, height};
    }
    const Vec2 &w = path_.waypoints[waypoint_index_];
    return {w.x, w.y, height};
}

void FlockWorld::advance(const PreferenceVector &pref) {
    const double inflation = denormalize(pref).safety + scenario_.robot_radius;
    if (std::abs(inflation - grid_inflation_) > scenario_.cell_size) {
        rebuild_grid(inflation);
        replan();
    }

    const Vec3 c = centroid(robots_);
    const Vec2 here{c.x, c.y};
    if (distance(here, goal_) < kGoalReached) {
        ++legs_completed_;
        goal_ = next_goal(here);
        replan();
    }
    while (!path_.waypoints.empty() && waypoint_index_ + 1 < path_.waypoints.size() &&
           distance(here, path_.waypoints[waypoint_index_]) < kLookahead)
        ++waypoint_index_;

    robots_ = step(robots_, waypoint(pref), pref, scenario_.arena, scenario_.flock);
}

void FlockWorld::rebuild_grid(double inflation) {
    grid_ = build_grid(scenario_.arena, inflation, scenario_.cell_size);
    grid_inflation_ = inflation;
}

Vec2 FlockWorld::free_point_near(const Vec2 &p) const {
    // Ring search outward from p's cell for the nearest free cell center.
    const auto [r0, c0] = grid_.cell_of(p);
    if (!grid_.blocked(r0, c0)) return p;
    const int max_ring = std::max(grid_.rows(), grid_.cols());
    for (int ring = 1; ring < max_ring; ++ring)
        for (int dr = -ring; dr <= ring; ++dr)
            for (int dc = -ring; dc <= ring; ++dc) {
                if (std::max(std::abs(dr), std::abs(dc)) != ring) continue;
                const int r = r0 + dr;
                const int c = c0 + dc;
                if (grid_.in_bounds(r, c) && !grid_.blocked(r, c)) return grid_.cell_center(r, c);
            }
    throw Error(ErrorCode::InvalidEndpoint, "arena has no free cell");
}

Vec2 FlockWorld::random_free_point(const Vec2 &away_from) {
    const double margin = std::min({10.0, scenario_.arena.width / 4.0, scenario_.arena.depth / 4.0});
    const double min_leg = std::min(kMinLegLength, 0.5 * std::min(scenario_.arena.width, scenario_.arena.depth));
    for (int attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
        const Vec2 p{rng_.uniform(margin, scenario_.arena.width - margin),
                     rng_.uniform(margin, scenario_.arena.depth - margin)};
        const auto [r, c] = grid_.cell_of(p);
        if (!grid_.blocked(r, c) && distance(p, away_from) >= min_leg) return p;
    }
    return free_point_near({rng_.uniform(0.0, scenario_.arena.width), rng_.uniform(0.0, scenario_.arena.depth)});
}

Vec2 FlockWorld::next_goal(const Vec2 &from) {
    while (next_target_ < target_order_.size()) {
        const Vec2 p = scenario_.arena.targets[target_order_[next_target_++]].center;
        const auto [r, c] = grid_.cell_of(p);
        if (!grid_.blocked(r, c) && distance(p, from) >= kGoalReached) return p;
    }
    return random_free_point(from);
}

void FlockWorld::replan() {
    const Vec3 c = centroid(robots_);
    const Vec2 start = free_point_near({c.x, c.y});
    for (int attempt = 0; attempt < 8; ++attempt) {
        try {
            if (grid_.blocked(grid_.cell_of(goal_).first, grid_.cell_of(goal_).second)) goal_ = free_point_near(goal_);
            path_ = plan(grid_, start, goal_);
            waypoint_index_ = 0;
            return;
        } catch (const Error &e) {
            if (e.code() != ErrorCode::Unreachable) throw;
            goal_ = random_free_point(start);
        }
    }
    // Enclosed start: hover in place until the inflation shrinks.
    path_ = Path{};
    waypoint_index_ = 0;
}

}  // namespace mpl
