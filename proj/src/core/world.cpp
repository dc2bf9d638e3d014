#include "world.hpp"

#include <algorithm>

#include "error.hpp"

namespace mpl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec3 vec3_from_json(const nlohmann::json &j, std::string_view what) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Parse, std::string(what) + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

Vec3 Obstacle::closest_point(const Vec3 &p) const {
    return {std::clamp(p.x, center.x - half_extents.x, center.x + half_extents.x),
            std::clamp(p.y, center.y - half_extents.y, center.y + half_extents.y),
            std::clamp(p.z, center.z - half_extents.z, center.z + half_extents.z)};
}

double Obstacle::surface_distance(const Vec3 &p) const { return distance(p, closest_point(p)); }

double Obstacle::footprint_distance(const Vec2 &p) const {
    double dx = std::max(std::abs(p.x - center.x) - half_extents.x, 0.0);
    double dy = std::max(std::abs(p.y - center.y) - half_extents.y, 0.0);
    return std::hypot(dx, dy);
}

void Arena::validate() const {
    if (!(width > 0.0) || !(depth > 0.0) || !(max_altitude > 0.0))
        throw Error(ErrorCode::InvalidArgument, "arena dimensions must be positive");
    for (const auto &o : obstacles) {
        if (!(o.half_extents.x > 0.0) || !(o.half_extents.y > 0.0) || !(o.half_extents.z > 0.0))
            throw Error(ErrorCode::InvalidArgument, "obstacle half extents must be positive");
        if (o.center.x - o.half_extents.x < 0.0 || o.center.x + o.half_extents.x > width ||
            o.center.y - o.half_extents.y < 0.0 || o.center.y + o.half_extents.y > depth)
            throw Error(ErrorCode::InvalidArgument, "obstacle footprint outside arena");
    }
    for (const auto &t : targets) {
        if (!(t.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "target radius must be positive");
        if (t.center.x - t.radius < 0.0 || t.center.x + t.radius > width || t.center.y - t.radius < 0.0 ||
            t.center.y + t.radius > depth)
            throw Error(ErrorCode::InvalidArgument, "target footprint outside arena");
    }
}

Vec3 Arena::clamp(const Vec3 &p) const {
    return {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, depth), std::clamp(p.z, 0.0, max_altitude)};
}

std::string_view situation_name(Situation s) {
    switch (s) {
        case Situation::FF: return "FF";
        case Situation::TF: return "TF";
        case Situation::FT: return "FT";
        case Situation::TT: return "TT";
    }
    return "FF";
}

Situation situation_from_name(std::string_view name) {
    for (auto s : kSituations)
        if (situation_name(s) == name) return s;
    throw Error(ErrorCode::Parse, "unknown situation '" + std::string(name) + "'");
}

int nearest_obstacle(const Vec3 &p, const Arena &arena, double *surface_distance) {
    int best = -1;
    double best_d = kInf;
    for (std::size_t k = 0; k < arena.obstacles.size(); ++k) {
        double d = arena.obstacles[k].surface_distance(p);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(k);
        }
    }
    if (surface_distance) *surface_distance = best_d;
    return best;
}

SituationContext classify_situation(const Vec3 &flock_centroid, const Arena &arena,
                                    const SituationThresholds &thresholds) {
    SituationContext ctx;
    nearest_obstacle(flock_centroid, arena, &ctx.dist_obstacle);
    for (const auto &t : arena.targets)
        ctx.dist_target = std::min(ctx.dist_target, distance(Vec2{flock_centroid.x, flock_centroid.y}, t.center));
    ctx.near_obstacle = ctx.dist_obstacle <= thresholds.obstacle;
    ctx.near_target = ctx.dist_target <= thresholds.target;
    return ctx;
}

PreferenceVector normalize(const MotionStatus &status) {
    const std::array<double, kBehaviorCount> raw = {status.inner, status.height, status.speed, status.safety};
    PreferenceVector out;
    for (std::size_t i = 0; i < kBehaviorCount; ++i) {
        const auto [lo, hi] = kBehaviorRanges[i];
        out[i] = (std::clamp(raw[i], lo, hi) - lo) / (hi - lo);
    }
    return out;
}

MotionStatus denormalize(const PreferenceVector &pref) {
    std::array<double, kBehaviorCount> raw{};
    for (std::size_t i = 0; i < kBehaviorCount; ++i) {
        const auto [lo, hi] = kBehaviorRanges[i];
        raw[i] = lo + pref[i] * (hi - lo);
    }
    return {raw[0], raw[1], raw[2], raw[3]};
}

Vec3 centroid(std::span<const RobotState> robots) {
    Vec3 c;
    if (robots.empty()) return c;
    for (const auto &r : robots) c += r.position;
    return c * (1.0 / static_cast<double>(robots.size()));
}

MotionStatus measure_motion_status(std::span<const RobotState> robots, const Arena &arena) {
    if (robots.size() < 2) throw Error(ErrorCode::InsufficientFlock, "insufficient flock");
    MotionStatus s;
    s.inner = kInf;
    s.safety = kInf;
    for (std::size_t i = 0; i < robots.size(); ++i) {
        for (std::size_t j = i + 1; j < robots.size(); ++j)
            s.inner = std::min(s.inner, distance(robots[i].position, robots[j].position));
        s.height += robots[i].position.z;
        s.speed += norm(robots[i].velocity);
        double d = kInf;
        nearest_obstacle(robots[i].position, arena, &d);
        s.safety = std::min(s.safety, d);
    }
    const double n = static_cast<double>(robots.size());
    s.height /= n;
    s.speed /= n;
    if (!std::isfinite(s.safety)) s.safety = kBehaviorRanges[3].hi;
    return s;
}

Arena arena_from_json(const nlohmann::json &j) {
    Arena a;
    try {
        a.width = j.at("width").get<double>();
        a.depth = j.at("depth").get<double>();
        a.max_altitude = j.at("max_altitude").get<double>();
        for (const auto &o : j.value("obstacles", nlohmann::json::array()))
            a.obstacles.push_back({vec3_from_json(o.at("center"), "obstacle center"),
                                   vec3_from_json(o.at("half_extents"), "obstacle half_extents")});
        for (const auto &t : j.value("targets", nlohmann::json::array())) {
            const auto &c = t.at("center");
            if (!c.is_array() || c.size() != 2) throw Error(ErrorCode::Parse, "target center must be a 2-element array");
            a.targets.push_back({{c[0].get<double>(), c[1].get<double>()}, t.at("radius").get<double>()});
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, std::string("arena: ") + e.what());
    }
    a.validate();
    return a;
}

nlohmann::json arena_to_json(const Arena &arena) {
    nlohmann::json obstacles = nlohmann::json::array();
    for (const auto &o : arena.obstacles)
        obstacles.push_back({{"center", {o.center.x, o.center.y, o.center.z}},
                             {"half_extents", {o.half_extents.x, o.half_extents.y, o.half_extents.z}}});
    nlohmann::json targets = nlohmann::json::array();
    for (const auto &t : arena.targets)
        targets.push_back({{"center", {t.center.x, t.center.y}}, {"radius", t.radius}});
    return {{"width", arena.width},
            {"depth", arena.depth},
            {"max_altitude", arena.max_altitude},
            {"obstacles", std::move(obstacles)},
            {"targets", std::move(targets)}};
}

}  // namespace mpl
