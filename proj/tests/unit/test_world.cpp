#include <doctest.h>

#include <cmath>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "world.hpp"

using namespace mpl;

namespace {

// Distance to an axis-aligned box written out per axis.
double box_distance(const Obstacle &o, const Vec3 &p) {
    const double dx = std::max(std::abs(p.x - o.center.x) - o.half_extents.x, 0.0);
    const double dy = std::max(std::abs(p.y - o.center.y) - o.half_extents.y, 0.0);
    const double dz = std::max(std::abs(p.z - o.center.z) - o.half_extents.z, 0.0);
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Arena open_arena() {
    Arena a;
    a.width = 400;
    a.depth = 400;
    a.max_altitude = 40;
    return a;
}

}  // namespace

TEST_CASE("classify_situation far from everything is FF") {
    Arena a = open_arena();
    a.obstacles.push_back({{300, 300, 10}, {10, 10, 10}});
    a.targets.push_back({{300, 50}, 5});
    const auto ctx = classify_situation({100, 100, 10}, a);
    CHECK_FALSE(ctx.near_obstacle);
    CHECK_FALSE(ctx.near_target);
    CHECK(ctx.situation() == Situation::FF);
    CHECK(situation_name(ctx.situation()) == "FF");
}

TEST_CASE("classify_situation on a target center is FT") {
    Arena a = open_arena();
    a.obstacles.push_back({{300, 300, 10}, {10, 10, 10}});
    a.targets.push_back({{100, 100}, 5});
    const auto ctx = classify_situation({100, 100, 12}, a);
    CHECK(ctx.dist_target == 0.0);
    CHECK(ctx.situation() == Situation::FT);
}

TEST_CASE("classify_situation measures obstacle surface distance") {
    Arena a = open_arena();
    a.obstacles.push_back({{100, 100, 10}, {5, 5, 10}});
    // 10 m east of the east face.
    const auto ctx = classify_situation({115, 100, 10}, a, {25, 25});
    CHECK(ctx.dist_obstacle == doctest::Approx(10.0));
    CHECK(ctx.near_obstacle);
    CHECK(ctx.situation() == Situation::TF);

    const auto tight = classify_situation({115, 100, 10}, a, {9.5, 25});
    CHECK_FALSE(tight.near_obstacle);
}

TEST_CASE("classify_situation with empty arena") {
    const auto ctx = classify_situation({10, 10, 10}, open_arena());
    CHECK(std::isinf(ctx.dist_obstacle));
    CHECK(std::isinf(ctx.dist_target));
    CHECK(ctx.situation() == Situation::FF);
}

TEST_CASE("situation encoding covers all four combinations") {
    CHECK(make_situation(false, false) == Situation::FF);
    CHECK(make_situation(true, false) == Situation::TF);
    CHECK(make_situation(false, true) == Situation::FT);
    CHECK(make_situation(true, true) == Situation::TT);
    for (auto s : kSituations) CHECK(situation_from_name(situation_name(s)) == s);
    CHECK_THROWS_AS(situation_from_name("XX"), Error);
}

TEST_CASE("normalize maps range ends and midpoints") {
    auto lo = normalize({2, 0, 3, 0});
    auto hi = normalize({5, 30, 8, 3});
    auto mid = normalize({3.5, 15, 5.5, 1.5});
    for (std::size_t b = 0; b < kBehaviorCount; ++b) {
        CHECK(lo[b] == 0.0);
        CHECK(hi[b] == 1.0);
        CHECK(mid[b] == doctest::Approx(0.5));
    }
}

TEST_CASE("normalize clamps out-of-range measurements") {
    auto p = normalize({0.5, 45, 12, 100});
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 1.0);
    CHECK(p[2] == 1.0);
    CHECK(p[3] == 1.0);
}

TEST_CASE("denormalize inverts normalize") {
    auto lo = denormalize({{0, 0, 0, 0}});
    CHECK(lo.inner == 2.0);
    CHECK(lo.height == 0.0);
    CHECK(lo.speed == 3.0);
    CHECK(lo.safety == 0.0);
    auto hi = denormalize({{1, 1, 1, 1}});
    CHECK(hi.inner == 5.0);
    CHECK(hi.height == 30.0);
    CHECK(hi.speed == 8.0);
    CHECK(hi.safety == 3.0);

    Rng rng(11);
    for (int k = 0; k < 1000; ++k) {
        MotionStatus s{rng.uniform(2, 5), rng.uniform(0, 30), rng.uniform(3, 8), rng.uniform(0, 3)};
        auto back = denormalize(normalize(s));
        CHECK(std::abs(back.inner - s.inner) <= 1e-9);
        CHECK(std::abs(back.height - s.height) <= 1e-9);
        CHECK(std::abs(back.speed - s.speed) <= 1e-9);
        CHECK(std::abs(back.safety - s.safety) <= 1e-9);
    }
}

TEST_CASE("normalize is monotone per component") {
    Rng rng(12);
    for (int k = 0; k < 1000; ++k) {
        MotionStatus a{rng.uniform(0, 7), rng.uniform(0, 40), rng.uniform(0, 10), rng.uniform(0, 5)};
        MotionStatus b = a;
        b.inner += rng.uniform(0, 1);
        b.height += rng.uniform(0, 1);
        b.speed += rng.uniform(0, 1);
        b.safety += rng.uniform(0, 1);
        auto na = normalize(a);
        auto nb = normalize(b);
        for (std::size_t i = 0; i < kBehaviorCount; ++i) CHECK(na[i] <= nb[i]);
    }
}

TEST_CASE("measure_motion_status two robots without obstacles") {
    std::vector<RobotState> robots = {{{0, 0, 10}, {4, 0, 0}}, {{3, 0, 10}, {4, 0, 0}}};
    auto s = measure_motion_status(robots, open_arena());
    CHECK(s.inner == doctest::Approx(3.0));
    CHECK(s.height == doctest::Approx(10.0));
    CHECK(s.speed == doctest::Approx(4.0));
    CHECK(s.safety == 3.0);
}

TEST_CASE("measure_motion_status identical altitudes and speeds") {
    std::vector<RobotState> robots;
    for (int i = 0; i < 5; ++i) robots.push_back({{10.0 * i, 5, 20}, {0, 5, 0}});
    auto s = measure_motion_status(robots, open_arena());
    CHECK(s.height == doctest::Approx(20.0));
    CHECK(s.speed == doctest::Approx(5.0));
}

TEST_CASE("measure_motion_status rejects a single robot") {
    std::vector<RobotState> one = {{{0, 0, 10}, {}}};
    try {
        measure_motion_status(one, open_arena());
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::InsufficientFlock);
        CHECK(std::string(e.what()) == "insufficient flock");
    }
}

TEST_CASE("measure_motion_status matches brute-force oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        Arena a = open_arena();
        a.width = a.depth = 100;
        Obstacle box{{rng.uniform(20, 80), rng.uniform(20, 80), rng.uniform(5, 15)},
                     {rng.uniform(1, 10), rng.uniform(1, 10), rng.uniform(1, 5)}};
        a.obstacles.push_back(box);
        std::vector<RobotState> robots(3);
        for (auto &r : robots) {
            r.position = {rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(0, 30)};
            r.velocity = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        }
        double inner = 1e300, height = 0, speed = 0, safety = 1e300;
        for (std::size_t i = 0; i < robots.size(); ++i) {
            for (std::size_t j = 0; j < robots.size(); ++j) {
                if (i == j) continue;
                const Vec3 d = robots[i].position - robots[j].position;
                inner = std::min(inner, std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z));
            }
            height += robots[i].position.z / 3.0;
            const Vec3 &v = robots[i].velocity;
            speed += std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z) / 3.0;
            safety = std::min(safety, box_distance(box, robots[i].position));
        }
        auto s = measure_motion_status(robots, a);
        CHECK(s.inner == doctest::Approx(inner).epsilon(1e-12));
        CHECK(s.height == doctest::Approx(height).epsilon(1e-12));
        CHECK(s.speed == doctest::Approx(speed).epsilon(1e-12));
        CHECK(s.safety == doctest::Approx(safety).epsilon(1e-12));
    }
}

TEST_CASE("obstacle distances") {
    Obstacle o{{10, 10, 5}, {2, 3, 5}};
    CHECK(o.surface_distance({10, 10, 5}) == 0.0);
    CHECK(o.surface_distance({15, 10, 5}) == doctest::Approx(3.0));
    CHECK(o.surface_distance({15, 17, 5}) == doctest::Approx(5.0));
    CHECK(o.footprint_distance({10, 20}) == doctest::Approx(7.0));
    CHECK(o.footprint_distance({11, 11}) == 0.0);
    Rng rng(5);
    for (int k = 0; k < 500; ++k) {
        Vec3 p{rng.uniform(-10, 30), rng.uniform(-10, 30), rng.uniform(-10, 30)};
        CHECK(o.surface_distance(p) == doctest::Approx(box_distance(o, p)));
    }
}

TEST_CASE("arena validation") {
    Arena a = open_arena();
    CHECK_NOTHROW(a.validate());
    a.obstacles.push_back({{399, 200, 5}, {5, 5, 5}});
    CHECK_THROWS_AS(a.validate(), Error);
    a = open_arena();
    a.targets.push_back({{50, 50}, 0});
    CHECK_THROWS_AS(a.validate(), Error);
    a = open_arena();
    a.width = 0;
    CHECK_THROWS_AS(a.validate(), Error);
}

TEST_CASE("arena clamp keeps points inside") {
    Arena a = open_arena();
    Vec3 p = a.clamp({-5, 500, 50});
    CHECK(p == Vec3{0, 400, 40});
}

TEST_CASE("arena JSON round trip") {
    Arena a = open_arena();
    a.obstacles.push_back({{100, 120, 10}, {8, 6, 10}});
    a.targets.push_back({{50, 60}, 7});
    Arena b = arena_from_json(arena_to_json(a));
    CHECK(b.width == a.width);
    CHECK(b.obstacles.size() == 1);
    CHECK(b.obstacles[0].center == a.obstacles[0].center);
    CHECK(b.obstacles[0].half_extents == a.obstacles[0].half_extents);
    CHECK(b.targets[0].center == a.targets[0].center);
    CHECK(b.targets[0].radius == 7);
    CHECK_THROWS_AS(arena_from_json(nlohmann::json{{"width", 10}}), Error);
}

TEST_CASE("centroid of robots") {
    std::vector<RobotState> robots = {{{0, 0, 0}, {}}, {{2, 4, 6}, {}}};
    CHECK(centroid(robots) == Vec3{1, 2, 3});
}
