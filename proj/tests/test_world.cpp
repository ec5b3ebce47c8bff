#include <doctest.h>

#include <set>
#include <tuple>

#include "lmnav/world.hpp"

using namespace lmnav;
using namespace lmnav::world;

namespace {

ObjectInstance hexagon() {
    ObjectInstance o;
    o.instanceId = "hex";
    o.categoryId = "chair";
    const double radii[6] = {0.25, 0.22, 0.20, 0.24, 0.21, 0.23};
    for (int i = 0; i < 6; ++i) {
        double a = deg2rad(60.0 * i);
        o.footprint.push_back({radii[i] * std::cos(a), radii[i] * std::sin(a)});
    }
    o.validate();
    return o;
}

}  // namespace

TEST_CASE("polygon area, centroid and convexity on a unit square") {
    std::vector<Vec2> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    CHECK(polygon_area(sq) == doctest::Approx(1.0));
    Vec2 c = polygon_centroid(sq);
    CHECK(c.x == doctest::Approx(0.5));
    CHECK(c.y == doctest::Approx(0.5));
    CHECK(polygon_is_convex(sq));

    std::vector<Vec2> bowtie = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    CHECK_FALSE(polygon_is_convex(bowtie));
}

TEST_CASE("object validation enforces shape sanity and fixes winding") {
    ObjectInstance o = hexagon();
    CHECK(polygon_area(o.footprint) > 0.0);  // CCW after validate

    ObjectInstance cw = hexagon();
    std::reverse(cw.footprint.begin(), cw.footprint.end());
    cw.validate();
    CHECK(polygon_area(cw.footprint) > 0.0);

    ObjectInstance bad;
    bad.instanceId = "bad";
    bad.footprint = {{0, 0}, {1, 0}};
    CHECK_THROWS_AS(bad.validate(), Error);

    ObjectInstance blend = hexagon();
    blend.categoryBlend = 1.5;
    CHECK_THROWS_AS(blend.validate(), Error);
}

TEST_CASE("ray hits a convex polygon at the entry edge") {
    std::vector<Vec2> sq = {{1, -1}, {3, -1}, {3, 1}, {1, 1}};
    auto t = ray_convex_polygon({0, 0}, {1, 0}, sq);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(1.0));

    CHECK_FALSE(ray_convex_polygon({0, 0}, {-1, 0}, sq).has_value());
    CHECK_FALSE(ray_convex_polygon({0, 2}, {1, 0}, sq).has_value());

    // Starting inside reports distance zero.
    auto inside = ray_convex_polygon({2, 0}, {0, 1}, sq);
    REQUIRE(inside.has_value());
    CHECK(*inside == doctest::Approx(0.0));
}

TEST_CASE("training grid enumerates exactly 715 start poses") {
    auto poses = enumerate_start_poses(training_grid(), {0, 0, 0});
    CHECK(poses.size() == 715);
    // distance-major ordering: first block shares the smallest radius
    for (int i = 0; i < 143; ++i)
        CHECK(std::hypot(poses[i].x, poses[i].y) == doctest::Approx(0.3));
}

TEST_CASE("rollout grid enumerates exactly 49 start poses at 1 m") {
    Pose2D obj{2.0, 1.0, deg2rad(30.0)};
    auto poses = enumerate_start_poses(rollout_grid(), obj);
    CHECK(poses.size() == 49);
    for (const auto& p : poses)
        CHECK(std::hypot(p.x - obj.x, p.y - obj.y) == doctest::Approx(1.0));
}

TEST_CASE("single-entry grid lands on the requested offset") {
    StartPoseGrid g;
    g.radialDistances = {2.0};
    g.approachAnglesDeg = {90.0};
    g.startOrientationsDeg = {0.0};
    Pose2D obj{1.0, 1.0, 0.0};
    auto poses = enumerate_start_poses(g, obj);
    REQUIRE(poses.size() == 1);
    CHECK(poses[0].x == doctest::Approx(1.0));
    CHECK(poses[0].y == doctest::Approx(3.0));
    // zero start orientation faces the object
    CHECK(poses[0].theta == doctest::Approx(-kPi / 2.0));
}

TEST_CASE("approach angles rotate with the object frame by default") {
    StartPoseGrid g;
    g.radialDistances = {1.0};
    g.approachAnglesDeg = {0.0};
    g.startOrientationsDeg = {0.0};
    Pose2D obj{0.0, 0.0, kPi / 2.0};
    auto objectFrame = enumerate_start_poses(g, obj);
    CHECK(objectFrame[0].x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(objectFrame[0].y == doctest::Approx(1.0));

    g.worldFrameAngles = true;
    auto worldFrame = enumerate_start_poses(g, obj);
    CHECK(worldFrame[0].x == doctest::Approx(1.0));
    CHECK(worldFrame[0].y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("empty grid is rejected") {
    StartPoseGrid g;
    CHECK_THROWS_AS(enumerate_start_poses(g, {0, 0, 0}), Error);
}

TEST_CASE("start poses are distinct across the training grid") {
    auto poses = enumerate_start_poses(training_grid(), {0.5, -0.25, 0.4});
    std::set<std::tuple<long, long, long>> keys;
    for (const auto& p : poses)
        keys.insert({llround(p.x * 1e9), llround(p.y * 1e9), llround(p.theta * 1e9)});
    CHECK(keys.size() == poses.size());
}

TEST_CASE("goal pose faces the object from its standoff") {
    Pose2D obj{2.0, 1.0, deg2rad(30.0)};
    Pose2D goal = goal_pose_for(obj, 0.6, 0.0);
    CHECK(std::hypot(goal.x - obj.x, goal.y - obj.y) == doctest::Approx(0.6));
    // Heading points from the goal back to the object.
    double bearing = std::atan2(obj.y - goal.y, obj.x - goal.x);
    CHECK(std::abs(normalize_angle(goal.theta - bearing)) < 1e-12);
}
