#include <doctest.h>

#include "lmnav/geometry.hpp"

using namespace lmnav;
using namespace lmnav::world;

namespace {
KinematicsConfig quiet() {
    KinematicsConfig k;
    k.noiseXY = 0.0;
    k.noiseTheta = 0.0;
    return k;
}
}  // namespace

TEST_CASE("normalize_angle wraps into (-pi, pi]") {
    CHECK(normalize_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
    CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));  // boundary convention
    CHECK(normalize_angle(0.0) == 0.0);
    CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(5.0 * kTwoPi + 0.25) == doctest::Approx(0.25));
    CHECK_THROWS_AS(normalize_angle(std::numeric_limits<double>::quiet_NaN()), Error);
    CHECK_THROWS_AS(normalize_angle(std::numeric_limits<double>::infinity()), Error);
}

TEST_CASE("normalize_angle is idempotent") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        double t = rng.uniform(-50.0, 50.0);
        double once = normalize_angle(t);
        CHECK(normalize_angle(once) == once);
        CHECK(once > -kPi);
        CHECK(once <= kPi);
    }
}

TEST_CASE("pose error rotates the world delta into the body frame") {
    PoseError e = pose_error_in_robot_frame({0, 0, kPi / 2.0}, {1, 0, 0});
    CHECK(e.dx == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(e.dy == doctest::Approx(-1.0));
    CHECK(e.dtheta == doctest::Approx(-kPi / 2.0));

    PoseError same = pose_error_in_robot_frame({2, -1, 0.7}, {2, -1, 0.7});
    CHECK(same.dx == 0.0);
    CHECK(same.dy == 0.0);
    CHECK(same.dtheta == 0.0);

    PoseError ax = pose_error_in_robot_frame({2, 3, 0}, {2.5, 3, 0});
    CHECK(ax.dx == doctest::Approx(0.5));
    CHECK(ax.dy == doctest::Approx(0.0));
    CHECK(ax.dtheta == 0.0);
}

TEST_CASE("pose error is invariant under a shared rigid transform") {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        Pose2D robot{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-kPi, kPi)};
        Pose2D goal{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-kPi, kPi)};
        double tx = rng.uniform(-2, 2), ty = rng.uniform(-2, 2), rot = rng.uniform(-kPi, kPi);
        auto moved = [&](const Pose2D& p) {
            Pose2D q;
            q.x = tx + std::cos(rot) * p.x - std::sin(rot) * p.y;
            q.y = ty + std::sin(rot) * p.x + std::cos(rot) * p.y;
            q.theta = normalize_angle(p.theta + rot);
            return q;
        };
        PoseError a = pose_error_in_robot_frame(robot, goal);
        PoseError b = pose_error_in_robot_frame(moved(robot), moved(goal));
        CHECK(std::abs(a.dx - b.dx) < 1e-9);
        CHECK(std::abs(a.dy - b.dy) < 1e-9);
        CHECK(std::abs(normalize_angle(a.dtheta - b.dtheta)) < 1e-9);
    }
}

TEST_CASE("apply_action steps in the body frame") {
    Rng rng(3);
    Pose2D p1 = apply_action({0, 0, 0}, {1, 0, 0}, quiet(), rng);
    CHECK(p1.x == doctest::Approx(0.05));
    CHECK(p1.y == doctest::Approx(0.0));
    CHECK(p1.theta == 0.0);

    Pose2D p2 = apply_action({0, 0, kPi / 2.0}, {1, 0, 0}, quiet(), rng);
    CHECK(p2.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p2.y == doctest::Approx(0.05));

    Pose2D base{1.25, -0.5, 0.3};
    Pose2D p3 = apply_action(base, {0, 0, 0}, quiet(), rng);
    CHECK(p3.x == base.x);
    CHECK(p3.y == base.y);
    CHECK(p3.theta == base.theta);
}

TEST_CASE("zero-noise actions invert per axis") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        Pose2D p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-kPi, kPi)};
        for (ActionTriple fwd : {ActionTriple{1, 0, 0}, ActionTriple{0, 1, 0}, ActionTriple{0, 0, 1}}) {
            ActionTriple back{-fwd.ax, -fwd.ay, -fwd.atheta};
            Pose2D q = apply_action(apply_action(p, fwd, quiet(), rng), back, quiet(), rng);
            CHECK(std::abs(q.x - p.x) < 1e-12);
            CHECK(std::abs(q.y - p.y) < 1e-12);
            CHECK(std::abs(normalize_angle(q.theta - p.theta)) < 1e-12);
        }
    }
}

TEST_CASE("actuation noise is consumed only when enabled") {
    // Disabling noise must not advance the RNG, so downstream draws line up.
    Rng a(5), b(5);
    apply_action({0, 0, 0}, {1, 1, 1}, quiet(), a);
    CHECK(a.next_u64() == b.next_u64());

    KinematicsConfig noisy;
    noisy.noiseXY = 0.01;
    noisy.noiseTheta = 0.001;
    Rng c(6), d(6);
    Pose2D pc = apply_action({0, 0, 0}, {1, 0, 0}, noisy, c);
    Pose2D pd = apply_action({0, 0, 0}, {1, 0, 0}, noisy, d);
    CHECK(pc.x == pd.x);  // same stream, same noise
    CHECK(pc.x != doctest::Approx(0.05).epsilon(1e-12));  // overwhelmingly likely
}
