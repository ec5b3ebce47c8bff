#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lmnav/metrics.hpp"
#include "lmnav/rollout.hpp"

using namespace lmnav;
using namespace lmnav::rollout;
using world::ActionTriple;
using world::Pose2D;

namespace {

world::Scene tiny_scene() {
    world::Scene s;
    world::ObjectInstance o;
    o.instanceId = "obj";
    o.categoryId = "chair";
    o.footprint = {{0.2, -0.2}, {0.2, 0.2}, {-0.2, 0.2}, {-0.2, -0.2}};
    o.validate();
    s.target = {o, {2.0, 0.0, 0.0}};
    return s;
}

RolloutWorld quiet_world() {
    RolloutWorld w;
    w.scene = tiny_scene();
    w.kin.noiseXY = 0.0;
    w.kin.noiseTheta = 0.0;
    w.targetId = "obj";
    return w;
}

sensor::ObservationSet observe(const RolloutWorld& w, const Pose2D& pose, uint64_t seed = 99) {
    Rng rng(seed);
    return sensor::render_observation(w.scene, pose, w.sensorCfg, rng);
}

}  // namespace

TEST_CASE("termination names round-trip") {
    for (Termination t : {Termination::StopAction, Termination::AuxStop, Termination::MaxSteps})
        CHECK(termination_from_name(termination_name(t)) == t);
    CHECK(std::string(termination_name(Termination::StopAction)) == "stop_action");
    CHECK_THROWS_AS(termination_from_name("finished"), Error);
}

TEST_CASE("rollout config validation") {
    RolloutConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    RolloutConfig bad = cfg;
    bad.maxSteps = 0;
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = cfg;
    bad.consecutiveStopsToTerminate = 0;
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = cfg;
    bad.auxStopEnabled = true;  // all-zero thresholds
    CHECK_THROWS_AS(bad.validate(), Error);

    bad.auxThresholds = {0.2, 0.1, 1.0};  // lo > hi
    CHECK_THROWS_AS(bad.validate(), Error);

    bad.auxThresholds = {0.1, 0.2, -1.0};
    CHECK_THROWS_AS(bad.validate(), Error);

    bad.auxThresholds = {0.1, 0.2, 1.5};
    CHECK_NOTHROW(bad.validate());
}

TEST_CASE("argmax prefers the stop level on ties") {
    std::array<double, 9> z{};
    CHECK(argmax_action(z) == ActionTriple{0, 0, 0});

    z = {2.0, 1.0, 0.0, 0.0, 1.0, 2.0, 1.0, 5.0, 1.0};
    CHECK(argmax_action(z) == ActionTriple{-1, 1, 0});

    // both movement levels beat stop and tie with each other: backward wins
    z = {3.0, 1.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(argmax_action(z) == ActionTriple{-1, 0, 0});

    // movement exactly ties stop: stop survives
    z = {1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0};
    CHECK(argmax_action(z) == ActionTriple{0, 0, 0});
}

TEST_CASE("one-hot logits pick out the chosen levels") {
    auto z = one_hot_logits({1, 0, -1});
    std::array<double, 9> want = {0, 0, 1, 0, 1, 0, 1, 0, 0};
    for (int i = 0; i < 9; ++i) CHECK(z[static_cast<size_t>(i)] == want[static_cast<size_t>(i)]);
    CHECK(argmax_action(one_hot_logits({-1, 1, 0})) == ActionTriple{-1, 1, 0});
}

TEST_CASE("constant stop policy terminates at the second step") {
    RolloutWorld w = quiet_world();
    Pose2D start{1.0, 0.2, 0.1};
    Pose2D goal{1.4, 0.0, 0.0};
    ConstantPolicy policy(ActionTriple{0, 0, 0});
    Rng rng(3);
    RolloutLog log = run_rollout(policy, w, start, observe(w, goal), RolloutConfig{}, rng);

    CHECK(log.termination == Termination::StopAction);
    CHECK(log.wallSteps == 2);
    REQUIRE(log.steps.size() == 2);
    for (const auto& s : log.steps) CHECK(s.action.is_stop());
    CHECK(log.finalPose.x == start.x);
    CHECK(log.finalPose.y == start.y);
    CHECK(log.finalPose.theta == start.theta);
    CHECK(log.goalPose.x == goal.x);
    CHECK(log.steps[0].segStats.size() == 4);

    // zero noise: the logged final frame is what a fresh render at the final
    // pose segments to
    auto obs = observe(w, log.finalPose);
    Rng segRng(1);
    auto segs = sensor::segment(obs, "obj", w.segNoise, segRng);
    CHECK(log.finalFrontSeg.mask == segs[0].mask);

    Pose2D replayed = replay_final_pose(log, w.kin);
    CHECK(replayed.x == doctest::Approx(log.finalPose.x).epsilon(1e-12));
    CHECK(replayed.y == doctest::Approx(log.finalPose.y).epsilon(1e-12));
}

TEST_CASE("constant forward policy times out at the step cap") {
    RolloutWorld w = quiet_world();
    Pose2D start{1.0, 0.4, 0.0};  // drives past the object, not through its center
    ConstantPolicy policy(ActionTriple{1, 0, 0});
    Rng rng(4);
    RolloutLog log = run_rollout(policy, w, start, observe(w, {1.4, 0.0, 0.0}), RolloutConfig{}, rng);

    CHECK(log.termination == Termination::MaxSteps);
    CHECK(log.wallSteps == 200);
    CHECK(log.steps.size() == 200);
    CHECK(log.finalPose.x == doctest::Approx(start.x + 200 * 0.05));
    CHECK(log.finalPose.y == doctest::Approx(start.y));

    Pose2D replayed = replay_final_pose(log, w.kin);
    CHECK(replayed.x == doctest::Approx(log.finalPose.x).epsilon(1e-12));
    CHECK(replayed.y == doctest::Approx(log.finalPose.y).epsilon(1e-12));
    CHECK(replayed.theta == doctest::Approx(log.finalPose.theta).epsilon(1e-12));
}

TEST_CASE("expert oracle rollouts converge from all 49 grid starts") {
    RolloutWorld w = quiet_world();
    Pose2D objPose = w.scene.target.pose;
    Pose2D goal = world::goal_pose_for(objPose, 0.6, 0.0);
    auto starts = world::enumerate_start_poses(world::rollout_grid(), objPose);
    REQUIRE(starts.size() == 49);

    sensor::ObservationSet goalObs = observe(w, goal);
    expert::ExpertConfig expertCfg;
    std::vector<RolloutLog> logs;
    for (size_t i = 0; i < starts.size(); ++i) {
        ExpertOraclePolicy policy(goal, expertCfg);
        Rng rng(100 + i);
        RolloutLog log = run_rollout(policy, w, starts[i], goalObs, RolloutConfig{}, rng);
        log.startIndex = static_cast<int>(i);
        log.gridName = "rollout";

        CHECK(log.termination == Termination::StopAction);
        CHECK(log.wallSteps < 200);
        world::PoseError e = world::pose_error_in_robot_frame(log.finalPose, goal);
        CHECK(e.translation() <= 0.2);
        CHECK(std::abs(e.dtheta) <= deg2rad(6.0));

        Pose2D replayed = replay_final_pose(log, w.kin);
        CHECK(std::abs(replayed.x - log.finalPose.x) < 1e-9);
        CHECK(std::abs(replayed.y - log.finalPose.y) < 1e-9);
        CHECK(std::abs(replayed.theta - log.finalPose.theta) < 1e-9);
        logs.push_back(std::move(log));
    }

    // the oracle's tolerance band sits inside both alignment thresholds
    metrics::MetricReport report = metrics::aggregate(logs, 16.0);
    CHECK(report.total == 49);
    CHECK(report.edgeCount == 49);
    CHECK(report.edgeRate == doctest::Approx(1.0));
    CHECK(report.objectRate == doctest::Approx(1.0));

    std::string csv = metrics::report_csv(report);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 50);
    CHECK(metrics::report_svg(report).find("100.00%") != std::string::npos);
}

TEST_CASE("aux rule converts a single stop into termination") {
    RolloutWorld w = quiet_world();
    Pose2D goal = world::goal_pose_for(w.scene.target.pose, 0.6, 0.0);
    ConstantPolicy policy(ActionTriple{0, 0, 0});
    RolloutConfig cfg;  // the primary rule would need two stops in a row
    cfg.auxStopEnabled = true;
    cfg.auxThresholds = {0.0, 1.0, 100.0};
    Rng rng(5);
    RolloutLog log = run_rollout(policy, w, goal, observe(w, goal), cfg, rng);

    CHECK(log.termination == Termination::AuxStop);
    CHECK(log.wallSteps == 1);
    // the final action is preempted, so the robot holds the decision pose
    CHECK(log.finalPose.x == goal.x);
    CHECK(log.finalPose.y == goal.y);
    Pose2D replayed = replay_final_pose(log, w.kin);
    CHECK(replayed.x == goal.x);
    CHECK(replayed.y == goal.y);
}

TEST_CASE("aux rule ignores goal-like frames while the policy keeps driving") {
    RolloutWorld w = quiet_world();
    Pose2D goal = world::goal_pose_for(w.scene.target.pose, 0.6, 0.0);
    ConstantPolicy policy(ActionTriple{0, 1, 0});  // strafes forever, never stops
    RolloutConfig cfg;
    cfg.maxSteps = 4;
    cfg.auxStopEnabled = true;
    cfg.auxThresholds = {0.0, 1.0, 100.0};  // thresholds alone would fire instantly
    Rng rng(9);
    RolloutLog log = run_rollout(policy, w, goal, observe(w, goal), cfg, rng);
    CHECK(log.termination == Termination::MaxSteps);
    CHECK(log.wallSteps == 4);
}

TEST_CASE("stop rule outranks the aux rule in the same step") {
    RolloutWorld w = quiet_world();
    Pose2D goal = world::goal_pose_for(w.scene.target.pose, 0.6, 0.0);
    ConstantPolicy policy(ActionTriple{0, 0, 0});
    RolloutConfig cfg;
    cfg.consecutiveStopsToTerminate = 1;
    cfg.auxStopEnabled = true;
    cfg.auxThresholds = {0.0, 1.0, 100.0};
    Rng rng(6);
    RolloutLog log = run_rollout(policy, w, goal, observe(w, goal), cfg, rng);
    CHECK(log.termination == Termination::StopAction);
    CHECK(log.wallSteps == 1);
}

TEST_CASE("aux stop needs a visible goal mask") {
    RolloutWorld w = quiet_world();
    Pose2D awayFromObject{1.4, 0.0, kPi};  // object behind the robot
    ConstantPolicy policy(ActionTriple{0, 0, 0});
    RolloutConfig cfg;
    cfg.maxSteps = 5;
    cfg.consecutiveStopsToTerminate = 99;  // leave aux as the only stop rule in reach
    cfg.auxStopEnabled = true;
    cfg.auxThresholds = {0.0, 1.0, 100.0};
    Rng rng(7);
    RolloutLog log = run_rollout(policy, w, awayFromObject, observe(w, awayFromObject), cfg, rng);
    CHECK(log.goalFrontSeg.set_cells() == 0);
    CHECK(log.termination == Termination::MaxSteps);
    CHECK(log.wallSteps == 5);
}

TEST_CASE("aux stop never lengthens an episode") {
    RolloutWorld w = quiet_world();
    w.kin.noiseXY = 0.005;
    w.kin.noiseTheta = deg2rad(0.5);
    Pose2D goal = world::goal_pose_for(w.scene.target.pose, 0.6, 0.0);
    sensor::ObservationSet goalObs = observe(w, goal);
    auto starts = world::enumerate_start_poses(world::rollout_grid(), w.scene.target.pose);

    RolloutConfig noAux;
    RolloutConfig withAux = noAux;
    withAux.auxStopEnabled = true;
    double goalArea = goalObs.segs[0].bbox_area();
    withAux.auxThresholds = {0.5 * goalArea, std::min(1.0, 2.0 * goalArea), 2.0};

    for (uint64_t seed : {11ull, 12ull, 13ull}) {
        expert::ExpertConfig expertCfg;
        ExpertOraclePolicy p1(goal, expertCfg), p2(goal, expertCfg);
        Rng r1(seed), r2(seed);
        RolloutLog a = run_rollout(p1, w, starts[seed % 49], goalObs, noAux, r1);
        RolloutLog b = run_rollout(p2, w, starts[seed % 49], goalObs, withAux, r2);
        CHECK(b.wallSteps <= a.wallSteps);
        // identical prefix: the aux check draws nothing from the stream
        for (int i = 0; i < b.wallSteps; ++i) {
            CHECK(a.steps[static_cast<size_t>(i)].pose.x == b.steps[static_cast<size_t>(i)].pose.x);
            CHECK(a.steps[static_cast<size_t>(i)].pose.theta == b.steps[static_cast<size_t>(i)].pose.theta);
        }
    }
}

TEST_CASE("front view index must exist") {
    RolloutWorld w = quiet_world();
    ConstantPolicy policy(ActionTriple{0, 0, 0});
    RolloutConfig cfg;
    cfg.frontView = 7;
    Rng rng(8);
    CHECK_THROWS_AS(run_rollout(policy, w, {1.0, 0.0, 0.0}, observe(w, {1.4, 0.0, 0.0}), cfg, rng), Error);
}

TEST_CASE("observation feature width must match the decoder") {
    RolloutWorld w = quiet_world();
    sensor::ObservationSet obs = observe(w, {1.4, 0.0, 0.0});
    decoders::DecoderConfig cfg;
    cfg.featureDim = 16;  // rig renders 32
    CHECK_THROWS_AS(decoders::prepare_obs(obs, obs.segs, cfg), Error);
}

TEST_CASE("learned policy runs a short episode") {
    RolloutWorld w = quiet_world();
    Pose2D goal = world::goal_pose_for(w.scene.target.pose, 0.6, 0.0);
    sensor::ObservationSet goalObs = observe(w, goal);

    decoders::DecoderParams params;
    params.variant = decoders::Variant::Score;
    params.allocate();
    Rng init(5);
    params.init(init);
    LearnedPolicy policy(params, decoders::prepare_obs(goalObs, goalObs.segs, params.cfg));
    CHECK(policy.name() == "score");

    RolloutConfig cfg;
    cfg.maxSteps = 3;
    Rng rng(9);
    RolloutLog log = run_rollout(policy, w, {1.0, 0.0, 0.0}, goalObs, cfg, rng);
    CHECK(log.wallSteps >= 1);
    CHECK(log.wallSteps <= 3);
    for (const auto& s : log.steps)
        for (double z : s.logits) CHECK(std::isfinite(z));
}

TEST_CASE("aux threshold derivation") {
    AuxThresholds t = derive_aux_thresholds({0.10, 0.20}, {1.0, 3.0});
    CHECK(t.bboxAreaLo == doctest::Approx(0.105));
    CHECK(t.bboxAreaHi == doctest::Approx(0.195));
    CHECK(t.comRadius == doctest::Approx(2.9));

    // a degenerate distribution collapses the band
    t = derive_aux_thresholds({0.15, 0.15, 0.15}, {0.0, 0.0, 0.0});
    CHECK(t.bboxAreaLo == doctest::Approx(0.15));
    CHECK(t.bboxAreaHi == doctest::Approx(0.15));
    CHECK(t.comRadius == 0.0);

    CHECK_THROWS_AS(derive_aux_thresholds({}, {}), Error);
    CHECK_THROWS_AS(derive_aux_thresholds({0.1}, {1.0, 2.0}), Error);
}
