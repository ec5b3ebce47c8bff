#include "lmnav/expert.hpp"

#include <algorithm>

namespace lmnav::expert {

namespace {
int banded_sign(double v, double band) {
    if (v > band) return 1;
    if (v < -band) return -1;
    return 0;
}
}  // namespace

ActionTriple expert_action(const PoseError& error, double deadbandXY, double deadbandTheta) {
    if (!std::isfinite(error.dx) || !std::isfinite(error.dy) || !std::isfinite(error.dtheta))
        throw Error("expert_action: non-finite pose error");
    ActionTriple a;
    a.ax = banded_sign(error.dx, deadbandXY);
    a.ay = banded_sign(error.dy, deadbandXY);
    a.atheta = banded_sign(error.dtheta, deadbandTheta);
    return a;
}

TrajectoryRecord collect_trajectory(int trajectoryId, const Pose2D& start, const Pose2D& goal,
                                    const Scene& scene, const world::KinematicsConfig& kin,
                                    const sensor::SensorConfig& sensorCfg, const ExpertConfig& cfg,
                                    Rng& rng, ObsSink* sink) {
    TrajectoryRecord traj;
    traj.trajectoryId = trajectoryId;
    traj.startPose = start;
    traj.goalPose = goal;
    traj.instanceId = scene.target.instance.instanceId;

    Pose2D pose = start;
    for (int stepCount = 0;; ++stepCount) {
        int64_t obsIndex = -1;
        if (sink) obsIndex = (*sink)(sensor::render_observation(scene, pose, sensorCfg, rng));

        PoseError e = world::pose_error_in_robot_frame(pose, goal);
        if (cfg.within_tolerance(e)) {
            traj.steps.push_back({pose, ActionTriple{0, 0, 0}, obsIndex});
            return traj;
        }
        if (stepCount >= cfg.maxExpertSteps)
            throw ExpertDivergence("expert diverged: trajectory " + std::to_string(trajectoryId) +
                                   " exceeded " + std::to_string(cfg.maxExpertSteps) + " steps");

        ActionTriple a = expert_action(e, cfg.deadbandXY, cfg.deadbandTheta);
        traj.steps.push_back({pose, a, obsIndex});
        pose = world::apply_action(pose, a, kin, rng);
    }
}

Dataset build_dataset(const std::vector<TrajectoryRecord>& trajectories, int K, bool relabel,
                      const ExpertConfig& cfg, Rng& rng) {
    if (trajectories.empty()) throw Error("build_dataset: no trajectories");
    if (K < 1) throw Error("build_dataset: K must be >= 1");

    Dataset ds;
    for (const auto& traj : trajectories) {
        const int T = traj.length();
        for (int t = 1; t < T; ++t) {
            int future = T - t;  // candidates t+1..T
            int count = std::min(K, future);
            auto picks = rng.sample_indices(static_cast<size_t>(future), static_cast<size_t>(count));
            std::sort(picks.begin(), picks.end());
            for (size_t offset : picks) {
                Sample s;
                s.trajectoryId = traj.trajectoryId;
                s.t = t;
                s.tprime = t + 1 + static_cast<int>(offset);
                if (relabel) {
                    const Pose2D& now = traj.steps[static_cast<size_t>(t) - 1].pose;
                    const Pose2D& then = traj.steps[static_cast<size_t>(s.tprime) - 1].pose;
                    s.label = expert_action(world::pose_error_in_robot_frame(now, then),
                                            cfg.deadbandXY, cfg.deadbandTheta);
                } else {
                    s.label = traj.steps[static_cast<size_t>(t) - 1].action;
                }
                ds.samples.push_back(s);
            }
        }
    }
    return ds;
}

}  // namespace lmnav::expert
