#pragma once

#include <functional>

#include "lmnav/sensor.hpp"

namespace lmnav::expert {

using world::ActionTriple;
using world::Pose2D;
using world::PoseError;
using world::Scene;

struct ExpertConfig {
    double deadbandXY = 0.14;              // per-axis, meters; conjunction implies the
                                           // 0.2 m Euclidean band (0.14 * sqrt(2) < 0.2)
    double deadbandTheta = deg2rad(6.0);
    double goalToleranceXY = 0.2;          // Euclidean termination tolerance, meters
    double goalToleranceTheta = deg2rad(6.0);
    int maxExpertSteps = 200;

    bool within_tolerance(const PoseError& e) const {
        return e.translation() <= goalToleranceXY && std::abs(e.dtheta) <= goalToleranceTheta;
    }
};

/// Deadbanded sign rule: move toward the goal on every axis whose error
/// exceeds its deadband.
ActionTriple expert_action(const PoseError& error, double deadbandXY, double deadbandTheta);

/// Raised when the expert fails to reach the goal within maxExpertSteps.
struct ExpertDivergence : Error {
    using Error::Error;
};

struct Step {
    Pose2D pose;
    ActionTriple action;
    int64_t obsIndex = -1;  // index into the observation store; -1 when not rendered
};

struct TrajectoryRecord {
    int trajectoryId = 0;
    Pose2D startPose;
    Pose2D goalPose;
    std::string instanceId;
    std::vector<Step> steps;  // last step is the (0,0,0) stop at the goal

    int length() const { return static_cast<int>(steps.size()); }
};

/// Receives each rendered observation and returns its store index.
using ObsSink = std::function<int64_t(const sensor::ObservationSet&)>;

/// Runs the expert from start to goal, recording a step per control cycle and
/// a final stop step once inside the tolerance band. Passing a sink turns on
/// observation rendering; without one the loop is pure pose arithmetic.
TrajectoryRecord collect_trajectory(int trajectoryId, const Pose2D& start, const Pose2D& goal,
                                    const Scene& scene, const world::KinematicsConfig& kin,
                                    const sensor::SensorConfig& sensorCfg, const ExpertConfig& cfg,
                                    Rng& rng, ObsSink* sink);

/// One training sample: observation at time t, pseudo-goal observation at a
/// strictly later t', and the action label. Timesteps are 1-based, so
/// t' ranges over {t+1, ..., T} for a trajectory of length T.
struct Sample {
    int trajectoryId = 0;
    int t = 0;
    int tprime = 0;
    ActionTriple label;
};

struct Dataset {
    std::vector<Sample> samples;
    uint64_t configHash = 0;
    uint64_t seed = 0;
};

/// Pseudo-goal augmentation: for every non-terminal timestep draw up to K
/// distinct future timesteps. With relabel on (the default), labels are
/// recomputed against the pseudo-goal pose; otherwise the recorded action is
/// kept.
Dataset build_dataset(const std::vector<TrajectoryRecord>& trajectories, int K, bool relabel,
                      const ExpertConfig& cfg, Rng& rng);

}  // namespace lmnav::expert
