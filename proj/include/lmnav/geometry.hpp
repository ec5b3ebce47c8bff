#pragma once

#include <cmath>

#include "lmnav/common.hpp"
#include "lmnav/rng.hpp"

namespace lmnav::world {

/// Planar robot configuration. theta is kept in (-pi, pi] by every operation
/// that writes it; -pi maps to +pi.
struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
};

/// One discrete motion primitive per axis: forward/backward, left/right
/// strafe, rotate. Each component is -1, 0 or +1; (0,0,0) is the stop action.
struct ActionTriple {
    int ax = 0;
    int ay = 0;
    int atheta = 0;

    bool is_stop() const { return ax == 0 && ay == 0 && atheta == 0; }
    bool operator==(const ActionTriple&) const = default;
};

struct KinematicsConfig {
    double stepXY = 0.05;                  // meters per action step
    double stepTheta = deg2rad(5.0);       // radians per action step
    double noiseXY = 0.005;                // actuation noise std-dev, meters
    double noiseTheta = deg2rad(0.5);      // actuation noise std-dev, radians

    void validate() const {
        if (!(stepXY > 0.0) || !(stepTheta > 0.0)) throw Error("kinematics: step sizes must be positive");
        if (noiseXY < 0.0 || noiseTheta < 0.0) throw Error("kinematics: noise std-devs must be non-negative");
    }
};

/// Wraps into (-pi, pi], with the boundary convention -pi -> +pi.
double normalize_angle(double theta);

struct PoseError {
    double dx = 0.0;      // goal position in the robot body frame
    double dy = 0.0;
    double dtheta = 0.0;  // normalized heading difference

    double translation() const { return std::hypot(dx, dy); }
};

/// Goal pose expressed in the robot's body frame.
PoseError pose_error_in_robot_frame(const Pose2D& robot, const Pose2D& goal);

/// One kinematic step: body-frame displacement (with optional Gaussian
/// actuation noise) rotated into the world frame. Noise draws happen only
/// when the corresponding std-dev is positive, so disabling noise does not
/// shift the RNG stream.
Pose2D apply_action(const Pose2D& pose, const ActionTriple& action, const KinematicsConfig& cfg, Rng& rng);

}  // namespace lmnav::world
