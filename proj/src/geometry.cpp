#include "lmnav/geometry.hpp"

namespace lmnav::world {

double normalize_angle(double theta) {
    if (!std::isfinite(theta)) throw Error("normalize_angle: non-finite angle");
    double r = std::remainder(theta, kTwoPi);  // lands in [-pi, pi]
    if (r <= -kPi) r = kPi;                    // boundary convention: -pi -> +pi
    return r;
}

PoseError pose_error_in_robot_frame(const Pose2D& robot, const Pose2D& goal) {
    double wx = goal.x - robot.x;
    double wy = goal.y - robot.y;
    double c = std::cos(robot.theta);
    double s = std::sin(robot.theta);
    PoseError e;
    e.dx = c * wx + s * wy;   // world delta rotated by -theta into body frame
    e.dy = -s * wx + c * wy;
    e.dtheta = normalize_angle(goal.theta - robot.theta);
    return e;
}

Pose2D apply_action(const Pose2D& pose, const ActionTriple& action, const KinematicsConfig& cfg, Rng& rng) {
    cfg.validate();
    double bx = action.ax * cfg.stepXY;
    double by = action.ay * cfg.stepXY;
    double dth = action.atheta * cfg.stepTheta;
    if (cfg.noiseXY > 0.0) {
        bx += rng.gaussian(0.0, cfg.noiseXY);
        by += rng.gaussian(0.0, cfg.noiseXY);
    }
    if (cfg.noiseTheta > 0.0) dth += rng.gaussian(0.0, cfg.noiseTheta);

    double c = std::cos(pose.theta);
    double s = std::sin(pose.theta);
    Pose2D out;
    out.x = pose.x + c * bx - s * by;
    out.y = pose.y + s * bx + c * by;
    out.theta = normalize_angle(pose.theta + dth);
    return out;
}

}  // namespace lmnav::world
