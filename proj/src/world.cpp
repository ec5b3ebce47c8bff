#include "lmnav/world.hpp"

#include <algorithm>
#include <limits>

namespace lmnav::world {

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
    double a = polygon_area(poly);
    if (a == 0.0) throw Error("polygon_centroid: degenerate polygon");
    double cx = 0.0, cy = 0.0;
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        double cross = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    return {cx / (6.0 * a), cy / (6.0 * a)};
}

bool polygon_is_convex(const std::vector<Vec2>& poly) {
    size_t n = poly.size();
    if (n < 3) return false;
    int sign = 0;
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        const Vec2& c = poly[(i + 2) % n];
        double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        if (std::abs(cross) < 1e-12) continue;  // collinear run is fine
        int s = cross > 0.0 ? 1 : -1;
        if (sign == 0) sign = s;
        else if (s != sign) return false;
    }
    return sign != 0;
}

void ObjectInstance::validate() {
    if (footprint.size() < 3) throw Error("object '" + instanceId + "': footprint needs >= 3 vertices");
    double a = polygon_area(footprint);
    if (a < 0.0) {
        std::reverse(footprint.begin(), footprint.end());
        a = -a;
    }
    if (!(a > 1e-9)) throw Error("object '" + instanceId + "': footprint area must be positive");
    if (!polygon_is_convex(footprint)) throw Error("object '" + instanceId + "': footprint must be convex");
    if (!(height > 0.0)) throw Error("object '" + instanceId + "': height must be positive");
    if (categoryBlend < 0.0 || categoryBlend > 1.0)
        throw Error("object '" + instanceId + "': categoryBlend must lie in [0,1]");
}

std::optional<double> ray_convex_polygon(const Vec2& origin, const Vec2& dir, const std::vector<Vec2>& poly) {
    // Half-plane clipping of the parameter interval. Assumes CCW ordering, so
    // each edge's outward normal is the edge direction rotated -90 degrees.
    double tmin = 0.0;
    double tmax = std::numeric_limits<double>::infinity();
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        double ex = q.x - p.x, ey = q.y - p.y;
        double nx = ey, ny = -ex;  // outward for CCW
        double denom = dir.x * nx + dir.y * ny;
        double num = (p.x - origin.x) * nx + (p.y - origin.y) * ny;
        if (std::abs(denom) < 1e-15) {
            if (num < 0.0) return std::nullopt;  // parallel and outside this half-plane
            continue;
        }
        double t = num / denom;
        if (denom > 0.0) tmax = std::min(tmax, t);  // leaving the half-plane
        else tmin = std::max(tmin, t);              // entering it
        if (tmin > tmax) return std::nullopt;
    }
    return tmin;
}

StartPoseGrid training_grid() {
    StartPoseGrid g;
    g.radialDistances = {0.3, 0.45, 0.6, 0.9, 1.2};
    for (int a = -90; a <= 90; a += 15) g.approachAnglesDeg.push_back(a);
    for (int o = -150; o <= 150; o += 30) g.startOrientationsDeg.push_back(o);
    return g;
}

StartPoseGrid rollout_grid() {
    StartPoseGrid g;
    g.radialDistances = {1.0};
    g.approachAnglesDeg = {80, 50, 25, 0, -25, -50, -80};
    g.startOrientationsDeg = {135, 90, 45, 0, -45, -90, -135};
    return g;
}

std::vector<Pose2D> enumerate_start_poses(const StartPoseGrid& grid, const Pose2D& objectPose) {
    if (grid.size() == 0) throw Error("enumerate_start_poses: empty grid");
    std::vector<Pose2D> poses;
    poses.reserve(grid.size());
    for (double d : grid.radialDistances) {
        for (double aDeg : grid.approachAnglesDeg) {
            double ray = deg2rad(aDeg) + (grid.worldFrameAngles ? 0.0 : objectPose.theta);
            double px = objectPose.x + d * std::cos(ray);
            double py = objectPose.y + d * std::sin(ray);
            for (double oDeg : grid.startOrientationsDeg) {
                Pose2D p;
                p.x = px;
                p.y = py;
                // Facing the object means looking back along the approach ray.
                p.theta = normalize_angle(ray + kPi + deg2rad(oDeg));
                poses.push_back(p);
            }
        }
    }
    return poses;
}

Pose2D goal_pose_for(const Pose2D& objectPose, double standoff, double approachAngleDeg) {
    double ray = objectPose.theta + deg2rad(approachAngleDeg);
    Pose2D g;
    g.x = objectPose.x + standoff * std::cos(ray);
    g.y = objectPose.y + standoff * std::sin(ray);
    g.theta = normalize_angle(ray + kPi);
    return g;
}

}  // namespace lmnav::world
