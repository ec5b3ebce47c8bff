#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lmnav/geometry.hpp"

namespace lmnav::world {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// A physical object standing on the floor: convex footprint polygon in its
/// own frame plus a height. Appearance is procedural — a category-shared
/// feature field blended with an instance-specific one.
struct ObjectInstance {
    std::string instanceId;
    std::string categoryId;
    std::vector<Vec2> footprint;  // object frame, becomes CCW on validate()
    double height = 0.8;          // meters
    uint64_t appearanceSeed = 0;
    double categoryBlend = 0.7;   // weight of the category-shared component

    /// Checks convexity/area and reorders the footprint counter-clockwise.
    void validate();
};

/// Signed polygon area (positive for CCW ordering).
double polygon_area(const std::vector<Vec2>& poly);

/// Area-weighted polygon centroid.
Vec2 polygon_centroid(const std::vector<Vec2>& poly);

bool polygon_is_convex(const std::vector<Vec2>& poly);

/// First intersection of ray origin + t*dir (t >= 0) with a convex CCW
/// polygon; returns the entry distance, or nothing on a miss. A ray starting
/// inside the polygon reports t = 0.
std::optional<double> ray_convex_polygon(const Vec2& origin, const Vec2& dir, const std::vector<Vec2>& poly);

/// Start-pose parameterization around an object: radial distance from the
/// object center, approach angle of the ray (object frame by default), and
/// the robot's starting orientation relative to facing the object.
struct StartPoseGrid {
    std::vector<double> radialDistances;        // meters
    std::vector<double> approachAnglesDeg;      // degrees
    std::vector<double> startOrientationsDeg;   // degrees
    bool worldFrameAngles = false;              // measure approach angles in the world frame instead

    size_t size() const {
        return radialDistances.size() * approachAnglesDeg.size() * startOrientationsDeg.size();
    }
};

/// The 715-pose training grid used for demonstration collection.
StartPoseGrid training_grid();

/// The 49-pose evaluation grid (distance fixed at 1 m).
StartPoseGrid rollout_grid();

/// One pose per (distance, approachAngle, startOrientation) triple, in
/// distance-major order. The robot is placed on the approach ray and faces
/// the object, then turns by startOrientation.
std::vector<Pose2D> enumerate_start_poses(const StartPoseGrid& grid, const Pose2D& objectPose);

/// A placed object: instance geometry/appearance at a world pose.
struct PlacedObject {
    ObjectInstance instance;
    Pose2D pose;
};

/// Everything the sensor can see: the target object, optional distractors,
/// and the environment appearance seed (background features).
struct Scene {
    PlacedObject target;
    std::vector<PlacedObject> distractors;
    uint64_t environmentSeed = 0;

    std::vector<const PlacedObject*> all_objects() const {
        std::vector<const PlacedObject*> v;
        v.push_back(&target);
        for (const auto& d : distractors) v.push_back(&d);
        return v;
    }

    const PlacedObject* find(const std::string& instanceId) const {
        for (const auto* p : all_objects())
            if (p->instance.instanceId == instanceId) return p;
        return nullptr;
    }
};

/// Docking pose: standoff meters from the object center along the given
/// object-frame direction, facing the object.
Pose2D goal_pose_for(const Pose2D& objectPose, double standoff, double approachAngleDeg);

}  // namespace lmnav::world
