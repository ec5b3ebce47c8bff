#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "lmnav/world.hpp"

namespace lmnav::sensor {

using world::Pose2D;
using world::PlacedObject;
using world::Scene;

struct CameraView {
    std::string name;
    double yawOffset = 0.0;      // radians, relative to robot heading
    double horizontalFov = 0.0;  // radians
};

/// Four-view horizontal pinhole rig covering 360 degrees. Features are
/// rendered straight at patch resolution — there is no pixel image.
struct CameraRig {
    std::vector<CameraView> views;  // fixed order: front, right, back, left
    int patchH = 16;
    int patchW = 16;
    int featureDim = 32;
    double verticalFov = deg2rad(90.0);
    double cameraHeight = 0.5;  // meters above the floor

    void validate() const;
    int view_index(const std::string& name) const;
};

CameraRig default_rig();

struct FeatureGrid {
    int view = 0;
    std::vector<float> data;  // patchH x patchW x featureDim, row-major

    const float* at(int r, int c, int W, int D) const { return data.data() + (static_cast<size_t>(r) * W + c) * D; }
    float* at(int r, int c, int W, int D) { return data.data() + (static_cast<size_t>(r) * W + c) * D; }
};

struct SegmentationResult {
    int view = 0;
    int gridH = 0, gridW = 0;
    std::vector<uint8_t> mask;  // gridH x gridW, values 0/1
    double uMin = 0.0, vMin = 0.0, uMax = 0.0, vMax = 0.0;  // normalized, tight bound
    bool present = false;

    double bbox_area() const { return (uMax - uMin) * (vMax - vMin); }
    size_t set_cells() const;
    uint8_t cell(int r, int c) const { return mask[static_cast<size_t>(r) * gridW + c]; }
    /// Rederives present + tight bbox from the mask contents.
    void recompute_box();
};

/// Per-frame segmentation corruption model.
struct SegNoiseModel {
    double dropoutProb = 0.0;        // whole-view miss
    int jitterCells = 0;             // dilate-or-erode radius
    double flickerProb = 0.0;        // per-cell toggle
    double falsePositiveProb = 0.0;  // report a distractor's mask instead

    void validate() const;
};

/// One timestep's worth of sensing: per-view feature grids, the target's
/// oracle segmentation, plus oracle segmentations of every other scene object
/// (needed for distractor-swap corruption). truePose is ground truth for
/// bookkeeping and evaluation only — the policy never reads it.
struct ObservationSet {
    std::vector<FeatureGrid> grids;
    std::vector<SegmentationResult> segs;
    std::map<std::string, std::vector<SegmentationResult>> allSegs;
    Pose2D truePose;
};

struct SensorConfig {
    CameraRig rig = default_rig();
    double featureNoiseStd = 0.0;  // gaussian noise added to every feature scalar
    double surfaceCell = 0.20;     // lattice pitch of the surface feature field, meters
};

/// Oracle projection of a single object into one view (no occlusion).
/// Throws on the degenerate robot-at-centroid geometry.
SegmentationResult project_object(const Pose2D& robot, const PlacedObject& obj, const CameraRig& rig, int view);

/// Full render of a scene: occlusion-aware oracle masks for every object and
/// synthetic per-patch features (seeded background + blended surface fields).
ObservationSet render_observation(const Scene& scene, const Pose2D& robot, const SensorConfig& cfg, Rng& rng);

/// The target's segmentation as a detector would report it: oracle masks
/// corrupted per the noise model. Draws happen only for enabled corruptions,
/// in a fixed order (dropout, distractor swap, jitter, flicker) per view.
std::vector<SegmentationResult> segment(const ObservationSet& obs, const std::string& targetId,
                                        const SegNoiseModel& noise, Rng& rng);

}  // namespace lmnav::sensor
