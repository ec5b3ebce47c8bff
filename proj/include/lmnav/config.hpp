#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmnav/decoders.hpp"
#include "lmnav/expert.hpp"
#include "lmnav/metrics.hpp"
#include "lmnav/nn.hpp"
#include "lmnav/rollout.hpp"

namespace lmnav::config {

inline constexpr const char* kToolVersion = "lmnav 0.1.0";

/// The manipulated object: one shared geometry, one appearance seed for the
/// instance used in demonstrations and a disjoint pool of held-out seeds for
/// generalization suites.
struct ObjectSpec {
    std::string categoryId = "chair";
    std::vector<world::Vec2> footprint = {{0.22, -0.22}, {0.22, 0.22}, {-0.22, 0.22}, {-0.22, -0.22}};
    double height = 0.8;
    double categoryBlend = 0.7;
    uint64_t seenAppearanceSeed = 101;
    std::vector<uint64_t> heldOutAppearanceSeeds = {211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271};
};

struct WorldSection {
    world::KinematicsConfig kinematics;
    ObjectSpec object;
    world::Pose2D objectPose{2.0, 0.0, 0.0};
    double goalStandoff = 0.6;     // meters in front of the object center
    double goalApproachDeg = 0.0;  // object-frame angle of the approach ray
    uint64_t environmentSeed = 7;
    std::string collectGrid = "training";
};

struct SensorSection {
    sensor::SensorConfig cfg;
    sensor::SegNoiseModel segNoise;
};

struct DataSection {
    expert::ExpertConfig expert;
    int pseudoGoalsPerStep = 4;
    bool relabel = true;
};

struct TrainSection {
    decoders::Variant variant = decoders::Variant::Score;
    decoders::DecoderConfig decoder;  // featureDim/viewCount mirror the rig, not settable directly
    nn::TrainHyper hyper;

    TrainSection() { hyper.epochs = 20; }
};

struct RolloutSection {
    rollout::RolloutConfig cfg;  // aux thresholds come from the dataset manifest at run time
    std::string grid = "rollout";
};

struct EvalSection {
    metrics::AlignmentThresholds thresholds;
};

/// Everything a run needs, with the defaults of the study baked in. JSON
/// configs are overlays: absent keys keep their defaults, unknown keys are
/// rejected so typos cannot silently revert to a default.
struct RunConfig {
    uint64_t seed = 1;
    WorldSection worldSection;
    SensorSection sensorSection;
    DataSection dataSection;
    TrainSection trainSection;
    RolloutSection rolloutSection;
    EvalSection evalSection;

    void validate() const;
};

/// Canonical JSON dump: sorted keys, two-space indent, angles in degrees.
/// Hashing this text is what links artifacts produced under one config.
std::string config_to_json(const RunConfig& cfg);

/// Parses an overlay onto the defaults. Throws on unknown keys (with the
/// dotted path), malformed values, or a failing validate().
RunConfig config_from_json(const std::string& text);

uint64_t config_hash(const RunConfig& cfg);

/// Scene for the seen instance (heldOutIndex < 0) or one of the held-out
/// appearance seeds. Geometry and placement are shared; only the appearance
/// seed and the instance id change.
world::Scene make_scene(const RunConfig& cfg, int heldOutIndex = -1);

std::string instance_id(const RunConfig& cfg, int heldOutIndex);

world::Pose2D goal_pose(const RunConfig& cfg);

/// "training" or "rollout"; anything else is a usage error.
world::StartPoseGrid grid_by_name(const std::string& name);

}  // namespace lmnav::config
