#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "lmnav/decoders.hpp"
#include "lmnav/expert.hpp"

namespace lmnav::rollout {

using world::ActionTriple;
using world::Pose2D;

enum class Termination {
    StopAction,  // the policy predicted consecutive stop actions
    AuxStop,     // the auxiliary bbox/CoM rule fired
    MaxSteps,    // step budget exhausted — counts as failure
};

const char* termination_name(Termination t);
Termination termination_from_name(std::string_view name);

struct AuxThresholds {
    double bboxAreaLo = 0.0;  // normalized front-view bbox area band
    double bboxAreaHi = 0.0;
    double comRadius = 0.0;   // patch cells
};

struct RolloutConfig {
    int maxSteps = 200;
    int consecutiveStopsToTerminate = 2;
    bool auxStopEnabled = false;
    AuxThresholds auxThresholds;
    int frontView = 0;  // view whose mask feeds the aux rule

    void validate() const;
};

struct StepRecord {
    Pose2D pose;          // pose the observation was rendered at
    ActionTriple action;  // the policy's choice at that pose
    std::array<double, 9> logits{};
    std::vector<decoders::ViewAuxStats> segStats;
};

/// One episode. The final step's action is never applied when a termination
/// rule fires — the robot stops where it decided to stop — so finalPose then
/// equals the last logged pose. Only a MaxSteps episode ends one apply past
/// its last frame.
struct RolloutLog {
    int startIndex = -1;  // position in the start-pose grid, -1 when free-standing
    std::string gridName;
    std::string policyName;
    std::string instanceId;
    uint64_t seed = 0;
    Pose2D startPose;
    Pose2D goalPose;
    std::vector<StepRecord> steps;
    Pose2D finalPose;
    Termination termination = Termination::MaxSteps;
    int wallSteps = 0;
    sensor::SegmentationResult finalFrontSeg;  // final frame, as segmented
    sensor::SegmentationResult goalFrontSeg;   // goal annotation, oracle
};

/// Everything a rollout needs besides the policy: scene, kinematics, sensing
/// and the segmentation corruption applied to what the policy sees.
struct RolloutWorld {
    world::Scene scene;
    world::KinematicsConfig kin;
    sensor::SensorConfig sensorCfg;
    sensor::SegNoiseModel segNoise;
    std::string targetId;
};

class Policy {
  public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    /// segs are the (possibly corrupted) detections for the target; obs
    /// carries the raw feature grids. truePose is off-limits to learned
    /// policies — only the oracle reads it.
    virtual decoders::PolicyOutput act(const sensor::ObservationSet& obs,
                                       const std::vector<sensor::SegmentationResult>& segs) = 0;
};

/// Trained decoder bound to a fixed goal observation.
class LearnedPolicy : public Policy {
  public:
    LearnedPolicy(const decoders::DecoderParams& params, decoders::PreparedObs goal);
    std::string name() const override;
    decoders::PolicyOutput act(const sensor::ObservationSet& obs,
                               const std::vector<sensor::SegmentationResult>& segs) override;

  private:
    const decoders::DecoderParams* params_;
    decoders::PreparedObs goal_;
};

/// The demonstration expert wrapped as a policy: reads the true pose, emits
/// the deadbanded sign action, stops inside the tolerance band. Used for
/// closed-loop soundness checks, never for evaluation of learned models.
class ExpertOraclePolicy : public Policy {
  public:
    ExpertOraclePolicy(const Pose2D& goalPose, const expert::ExpertConfig& cfg);
    std::string name() const override { return "expert-oracle"; }
    decoders::PolicyOutput act(const sensor::ObservationSet& obs,
                               const std::vector<sensor::SegmentationResult>& segs) override;

  private:
    Pose2D goalPose_;
    expert::ExpertConfig cfg_;
};

/// Emits the same action every step; test stub.
class ConstantPolicy : public Policy {
  public:
    explicit ConstantPolicy(const ActionTriple& action) : action_(action) {}
    std::string name() const override { return "constant"; }
    decoders::PolicyOutput act(const sensor::ObservationSet& obs,
                               const std::vector<sensor::SegmentationResult>& segs) override;

  private:
    ActionTriple action_;
};

/// 1.0 on each head's chosen level, 0.0 elsewhere.
std::array<double, 9> one_hot_logits(const ActionTriple& a);

/// Per-head argmax over the three levels. Exact ties keep the stop level —
/// conservative motion, and deterministic for tests.
ActionTriple argmax_action(const std::array<double, 9>& logits);

/// Runs the policy from start until a stop rule fires or maxSteps elapse.
/// Per step: render, segment, policy forward, argmax, log; then check the
/// consecutive-stop rule, then (when enabled) the aux rule — the predicted
/// action is a stop AND the front view's bbox area is inside [lo, hi] AND its
/// mask CoM is within comRadius cells of the goal mask's CoM. A single gated
/// stop therefore suffices where the primary rule needs two in a row. Only if
/// neither rule fires is the action applied. goalObs must be rendered at the
/// goal pose; its oracle front seg is kept in the log.
RolloutLog run_rollout(Policy& policy, const RolloutWorld& world, const Pose2D& start,
                       const sensor::ObservationSet& goalObs, const RolloutConfig& cfg, Rng& rng);

/// Re-applies the logged actions (noise-free) under the convention above;
/// equals finalPose to 1e-9 for a zero-noise rollout.
Pose2D replay_final_pose(const RolloutLog& log, const world::KinematicsConfig& kin);

/// Aux thresholds from demonstration statistics: 5th/95th percentile of the
/// final-frame front bbox areas, 95th percentile of the final-to-goal CoM
/// distances. One entry per trajectory in each vector.
AuxThresholds derive_aux_thresholds(const std::vector<double>& finalFrontAreas,
                                    const std::vector<double>& finalToGoalDcom);

}  // namespace lmnav::rollout
