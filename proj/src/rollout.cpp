#include "lmnav/rollout.hpp"

#include "lmnav/metrics.hpp"

namespace lmnav::rollout {

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::StopAction: return "stop_action";
        case Termination::AuxStop: return "aux_stop";
        case Termination::MaxSteps: return "max_steps";
    }
    throw Error("termination_name: unknown value");
}

Termination termination_from_name(std::string_view name) {
    if (name == "stop_action") return Termination::StopAction;
    if (name == "aux_stop") return Termination::AuxStop;
    if (name == "max_steps") return Termination::MaxSteps;
    throw Error("termination_from_name: unknown name '" + std::string(name) + "'");
}

void RolloutConfig::validate() const {
    if (maxSteps < 1) throw Error("rollout: maxSteps must be >= 1");
    if (consecutiveStopsToTerminate < 1) throw Error("rollout: consecutiveStopsToTerminate must be >= 1");
    if (frontView < 0) throw Error("rollout: frontView must be non-negative");
    if (auxStopEnabled) {
        if (!(auxThresholds.bboxAreaHi > 0.0) || auxThresholds.bboxAreaLo < 0.0 ||
            auxThresholds.bboxAreaLo > auxThresholds.bboxAreaHi || auxThresholds.comRadius < 0.0)
            throw Error("rollout: aux thresholds must be positive and ordered");
    }
}

LearnedPolicy::LearnedPolicy(const decoders::DecoderParams& params, decoders::PreparedObs goal)
    : params_(&params), goal_(std::move(goal)) {}

std::string LearnedPolicy::name() const {
    return params_->variant == decoders::Variant::Score ? "score" : "attention";
}

decoders::PolicyOutput LearnedPolicy::act(const sensor::ObservationSet& obs,
                                          const std::vector<sensor::SegmentationResult>& segs) {
    decoders::PreparedObs cur = decoders::prepare_obs(obs, segs, params_->cfg);
    return decoders::decoder_forward(*params_, cur, goal_);
}

ExpertOraclePolicy::ExpertOraclePolicy(const Pose2D& goalPose, const expert::ExpertConfig& cfg)
    : goalPose_(goalPose), cfg_(cfg) {}

decoders::PolicyOutput ExpertOraclePolicy::act(const sensor::ObservationSet& obs,
                                               const std::vector<sensor::SegmentationResult>& segs) {
    world::PoseError e = world::pose_error_in_robot_frame(obs.truePose, goalPose_);
    ActionTriple a;
    if (!cfg_.within_tolerance(e)) a = expert::expert_action(e, cfg_.deadbandXY, cfg_.deadbandTheta);
    decoders::PolicyOutput out;
    out.logits = one_hot_logits(a);
    out.auxStats = decoders::view_aux_stats(segs);
    return out;
}

decoders::PolicyOutput ConstantPolicy::act(const sensor::ObservationSet&,
                                           const std::vector<sensor::SegmentationResult>& segs) {
    decoders::PolicyOutput out;
    out.logits = one_hot_logits(action_);
    out.auxStats = decoders::view_aux_stats(segs);
    return out;
}

std::array<double, 9> one_hot_logits(const ActionTriple& a) {
    std::array<double, 9> z{};
    z[static_cast<size_t>(a.ax + 1)] = 1.0;
    z[static_cast<size_t>(3 + a.ay + 1)] = 1.0;
    z[static_cast<size_t>(6 + a.atheta + 1)] = 1.0;
    return z;
}

ActionTriple argmax_action(const std::array<double, 9>& logits) {
    int level[3];
    for (int h = 0; h < 3; ++h) {
        const double* z = logits.data() + h * 3;
        int best = 1;  // the stop level survives exact ties
        if (z[0] > z[best]) best = 0;
        if (z[2] > z[best]) best = 2;
        level[h] = best - 1;
    }
    return {level[0], level[1], level[2]};
}

RolloutLog run_rollout(Policy& policy, const RolloutWorld& world, const Pose2D& start,
                       const sensor::ObservationSet& goalObs, const RolloutConfig& cfg, Rng& rng) {
    cfg.validate();
    world.kin.validate();
    if (cfg.frontView >= static_cast<int>(goalObs.segs.size()))
        throw Error("run_rollout: front view index out of range for the goal observation");

    RolloutLog log;
    log.policyName = policy.name();
    log.instanceId = world.targetId;
    log.startPose = start;
    log.goalPose = goalObs.truePose;
    log.goalFrontSeg = goalObs.segs[static_cast<size_t>(cfg.frontView)];

    bool goalComValid = log.goalFrontSeg.set_cells() > 0;
    metrics::ComPoint goalCom;
    if (goalComValid) goalCom = metrics::mask_com(log.goalFrontSeg);

    Pose2D pose = start;
    int stopRun = 0;
    bool terminated = false;
    for (int step = 0; step < cfg.maxSteps; ++step) {
        sensor::ObservationSet obs = sensor::render_observation(world.scene, pose, world.sensorCfg, rng);
        std::vector<sensor::SegmentationResult> segs = sensor::segment(obs, world.targetId, world.segNoise, rng);
        if (cfg.frontView >= static_cast<int>(segs.size()))
            throw Error("run_rollout: front view index out of range for the rendered observation");
        decoders::PolicyOutput out = policy.act(obs, segs);
        ActionTriple action = argmax_action(out.logits);

        StepRecord rec;
        rec.pose = pose;
        rec.action = action;
        rec.logits = out.logits;
        rec.segStats = std::move(out.auxStats);
        log.steps.push_back(std::move(rec));

        const sensor::SegmentationResult& front = segs[static_cast<size_t>(cfg.frontView)];
        stopRun = action.is_stop() ? stopRun + 1 : 0;
        if (stopRun >= cfg.consecutiveStopsToTerminate) {
            log.termination = Termination::StopAction;
            log.finalFrontSeg = front;
            terminated = true;
            break;
        }
        // The aux rule converts a single stop prediction into termination when
        // the view statistics look like a demonstration ending. Without the
        // stop gate it would fire on mid-path frames that happen to face the
        // object at a goal-like distance.
        if (cfg.auxStopEnabled && goalComValid && action.is_stop()) {
            double area = front.bbox_area();
            if (area >= cfg.auxThresholds.bboxAreaLo && area <= cfg.auxThresholds.bboxAreaHi &&
                front.set_cells() > 0 &&
                metrics::d_com(goalCom, metrics::mask_com(front)) <= cfg.auxThresholds.comRadius) {
                log.termination = Termination::AuxStop;
                log.finalFrontSeg = front;
                terminated = true;
                break;
            }
        }
        if (step == cfg.maxSteps - 1) log.finalFrontSeg = front;
        pose = world::apply_action(pose, action, world.kin, rng);
    }
    if (!terminated) log.termination = Termination::MaxSteps;
    log.finalPose = pose;
    log.wallSteps = static_cast<int>(log.steps.size());
    return log;
}

Pose2D replay_final_pose(const RolloutLog& log, const world::KinematicsConfig& kin) {
    world::KinematicsConfig quiet = kin;
    quiet.noiseXY = 0.0;
    quiet.noiseTheta = 0.0;
    Rng rng(0);  // never drawn from under zero noise
    Pose2D pose = log.startPose;
    size_t applied = log.steps.size();
    // a fired stop rule preempts the final action
    if (log.termination != Termination::MaxSteps && applied > 0) --applied;
    for (size_t i = 0; i < applied; ++i) pose = world::apply_action(pose, log.steps[i].action, quiet, rng);
    return pose;
}

AuxThresholds derive_aux_thresholds(const std::vector<double>& finalFrontAreas,
                                    const std::vector<double>& finalToGoalDcom) {
    if (finalFrontAreas.empty()) throw Error("derive_aux_thresholds: no trajectories");
    if (finalFrontAreas.size() != finalToGoalDcom.size())
        throw Error("derive_aux_thresholds: area/CoM sample counts differ");
    AuxThresholds t;
    t.bboxAreaLo = metrics::percentile(finalFrontAreas, 5.0);
    t.bboxAreaHi = metrics::percentile(finalFrontAreas, 95.0);
    t.comRadius = metrics::percentile(finalToGoalDcom, 95.0);
    return t;
}

}  // namespace lmnav::rollout
