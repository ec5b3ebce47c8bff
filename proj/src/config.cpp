#include "lmnav/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <set>

#include "lmnav/rng.hpp"

namespace lmnav::config {
namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& path, const std::string& key) {
    throw Error("config: unknown key '" + (path.empty() ? key : path + "." + key) + "'");
}

template <typename T>
T as(const json& v, const std::string& path) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw Error("config: bad value at '" + path + "'");
    }
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

json pose_to_json(const world::Pose2D& p) {
    return json::array({p.x, p.y, rad2deg(p.theta)});
}

world::Pose2D pose_from_json(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) throw Error("config: '" + path + "' must be [x, y, thetaDeg]");
    return {as<double>(v[0], path), as<double>(v[1], path), deg2rad(as<double>(v[2], path))};
}

const char* activation_name(nn::Activation a) {
    switch (a) {
        case nn::Activation::Identity: return "identity";
        case nn::Activation::Relu: return "relu";
        case nn::Activation::Tanh: return "tanh";
    }
    throw Error("config: bad activation enum");
}

nn::Activation activation_from_name(const std::string& s, const std::string& path) {
    if (s == "identity") return nn::Activation::Identity;
    if (s == "relu") return nn::Activation::Relu;
    if (s == "tanh") return nn::Activation::Tanh;
    throw Error("config: '" + path + "' must be one of identity/relu/tanh");
}

void apply_object(const json& j, ObjectSpec& o, const std::string& path) {
    for (const auto& [key, v] : j.items()) {
        const std::string p = join(path, key);
        if (key == "category") {
            o.categoryId = as<std::string>(v, p);
        } else if (key == "footprint") {
            if (!v.is_array() || v.size() < 3) throw Error("config: '" + p + "' needs at least 3 vertices");
            o.footprint.clear();
            for (const auto& pt : v) {
                if (!pt.is_array() || pt.size() != 2) throw Error("config: '" + p + "' vertices must be [x, y]");
                o.footprint.push_back({as<double>(pt[0], p), as<double>(pt[1], p)});
            }
        } else if (key == "height") {
            o.height = as<double>(v, p);
        } else if (key == "categoryBlend") {
            o.categoryBlend = as<double>(v, p);
        } else if (key == "seenAppearanceSeed") {
            o.seenAppearanceSeed = as<uint64_t>(v, p);
        } else if (key == "heldOutAppearanceSeeds") {
            o.heldOutAppearanceSeeds = as<std::vector<uint64_t>>(v, p);
        } else {
            bad_key(path, key);
        }
    }
}

void apply_world(const json& j, WorldSection& w, const std::string& path) {
    for (const auto& [key, v] : j.items()) {
        const std::string p = join(path, key);
        if (key == "stepXY") {
            w.kinematics.stepXY = as<double>(v, p);
        } else if (key == "stepThetaDeg") {
            w.kinematics.stepTheta = deg2rad(as<double>(v, p));
        } else if (key == "noiseXY") {
            w.kinematics.noiseXY = as<double>(v, p);
        } else if (key == "noiseThetaDeg") {
            w.kinematics.noiseTheta = deg2rad(as<double>(v, p));
        } else if (key == "object") {
            apply_object(v, w.object, p);
        } else if (key == "objectPose") {
            w.objectPose = pose_from_json(v, p);
        } else if (key == "goalStandoff") {
            w.goalStandoff = as<double>(v, p);
        } else if (key == "goalApproachDeg") {
            w.goalApproachDeg = as<double>(v, p);
        } else if (key == "environmentSeed") {
            w.environmentSeed = as<uint64_t>(v, p);
        } else if (key == "collectGrid") {
            w.collectGrid = as<std::string>(v, p);
        } else {
            bad_key(path, key);
        }
    }
}

void apply_seg_noise(const json& j, sensor::SegNoiseModel& n, const std::string& path) {
    for (const auto& [key, v] : j.items()) {
        const std::string p = join(path, key);
        if (key == "dropoutProb") {
            n.dropoutProb = as<double>(v, p);
        } else if (key == "jitterCells") {
            n.jitterCells = as<int>(v, p);
        } else if (key == "flickerProb") {
            n.flickerProb = as<double>(v, p);
        } else if (key == "falsePositiveProb") {
            n.falsePositiveProb = as<double>(v, p);
        } else {
            bad_key(path, key);
        }
    }
}

void apply_sensor(const json& j, SensorSection& s, const std::string& path) {
    for (const auto& [key, v] : j.items()) {
        const std::string p = join(path, key);
        if (key == "patchH") {
            s.cfg.rig.patchH = as<int>(v, p);
        } else if (key == "patchW") {
            s.cfg.rig.patchW = as<int>(v, p);
        } else if (key == "featureDim") {
            s.cfg.rig.featureDim = as<int>(v, p);
        } else if (key == "featureNoiseStd") {
            s.cfg.featureNoiseStd = as<double>(v, p);
        } else if (key == "surfaceCell") {
            s.cfg.surfaceCell = as<double>(v, p);
        } else if (key == "segNoise") {
            apply_seg_noise(v, s.segNoise, p);
        } else {
            bad_key(path, key);
        }
    }
}

void apply_data(const json& j, DataSection& d, const std::string& path) {
    for (const auto& [key, v] : j.items()) {
        const std::string p = join(path, key);
        if (key == "deadbandXY") {
            d.expert.deadbandXY = as<double>(v, p);
        } else if (key == "deadbandThetaDeg") {
            d.expert.deadbandTheta = deg2rad(as<double>(v, p));
        } else if (key == "goalToleranceXY") {
            d.expert.goalToleranceXY = as<double>(v, p);
        } else if (key == "goalToleranceThetaDeg") {
            d.expert.goalToleranceTheta = deg2rad(as<double>(v, p));
        } else if (key == "maxExpertSteps") {
            d.expert.maxExpertSteps = as<int>(v, p);
        } else if (key == "pseudoGoalsPerStep") {
            d.pseudoGoalsPerStep = as<int>(v, p);
        } else if (key == "relabel") {
            d.relabel = as<bool>(v, p);
        } else {
            bad_key(path, key);
        }
    }
}

void apply_train(const json& j, TrainSection& t, const std::string& path) {
    for (const auto& [key, v] : j.items()) {
        const std::string p = join(path, key);
        if (key == "variant") {
            t.variant = decoders::variant_from_name(as<std::string>(v, p));
        } else if (key == "poolGrid") {
            t.decoder.poolGrid = as<int>(v, p);
        } else if (key == "poolMax") {
            t.decoder.poolMax = as<bool>(v, p);
        } else if (key == "boxHidden") {
            t.decoder.boxHidden = as<int>(v, p);
        } else if (key == "boxDim") {
            t.decoder.boxDim = as<int>(v, p);
        } else if (key == "headHidden") {
            t.decoder.headHidden = as<int>(v, p);
        } else if (key == "attnHeads") {
            t.decoder.attnHeads = as<int>(v, p);
        } else if (key == "activation") {
            t.decoder.activation = activation_from_name(as<std::string>(v, p), p);
        } else if (key == "learningRate") {
            t.hyper.learningRate = as<double>(v, p);
        } else if (key == "batchSize") {
            t.hyper.batchSize = as<int>(v, p);
        } else if (key == "epochs") {
            t.hyper.epochs = as<int>(v, p);
        } else if (key == "optimizer") {
            const std::string s = as<std::string>(v, p);
            if (s == "adam") {
                t.hyper.algorithm = nn::OptState::Algo::Adam;
            } else if (s == "sgd") {
                t.hyper.algorithm = nn::OptState::Algo::Sgd;
            } else {
                throw Error("config: '" + p + "' must be adam or sgd");
            }
        } else {
            bad_key(path, key);
        }
    }
}

void apply_rollout(const json& j, RolloutSection& r, const std::string& path) {
    for (const auto& [key, v] : j.items()) {
        const std::string p = join(path, key);
        if (key == "maxSteps") {
            r.cfg.maxSteps = as<int>(v, p);
        } else if (key == "consecutiveStops") {
            r.cfg.consecutiveStopsToTerminate = as<int>(v, p);
        } else if (key == "frontView") {
            r.cfg.frontView = as<int>(v, p);
        } else if (key == "grid") {
            r.grid = as<std::string>(v, p);
        } else {
            bad_key(path, key);
        }
    }
}

void apply_eval(const json& j, EvalSection& e, const std::string& path) {
    for (const auto& [key, v] : j.items()) {
        const std::string p = join(path, key);
        if (key == "translationTol") {
            e.thresholds.translationTol = as<double>(v, p);
        } else if (key == "orientationTolDeg") {
            e.thresholds.orientationTol = deg2rad(as<double>(v, p));
        } else {
            bad_key(path, key);
        }
    }
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) {
    const auto& w = cfg.worldSection;
    const auto& s = cfg.sensorSection;
    const auto& d = cfg.dataSection;
    const auto& t = cfg.trainSection;
    const auto& r = cfg.rolloutSection;
    const auto& e = cfg.evalSection;

    json fp = json::array();
    for (const auto& v : w.object.footprint) fp.push_back(json::array({v.x, v.y}));

    json j;
    j["seed"] = cfg.seed;
    j["world"] = {
        {"stepXY", w.kinematics.stepXY},
        {"stepThetaDeg", rad2deg(w.kinematics.stepTheta)},
        {"noiseXY", w.kinematics.noiseXY},
        {"noiseThetaDeg", rad2deg(w.kinematics.noiseTheta)},
        {"object",
         {{"category", w.object.categoryId},
          {"footprint", fp},
          {"height", w.object.height},
          {"categoryBlend", w.object.categoryBlend},
          {"seenAppearanceSeed", w.object.seenAppearanceSeed},
          {"heldOutAppearanceSeeds", w.object.heldOutAppearanceSeeds}}},
        {"objectPose", pose_to_json(w.objectPose)},
        {"goalStandoff", w.goalStandoff},
        {"goalApproachDeg", w.goalApproachDeg},
        {"environmentSeed", w.environmentSeed},
        {"collectGrid", w.collectGrid},
    };
    j["sensor"] = {
        {"patchH", s.cfg.rig.patchH},
        {"patchW", s.cfg.rig.patchW},
        {"featureDim", s.cfg.rig.featureDim},
        {"featureNoiseStd", s.cfg.featureNoiseStd},
        {"surfaceCell", s.cfg.surfaceCell},
        {"segNoise",
         {{"dropoutProb", s.segNoise.dropoutProb},
          {"jitterCells", s.segNoise.jitterCells},
          {"flickerProb", s.segNoise.flickerProb},
          {"falsePositiveProb", s.segNoise.falsePositiveProb}}},
    };
    j["data"] = {
        {"deadbandXY", d.expert.deadbandXY},
        {"deadbandThetaDeg", rad2deg(d.expert.deadbandTheta)},
        {"goalToleranceXY", d.expert.goalToleranceXY},
        {"goalToleranceThetaDeg", rad2deg(d.expert.goalToleranceTheta)},
        {"maxExpertSteps", d.expert.maxExpertSteps},
        {"pseudoGoalsPerStep", d.pseudoGoalsPerStep},
        {"relabel", d.relabel},
    };
    j["train"] = {
        {"variant", decoders::variant_name(t.variant)},
        {"poolGrid", t.decoder.poolGrid},
        {"poolMax", t.decoder.poolMax},
        {"boxHidden", t.decoder.boxHidden},
        {"boxDim", t.decoder.boxDim},
        {"headHidden", t.decoder.headHidden},
        {"attnHeads", t.decoder.attnHeads},
        {"activation", activation_name(t.decoder.activation)},
        {"learningRate", t.hyper.learningRate},
        {"batchSize", t.hyper.batchSize},
        {"epochs", t.hyper.epochs},
        {"optimizer", t.hyper.algorithm == nn::OptState::Algo::Adam ? "adam" : "sgd"},
    };
    j["rollout"] = {
        {"maxSteps", r.cfg.maxSteps},
        {"consecutiveStops", r.cfg.consecutiveStopsToTerminate},
        {"frontView", r.cfg.frontView},
        {"grid", r.grid},
    };
    j["eval"] = {
        {"translationTol", e.thresholds.translationTol},
        {"orientationTolDeg", rad2deg(e.thresholds.orientationTol)},
    };
    return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw Error(std::string("config: parse error: ") + ex.what());
    }
    if (!j.is_object()) throw Error("config: top level must be an object");

    RunConfig cfg;
    for (const auto& [key, v] : j.items()) {
        if (key == "seed") {
            cfg.seed = as<uint64_t>(v, key);
        } else if (key == "world") {
            apply_world(v, cfg.worldSection, key);
        } else if (key == "sensor") {
            apply_sensor(v, cfg.sensorSection, key);
        } else if (key == "data") {
            apply_data(v, cfg.dataSection, key);
        } else if (key == "train") {
            apply_train(v, cfg.trainSection, key);
        } else if (key == "rollout") {
            apply_rollout(v, cfg.rolloutSection, key);
        } else if (key == "eval") {
            apply_eval(v, cfg.evalSection, key);
        } else {
            bad_key("", key);
        }
    }

    // The decoder always sees exactly what the rig produces.
    cfg.trainSection.decoder.featureDim = cfg.sensorSection.cfg.rig.featureDim;
    cfg.trainSection.decoder.viewCount = static_cast<int>(cfg.sensorSection.cfg.rig.views.size());

    cfg.validate();
    return cfg;
}

uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(config_to_json(cfg)); }

void RunConfig::validate() const {
    worldSection.kinematics.validate();
    sensorSection.cfg.rig.validate();
    sensorSection.segNoise.validate();
    if (sensorSection.cfg.featureNoiseStd < 0.0) throw Error("config: sensor.featureNoiseStd must be non-negative");
    if (!(sensorSection.cfg.surfaceCell > 0.0)) throw Error("config: sensor.surfaceCell must be positive");

    const auto& o = worldSection.object;
    {
        world::ObjectInstance probe;
        probe.instanceId = "probe";
        probe.categoryId = o.categoryId;
        probe.footprint = o.footprint;
        probe.height = o.height;
        probe.categoryBlend = o.categoryBlend;
        probe.validate();
    }
    if (o.heldOutAppearanceSeeds.size() < 10)
        throw Error("config: world.object.heldOutAppearanceSeeds needs at least 10 entries");
    std::set<uint64_t> held(o.heldOutAppearanceSeeds.begin(), o.heldOutAppearanceSeeds.end());
    if (held.size() != o.heldOutAppearanceSeeds.size())
        throw Error("config: world.object.heldOutAppearanceSeeds has duplicates");
    if (held.count(o.seenAppearanceSeed))
        throw Error("config: held-out appearance seeds must not contain the seen instance's seed");
    if (!(worldSection.goalStandoff > 0.0)) throw Error("config: world.goalStandoff must be positive");
    grid_by_name(worldSection.collectGrid);
    grid_by_name(rolloutSection.grid);

    const auto& ex = dataSection.expert;
    if (!(ex.deadbandXY > 0.0) || !(ex.deadbandTheta > 0.0)) throw Error("config: data deadbands must be positive");
    if (!(ex.goalToleranceXY > 0.0) || !(ex.goalToleranceTheta > 0.0))
        throw Error("config: data goal tolerances must be positive");
    if (ex.maxExpertSteps < 1) throw Error("config: data.maxExpertSteps must be at least 1");
    if (dataSection.pseudoGoalsPerStep < 1) throw Error("config: data.pseudoGoalsPerStep must be at least 1");

    trainSection.decoder.validate();
    if (trainSection.decoder.featureDim != sensorSection.cfg.rig.featureDim)
        throw Error("config: decoder featureDim must match the sensor rig");
    if (trainSection.decoder.viewCount != static_cast<int>(sensorSection.cfg.rig.views.size()))
        throw Error("config: decoder viewCount must match the sensor rig");
    if (trainSection.decoder.poolGrid > std::min(sensorSection.cfg.rig.patchH, sensorSection.cfg.rig.patchW))
        throw Error("config: train.poolGrid cannot exceed the patch grid");
    if (trainSection.hyper.batchSize < 1) throw Error("config: train.batchSize must be at least 1");
    if (trainSection.hyper.epochs < 1) throw Error("config: train.epochs must be at least 1");
    if (!(trainSection.hyper.learningRate > 0.0)) throw Error("config: train.learningRate must be positive");

    rolloutSection.cfg.validate();
    if (rolloutSection.cfg.frontView >= static_cast<int>(sensorSection.cfg.rig.views.size()))
        throw Error("config: rollout.frontView is outside the rig");

    if (!(evalSection.thresholds.translationTol > 0.0) || !(evalSection.thresholds.orientationTol > 0.0))
        throw Error("config: eval thresholds must be positive");
}

world::Scene make_scene(const RunConfig& cfg, int heldOutIndex) {
    const auto& o = cfg.worldSection.object;
    world::ObjectInstance inst;
    inst.instanceId = instance_id(cfg, heldOutIndex);
    inst.categoryId = o.categoryId;
    inst.footprint = o.footprint;
    inst.height = o.height;
    inst.categoryBlend = o.categoryBlend;
    if (heldOutIndex < 0) {
        inst.appearanceSeed = o.seenAppearanceSeed;
    } else {
        if (heldOutIndex >= static_cast<int>(o.heldOutAppearanceSeeds.size()))
            throw Error("config: held-out instance index out of range");
        inst.appearanceSeed = o.heldOutAppearanceSeeds[static_cast<size_t>(heldOutIndex)];
    }
    inst.validate();

    world::Scene scene;
    scene.target = {inst, cfg.worldSection.objectPose};
    scene.environmentSeed = cfg.worldSection.environmentSeed;
    return scene;
}

std::string instance_id(const RunConfig& cfg, int heldOutIndex) {
    const auto& o = cfg.worldSection.object;
    if (heldOutIndex < 0) return o.categoryId + "-seen";
    char buf[16];
    std::snprintf(buf, sizeof buf, "-h%02d", heldOutIndex);
    return o.categoryId + buf;
}

world::Pose2D goal_pose(const RunConfig& cfg) {
    return world::goal_pose_for(cfg.worldSection.objectPose, cfg.worldSection.goalStandoff,
                                cfg.worldSection.goalApproachDeg);
}

world::StartPoseGrid grid_by_name(const std::string& name) {
    if (name == "training") return world::training_grid();
    if (name == "rollout") return world::rollout_grid();
    throw Error("config: unknown start grid '" + name + "' (expected \"training\" or \"rollout\")");
}

}  // namespace lmnav::config
