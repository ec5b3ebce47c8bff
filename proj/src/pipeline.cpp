#include "lmnav/pipeline.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>

#include "lmnav/rng.hpp"

namespace lmnav::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

/// Records artifact paths (relative to the experiment dir) in experiment.json.
void note_artifacts(const std::string& outDir, uint64_t configHash,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    const std::string path = outDir + "/experiment.json";
    json j = json::object();
    if (io::file_exists(path)) {
        try {
            j = json::parse(io::read_text_file(path));
        } catch (const json::exception&) {
            throw Error("experiment manifest is corrupt: " + path);
        }
        if (!j.is_object()) throw Error("experiment manifest is corrupt: " + path);
    }
    j["format"] = "lmnav-experiment";
    j["tool"] = config::kToolVersion;
    for (const auto& [key, rel] : entries)
        j["artifacts"][key] = {{"configHash", io::hex_u64(configHash)}, {"path", rel}};
    io::write_text_file(path, j.dump(2) + "\n");
}

std::string resolve_sibling(const std::string& anchorPath, const std::string& basename) {
    return (fs::path(anchorPath).parent_path() / basename).string();
}

/// "rollouts-score-seen-rollout-aux.jsonl" -> "score-seen-rollout-aux"
std::string log_stem(const std::string& path) {
    std::string stem = fs::path(path).stem().string();
    if (stem.rfind("rollouts-", 0) == 0) stem = stem.substr(9);
    return stem;
}

}  // namespace

sensor::ObservationSet goal_observation(const config::RunConfig& cfg, const world::Scene& scene) {
    Rng rng(derive_seed(cfg.seed, "goalobs:" + scene.target.instance.instanceId));
    return sensor::render_observation(scene, config::goal_pose(cfg), cfg.sensorSection.cfg, rng);
}

CollectOutcome cmd_collect(const config::RunConfig& cfg, const std::string& outDir,
                           const CollectOptions& opt, std::ostream& out) {
    cfg.validate();
    const std::string gridName = opt.gridName.empty() ? cfg.worldSection.collectGrid : opt.gridName;
    const auto grid = config::grid_by_name(gridName);
    const auto scene = config::make_scene(cfg, -1);
    const auto goal = config::goal_pose(cfg);
    const auto starts = world::enumerate_start_poses(grid, cfg.worldSection.objectPose);

    if (opt.dryRun) {
        out << "collect (dry run): " << starts.size() << " starts on the '" << gridName
            << "' grid, instance '" << scene.target.instance.instanceId << "', goal at (" << goal.x
            << ", " << goal.y << ", " << rad2deg(goal.theta) << " deg)\n";
        return {};
    }

    fs::create_directories(outDir);
    const uint64_t hash = config::config_hash(cfg);
    const int front = cfg.rolloutSection.cfg.frontView;

    CollectOutcome res;
    res.obsStorePath = outDir + "/observations.bin";
    res.trajectoriesPath = outDir + "/trajectories.jsonl";
    res.datasetPath = outDir + "/dataset.json";

    io::ObsWriter writer(res.obsStorePath, cfg.sensorSection.cfg.rig);
    sensor::SegmentationResult lastFront;
    expert::ObsSink sink = [&](const sensor::ObservationSet& o) {
        lastFront = o.segs[static_cast<size_t>(front)];
        return writer.append(o);
    };

    const auto goalObs = goal_observation(cfg, scene);
    const auto& goalSeg = goalObs.segs[static_cast<size_t>(front)];
    const bool goalComOk = goalSeg.present && goalSeg.set_cells() > 0;
    metrics::ComPoint goalCom;
    if (goalComOk) goalCom = metrics::mask_com(goalSeg);

    std::vector<expert::TrajectoryRecord> trajs;
    std::vector<double> areas, dcoms;
    size_t stepSum = 0;
    for (size_t i = 0; i < starts.size(); ++i) {
        Rng rng(derive_seed(cfg.seed, {fnv1a64("collect"), static_cast<uint64_t>(i)}));
        try {
            auto t = expert::collect_trajectory(static_cast<int>(i), starts[i], goal, scene,
                                                cfg.worldSection.kinematics, cfg.sensorSection.cfg,
                                                cfg.dataSection.expert, rng, &sink);
            stepSum += t.steps.size();
            if (goalComOk && lastFront.present && lastFront.set_cells() > 0) {
                areas.push_back(lastFront.bbox_area());
                dcoms.push_back(metrics::d_com(goalCom, metrics::mask_com(lastFront)));
            }
            trajs.push_back(std::move(t));
        } catch (const expert::ExpertDivergence&) {
            ++res.divergences;
        }
    }
    writer.close();
    if (trajs.empty()) throw Error("collect: every trajectory diverged");

    res.trajectoryCount = static_cast<int>(trajs.size());
    res.meanLength = static_cast<double>(stepSum) / static_cast<double>(trajs.size());
    res.auxThresholds = rollout::derive_aux_thresholds(areas, dcoms);

    Rng dsRng(derive_seed(cfg.seed, "dataset"));
    auto ds = expert::build_dataset(trajs, cfg.dataSection.pseudoGoalsPerStep, cfg.dataSection.relabel,
                                    cfg.dataSection.expert, dsRng);
    res.sampleCount = ds.samples.size();

    io::save_trajectories(res.trajectoriesPath, trajs, hash, cfg.seed);
    io::DatasetManifest manifest;
    manifest.samples = std::move(ds.samples);
    manifest.auxThresholds = res.auxThresholds;
    manifest.obsStoreFile = "observations.bin";
    manifest.trajectoriesFile = "trajectories.jsonl";
    manifest.trajectoryCount = res.trajectoryCount;
    manifest.divergences = res.divergences;
    manifest.meanTrajectoryLength = res.meanLength;
    manifest.configHash = hash;
    manifest.seed = cfg.seed;
    io::save_dataset_manifest(res.datasetPath, manifest);

    note_artifacts(outDir, hash,
                   {{"dataset", "dataset.json"},
                    {"trajectories", "trajectories.jsonl"},
                    {"observations", "observations.bin"}});

    out << "collected " << res.trajectoryCount << " trajectories (" << res.divergences
        << " diverged) on the '" << gridName << "' grid, mean length " << fmt1(res.meanLength)
        << "\n";
    out << "dataset: " << res.sampleCount << " pairs, aux bbox area [" << res.auxThresholds.bboxAreaLo
        << ", " << res.auxThresholds.bboxAreaHi << "], CoM radius " << fmt1(res.auxThresholds.comRadius)
        << " cells\n";
    return res;
}

TrainOutcome cmd_train(const config::RunConfig& cfg, const std::string& outDir,
                       const TrainOptions& opt, std::ostream& out) {
    cfg.validate();
    if (opt.datasetPath.empty()) throw Error("train: a dataset manifest is required");
    const uint64_t hash = config::config_hash(cfg);
    const auto manifest = io::load_dataset_manifest(opt.datasetPath);
    if (manifest.configHash != hash)
        throw Error("train: dataset was produced under a different config (hash mismatch)");

    const auto& rig = cfg.sensorSection.cfg.rig;
    io::ObsReader reader(resolve_sibling(opt.datasetPath, manifest.obsStoreFile));
    if (reader.feature_dim() != rig.featureDim || reader.view_count() != static_cast<int>(rig.views.size()) ||
        reader.patch_h() != rig.patchH || reader.patch_w() != rig.patchW)
        throw Error("train: observation store does not match the sensor rig in the config");
    const auto trajFile = io::load_trajectories(resolve_sibling(opt.datasetPath, manifest.trajectoriesFile));

    const decoders::Variant variant =
        opt.variant.empty() ? cfg.trainSection.variant : decoders::variant_from_name(opt.variant);
    const auto& dcfg = cfg.trainSection.decoder;

    decoders::PooledStore store;
    store.cfg = dcfg;
    store.tokens.reserve(static_cast<size_t>(reader.count()) * store.tokens_stride());
    for (int64_t i = 0; i < reader.count(); ++i) {
        const auto obs = reader.read(i);
        store.append(decoders::prepare_obs(obs, obs.segs, dcfg));
    }

    std::map<int, const expert::TrajectoryRecord*> byId;
    for (const auto& t : trajFile.trajectories) byId[t.trajectoryId] = &t;
    std::vector<decoders::PairSample> pairs;
    pairs.reserve(manifest.samples.size());
    for (const auto& s : manifest.samples) {
        const auto it = byId.find(s.trajectoryId);
        if (it == byId.end()) throw Error("train: dataset references a missing trajectory");
        const auto& steps = it->second->steps;
        const int64_t cur = steps[static_cast<size_t>(s.t - 1)].obsIndex;
        const int64_t goal = steps[static_cast<size_t>(s.tprime - 1)].obsIndex;
        if (cur < 0 || goal < 0 || cur >= reader.count() || goal >= reader.count())
            throw Error("train: dataset references an unrendered observation");
        pairs.push_back({cur, goal, s.label});
    }

    const std::string vname = decoders::variant_name(variant);
    decoders::DecoderParams params;
    params.variant = variant;
    params.cfg = dcfg;
    params.allocate();
    Rng initRng(derive_seed(cfg.seed, "init:" + vname));
    params.init(initRng);

    decoders::DecoderTrainer trainer(params, store, std::move(pairs));
    nn::TrainHyper hyper = cfg.trainSection.hyper;
    hyper.seed = derive_seed(cfg.seed, "train:" + vname);
    const auto result = nn::train_epochs(trainer, hyper);

    fs::create_directories(outDir);
    TrainOutcome res;
    res.epochLoss = result.epochLoss;
    res.sampleCount = manifest.samples.size();
    res.checkpointPath = outDir + "/checkpoint-" + vname + ".bin";
    res.lossCurvePath = outDir + "/losscurve-" + vname + ".csv";
    io::save_checkpoint(res.checkpointPath, params, hash, cfg.seed);
    {
        std::string csv = "epoch,loss\n";
        char buf[64];
        for (size_t e = 0; e < result.epochLoss.size(); ++e) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, result.epochLoss[e]);
            csv += buf;
        }
        io::write_text_file(res.lossCurvePath, csv);
    }
    note_artifacts(outDir, hash,
                   {{"checkpoint:" + vname, "checkpoint-" + vname + ".bin"},
                    {"losscurve:" + vname, "losscurve-" + vname + ".csv"}});

    out << "trained the " << vname << " decoder on " << res.sampleCount << " pairs: loss "
        << result.epochLoss.front() << " -> " << result.epochLoss.back() << " over "
        << result.epochLoss.size() << " epochs\n";
    return res;
}

RolloutOutcome cmd_rollout(const config::RunConfig& cfg, const std::string& outDir,
                           const RolloutOptions& opt, std::ostream& out) {
    cfg.validate();
    const uint64_t hash = config::config_hash(cfg);
    const std::string gridName = opt.gridName.empty() ? cfg.rolloutSection.grid : opt.gridName;
    const auto grid = config::grid_by_name(gridName);
    const auto starts = world::enumerate_start_poses(grid, cfg.worldSection.objectPose);
    const auto goal = config::goal_pose(cfg);

    rollout::RolloutConfig rcfg = cfg.rolloutSection.cfg;
    rcfg.auxStopEnabled = opt.auxStop;
    if (opt.auxStop) {
        if (opt.datasetPath.empty())
            throw Error("rollout: the aux stop rule needs a dataset manifest for its thresholds");
        rcfg.auxThresholds = io::load_dataset_manifest(opt.datasetPath).auxThresholds;
    }
    rcfg.validate();

    std::vector<int> instances;
    if (opt.instanceSet == "seen") {
        instances = {-1};
    } else if (opt.instanceSet == "unseen") {
        const int n = static_cast<int>(cfg.worldSection.object.heldOutAppearanceSeeds.size());
        for (int i = 0; i < n; ++i) instances.push_back(i);
    } else {
        throw Error("rollout: instance set must be 'seen' or 'unseen'");
    }

    std::unique_ptr<io::Checkpoint> ck;
    std::string policyLabel;
    if (opt.policy == "expert-oracle") {
        policyLabel = "expert-oracle";
    } else if (opt.policy == "learned") {
        if (opt.checkpointPath.empty()) throw Error("rollout: the learned policy needs a checkpoint");
        ck = std::make_unique<io::Checkpoint>(io::load_checkpoint(opt.checkpointPath));
        const auto& rig = cfg.sensorSection.cfg.rig;
        if (ck->params.cfg.featureDim != rig.featureDim ||
            ck->params.cfg.viewCount != static_cast<int>(rig.views.size()))
            throw Error("rollout: checkpoint decoder does not match the sensor rig");
        policyLabel = decoders::variant_name(ck->params.variant);
    } else {
        throw Error("rollout: unknown policy '" + opt.policy + "' (expected learned or expert-oracle)");
    }

    struct InstanceCtx {
        rollout::RolloutWorld world;
        sensor::ObservationSet goalObs;
        std::unique_ptr<rollout::Policy> policy;
    };
    std::vector<InstanceCtx> ctxs;
    ctxs.reserve(instances.size());
    for (int idx : instances) {
        InstanceCtx c;
        c.world.scene = config::make_scene(cfg, idx);
        c.world.kin = cfg.worldSection.kinematics;
        c.world.sensorCfg = cfg.sensorSection.cfg;
        c.world.segNoise = cfg.sensorSection.segNoise;
        c.world.targetId = c.world.scene.target.instance.instanceId;
        c.goalObs = goal_observation(cfg, c.world.scene);
        if (ck) {
            c.policy = std::make_unique<rollout::LearnedPolicy>(
                ck->params, decoders::prepare_obs(c.goalObs, c.goalObs.segs, ck->params.cfg));
        } else {
            c.policy = std::make_unique<rollout::ExpertOraclePolicy>(goal, cfg.dataSection.expert);
        }
        ctxs.push_back(std::move(c));
    }

    RolloutOutcome res;
    io::RolloutLogFile file;
    file.configHash = hash;
    file.seed = cfg.seed;
    file.instanceSet = opt.instanceSet;
    file.auxStop = opt.auxStop;
    file.logs.reserve(starts.size());
    for (size_t i = 0; i < starts.size(); ++i) {
        auto& c = ctxs[i % ctxs.size()];
        const uint64_t seed = derive_seed(
            cfg.seed, {fnv1a64("rollout"), fnv1a64(gridName), fnv1a64(opt.instanceSet), static_cast<uint64_t>(i)});
        Rng rng(seed);
        auto log = rollout::run_rollout(*c.policy, c.world, starts[i], c.goalObs, rcfg, rng);
        log.startIndex = static_cast<int>(i);
        log.gridName = gridName;
        log.seed = seed;
        switch (log.termination) {
            case rollout::Termination::StopAction: ++res.stopAction; break;
            case rollout::Termination::AuxStop: ++res.auxStop; break;
            case rollout::Termination::MaxSteps: ++res.maxSteps; break;
        }
        file.logs.push_back(std::move(log));
    }
    res.rollouts = static_cast<int>(file.logs.size());

    fs::create_directories(outDir);
    const std::string tag =
        policyLabel + "-" + opt.instanceSet + "-" + gridName + (opt.auxStop ? "-aux" : "-noaux");
    res.logPath = outDir + "/rollouts-" + tag + ".jsonl";
    io::save_rollout_logs(res.logPath, file);
    note_artifacts(outDir, hash, {{"rollouts:" + tag, "rollouts-" + tag + ".jsonl"}});

    out << res.rollouts << " rollouts (" << policyLabel << ", " << opt.instanceSet << ", '" << gridName
        << "' grid): " << res.stopAction << " stop-action, " << res.auxStop << " aux-stop, "
        << res.maxSteps << " max-steps\n";
    return res;
}

EvalOutcome cmd_eval(const config::RunConfig& cfg, const std::string& outDir, const EvalOptions& opt,
                     std::ostream& out) {
    cfg.validate();
    if (opt.logPaths.empty()) throw Error("eval: at least one rollout log is required");
    if (opt.datasetPath.empty())
        throw Error("eval: the dataset manifest is required (it carries the CoM radius)");
    const uint64_t hash = config::config_hash(cfg);
    const auto manifest = io::load_dataset_manifest(opt.datasetPath);
    if (!opt.force && manifest.configHash != hash)
        throw Error("eval: dataset config hash mismatch (pass --force to evaluate anyway)");

    std::vector<rollout::RolloutLog> logs;
    for (const auto& path : opt.logPaths) {
        auto f = io::load_rollout_logs(path);
        if (!opt.force && f.configHash != hash)
            throw Error("eval: rollout log '" + path + "' config hash mismatch (pass --force to evaluate anyway)");
        for (auto& l : f.logs) logs.push_back(std::move(l));
    }

    EvalOutcome res;
    res.report = metrics::aggregate(logs, manifest.auxThresholds.comRadius, cfg.evalSection.thresholds);

    fs::create_directories(outDir);
    const std::string stem = "report-" + log_stem(opt.logPaths.front());
    res.reportJsonPath = outDir + "/" + stem + ".json";
    res.reportCsvPath = outDir + "/" + stem + ".csv";
    res.reportSvgPath = outDir + "/" + stem + ".svg";
    io::write_text_file(res.reportJsonPath, io::report_to_json(res.report, hash));
    io::write_text_file(res.reportCsvPath, metrics::report_csv(res.report));
    io::write_text_file(res.reportSvgPath, metrics::report_svg(res.report));
    note_artifacts(outDir, hash, {{"report:" + log_stem(opt.logPaths.front()), stem + ".json"}});

    char line[160];
    std::snprintf(line, sizeof line, "edge %.2f%% (%d/%d), object %.2f%% (%d/%d) on the '%s' grid\n",
                  100.0 * res.report.edgeRate, res.report.edgeCount, res.report.total,
                  100.0 * res.report.objectRate, res.report.objectCount, res.report.total,
                  res.report.gridName.c_str());
    out << line;
    return res;
}

void cmd_report(const std::vector<std::string>& reportJsonPaths, std::ostream& out) {
    if (reportJsonPaths.empty()) throw Error("report: at least one report JSON is required");
    for (const auto& path : reportJsonPaths) {
        json j;
        try {
            j = json::parse(io::read_text_file(path));
        } catch (const json::exception& ex) {
            throw Error("report: '" + path + "' is not valid JSON: " + ex.what());
        }
        try {
            char line[256];
            std::snprintf(line, sizeof line, "%s: edge %.2f%% object %.2f%% (n=%d, '%s' grid, CoM radius %.1f)\n",
                          path.c_str(), 100.0 * j.at("rates").at("edge").get<double>(),
                          100.0 * j.at("rates").at("object").get<double>(),
                          j.at("counts").at("total").get<int>(),
                          j.at("grid").get<std::string>().c_str(), j.at("comRadius").get<double>());
            out << line;
        } catch (const json::exception&) {
            throw Error("report: '" + path + "' is missing expected fields");
        }
    }
}

}  // namespace lmnav::pipeline
