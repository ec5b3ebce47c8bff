#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lmnav/config.hpp"
#include "lmnav/io.hpp"

// The five commands behind the CLI, callable directly (the tests and the
// acceptance suite drive them in-process). Each writes its artifacts into an
// experiment directory and records them in experiment.json there.

namespace lmnav::pipeline {

struct CollectOptions {
    std::string gridName;  // empty: the config's collect grid
    bool dryRun = false;   // print the plan, write nothing
};

struct CollectOutcome {
    std::string datasetPath;
    std::string trajectoriesPath;
    std::string obsStorePath;
    int trajectoryCount = 0;
    int divergences = 0;
    size_t sampleCount = 0;
    double meanLength = 0.0;
    rollout::AuxThresholds auxThresholds;
};

/// Runs the expert over every start pose, renders every step into the
/// observation store, builds the pseudo-goal dataset and derives the aux-stop
/// thresholds from the demonstrations' final frames.
CollectOutcome cmd_collect(const config::RunConfig& cfg, const std::string& outDir,
                           const CollectOptions& opt, std::ostream& out);

struct TrainOptions {
    std::string datasetPath;  // required
    std::string variant;      // empty: the config's variant
};

struct TrainOutcome {
    std::string checkpointPath;
    std::string lossCurvePath;
    std::vector<double> epochLoss;
    size_t sampleCount = 0;
};

TrainOutcome cmd_train(const config::RunConfig& cfg, const std::string& outDir,
                       const TrainOptions& opt, std::ostream& out);

struct RolloutOptions {
    std::string policy = "learned";    // "learned" | "expert-oracle"
    std::string checkpointPath;        // required for the learned policy
    std::string datasetPath;           // required when auxStop (threshold source)
    std::string instanceSet = "seen";  // "seen" | "unseen" (round-robin over held-out instances)
    std::string gridName;              // empty: the config's rollout grid
    bool auxStop = true;
};

struct RolloutOutcome {
    std::string logPath;
    int rollouts = 0;
    int stopAction = 0;
    int auxStop = 0;
    int maxSteps = 0;
};

RolloutOutcome cmd_rollout(const config::RunConfig& cfg, const std::string& outDir,
                           const RolloutOptions& opt, std::ostream& out);

struct EvalOptions {
    std::vector<std::string> logPaths;  // one suite, possibly split across files
    std::string datasetPath;            // required: the CoM radius comes from the aux thresholds
    bool force = false;                 // accept artifacts from a different config hash
};

struct EvalOutcome {
    std::string reportJsonPath;
    std::string reportCsvPath;
    std::string reportSvgPath;
    metrics::MetricReport report;
};

EvalOutcome cmd_eval(const config::RunConfig& cfg, const std::string& outDir,
                     const EvalOptions& opt, std::ostream& out);

/// Prints a one-line summary per report JSON.
void cmd_report(const std::vector<std::string>& reportJsonPaths, std::ostream& out);

/// The goal-pose annotation frame for a scene, rendered with a seed derived
/// from the instance id so every command regenerates the identical frame.
sensor::ObservationSet goal_observation(const config::RunConfig& cfg, const world::Scene& scene);

}  // namespace lmnav::pipeline
