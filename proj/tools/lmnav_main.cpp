#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "lmnav/pipeline.hpp"

// Exit codes: 0 success, 1 domain failure (I/O, divergence, hash mismatch),
// 2 usage (bad flags, bad config). Config problems carry a "config:" prefix
// on their message, which is what routes them to exit 2.

namespace {

using namespace lmnav;

config::RunConfig load_config(const std::string& path, bool seedSet, uint64_t seedFlag) {
    config::RunConfig cfg;
    if (!path.empty()) {
        if (!io::file_exists(path)) throw Error("config: file not found: " + path);
        cfg = config::config_from_json(io::read_text_file(path));
    }
    if (const char* env = std::getenv("LMNAV_SEED"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 0);
        if (end == env || *end) throw Error("config: LMNAV_SEED is not a number");
        cfg.seed = v;
    }
    if (seedSet) cfg.seed = seedFlag;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"last-meter navigation: expert data, decoder training, rollouts, evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", config::kToolVersion);

    std::string configPath, outDir, datasetPath, checkpointPath, gridName, variant;
    std::string policy = "learned", instanceSet = "seen";
    uint64_t seedFlag = 0;
    bool dryRun = false, printConfig = false, force = false, aux = true;
    std::vector<std::string> logPaths, reportPaths;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", configPath, "JSON config overlay (defaults apply without it)");
        sub->add_option("--out", outDir, "experiment directory")->required();
        sub->add_flag("--print-config", printConfig, "print the effective config as JSON and exit");
        return sub->add_option("--seed", seedFlag, "override the config seed (also: LMNAV_SEED)");
    };

    auto* collect = app.add_subcommand("collect", "run the expert over the start grid and build the dataset");
    auto* collectSeed = add_common(collect);
    collect->add_option("--grid", gridName, "start grid override (training|rollout)");
    collect->add_flag("--dry-run", dryRun, "print the plan without writing anything");

    auto* train = app.add_subcommand("train", "fit a decoder on a collected dataset");
    auto* trainSeed = add_common(train);
    train->add_option("--dataset", datasetPath, "dataset manifest")->required();
    train->add_option("--variant", variant, "decoder variant override (score|attention)");

    auto* rollout = app.add_subcommand("rollout", "run a policy from every start pose");
    auto* rolloutSeed = add_common(rollout);
    rollout->add_option("--policy", policy, "learned|expert-oracle");
    rollout->add_option("--checkpoint", checkpointPath, "decoder checkpoint (learned policy)");
    rollout->add_option("--dataset", datasetPath, "dataset manifest (aux thresholds)");
    rollout->add_option("--instances", instanceSet, "seen|unseen");
    rollout->add_option("--grid", gridName, "start grid override (training|rollout)");
    rollout->add_flag("--aux,!--no-aux", aux, "auxiliary bbox/CoM stop rule (default on)");

    auto* evalCmd = app.add_subcommand("eval", "score rollout logs into a report");
    auto* evalSeed = add_common(evalCmd);
    evalCmd->add_option("--logs", logPaths, "rollout log files (one suite)")->required()->expected(-1);
    evalCmd->add_option("--dataset", datasetPath, "dataset manifest (CoM radius)")->required();
    evalCmd->add_flag("--force", force, "evaluate despite a config hash mismatch");

    auto* reportCmd = app.add_subcommand("report", "summarize report JSON files");
    reportCmd->add_option("files", reportPaths, "report JSON files")->required()->expected(-1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (reportCmd->parsed()) {
            pipeline::cmd_report(reportPaths, std::cout);
            return 0;
        }

        CLI::Option* seedOpt = collect->parsed()   ? collectSeed
                               : train->parsed()   ? trainSeed
                               : rollout->parsed() ? rolloutSeed
                                                   : evalSeed;
        const auto cfg = load_config(configPath, seedOpt->count() > 0, seedFlag);
        if (printConfig) {
            std::cout << config::config_to_json(cfg);
            return 0;
        }

        if (collect->parsed()) {
            pipeline::CollectOptions opt;
            opt.gridName = gridName;
            opt.dryRun = dryRun;
            pipeline::cmd_collect(cfg, outDir, opt, std::cout);
        } else if (train->parsed()) {
            pipeline::TrainOptions opt;
            opt.datasetPath = datasetPath;
            opt.variant = variant;
            pipeline::cmd_train(cfg, outDir, opt, std::cout);
        } else if (rollout->parsed()) {
            pipeline::RolloutOptions opt;
            opt.policy = policy;
            opt.checkpointPath = checkpointPath;
            opt.datasetPath = datasetPath;
            opt.instanceSet = instanceSet;
            opt.gridName = gridName;
            opt.auxStop = aux;
            pipeline::cmd_rollout(cfg, outDir, opt, std::cout);
        } else if (evalCmd->parsed()) {
            pipeline::EvalOptions opt;
            opt.logPaths = logPaths;
            opt.datasetPath = datasetPath;
            opt.force = force;
            pipeline::cmd_eval(cfg, outDir, opt, std::cout);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return std::string_view(e.what()).substr(0, 7) == "config:" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
