#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dgpmp/benchmark.hpp"
#include "dgpmp/output.hpp"
#include "dgpmp/scenario.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kParse = 2,
    kSolve = 3,
    kIo = 4,
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("dgpmp");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("DGPMP_LOG")) {
        spdlog::cfg::helpers::load_levels(env);
    }
}

void print_summary(const dgpmp::RunReport& r) {
    std::cout << dgpmp::report_json(r) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Gaussian-process motion planner with static and dynamic obstacle fields"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    double tick = -1.0;
    double horizon = -1.0;

    auto* plan_cmd = app.add_subcommand("plan", "plan one scenario");
    plan_cmd->add_option("scenario", scenario_path, "scenario file")->required();
    plan_cmd->add_option("-o,--output", out_dir, "output directory")->required();

    auto* replay_cmd = app.add_subcommand("replay", "closed-loop replanning replay");
    replay_cmd->add_option("scenario", scenario_path, "scenario file")->required();
    replay_cmd->add_option("--tick", tick, "replanning period in seconds (default: scenario 'tick')");
    replay_cmd->add_option("--horizon", horizon, "replay duration in seconds (default: scenario 'horizon')");
    replay_cmd->add_option("-o,--output", out_dir, "output directory")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "run every combination in a sweep manifest");
    sweep_cmd->add_option("manifest", scenario_path, "sweep manifest")->required();
    sweep_cmd->add_option("-o,--output", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*plan_cmd) {
            const auto sc = dgpmp::parse_scenario(scenario_path);
            const auto result = dgpmp::run_benchmark(sc, out_dir);
            print_summary(result.report);
            return result.report.solved() ? kOk : kSolve;
        }
        if (*replay_cmd) {
            const auto sc = dgpmp::parse_scenario(scenario_path);
            const double t = tick > 0.0 ? tick : sc.tick;
            const double h = horizon > 0.0 ? horizon : sc.horizon;
            const auto result = dgpmp::run_replay(sc, t, h, out_dir);
            std::cout << "ticks " << result.ticks.size() << "\nmin_distance_m " << result.min_distance
                      << "\nreached_goal " << (result.reached_goal ? "true" : "false") << "\nfinal_goal_distance_m "
                      << result.final_goal_distance << '\n';
            return kOk;
        }
        if (*sweep_cmd) {
            const auto runs = dgpmp::parse_sweep(scenario_path);
            const auto results = dgpmp::run_sweep(runs, out_dir);
            bool all_ok = true;
            for (const auto& r : results) {
                std::cout << r.name << ' ' << dgpmp::to_string(r.report.status) << ' ' << r.report.path_length
                          << '\n';
                all_ok = all_ok && r.report.solved();
            }
            return all_ok ? kOk : kSolve;
        }
    } catch (const dgpmp::ScenarioError& e) {
        spdlog::error("{}", e.what());
        return kParse;
    } catch (const dgpmp::MapFormatError& e) {
        spdlog::error("{}", e.what());
        return kParse;
    } catch (const dgpmp::ReplayError& e) {
        spdlog::error("{}", e.what());
        return kSolve;
    } catch (const dgpmp::OutputError& e) {
        spdlog::error("{}", e.what());
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return kIo;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kSolve;
    }
    return kUsage;
}
