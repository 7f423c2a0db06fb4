#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgpmp/dynamic_field.hpp"
#include "dgpmp/factor_graph.hpp"
#include "dgpmp/lm_optimizer.hpp"
#include "dgpmp/scenario.hpp"
#include "dgpmp/static_field.hpp"

namespace dgpmp {

struct StageTimes {
    double sdf_ms = 0.0;
    double dynamic_ms = 0.0;
    double graph_ms = 0.0;
    double solve_ms = 0.0;

    [[nodiscard]] double total_ms() const noexcept { return sdf_ms + dynamic_ms + graph_ms + solve_ms; }
};

// Post-hoc check of a trajectory by direct field evaluation at every support
// and interpolated state.
struct CollisionAudit {
    std::size_t states_checked = 0;
    double min_sdf = 0.0;           // −inf if any state leaves the map
    double max_dynamic_cost = 0.0;
    double min_clearance = 0.0;     // to any obstacle mean; +inf without obstacles
    bool static_ok = true;          // min_sdf >= 0
    bool dynamic_ok = true;         // max_dynamic_cost < e^{-1/2}
};

[[nodiscard]] CollisionAudit audit_trajectory(const Trajectory& traj, const Mat2& qc, const SdfGrid& sdf,
                                              const DynamicField& field);

struct RunReport {
    std::string name;
    double path_length = 0.0;    // along the dense polyline
    double straight_line = 0.0;  // ‖goal − start‖
    double total_time = 0.0;     // trajectory duration, s
    StageTimes times;
    int iterations = 0;
    LmStatus status = LmStatus::Converged;
    std::string message;
    double initial_error = 0.0;
    double final_error = 0.0;
    double init_bias_sign = 0.0;  // side of the initial bend, 0 when unbent
    CollisionAudit audit;

    // Solver produced a usable trajectory.
    [[nodiscard]] bool solved() const noexcept { return status != LmStatus::Singular; }
};

// Static world shared across replans.
struct World {
    OccupancyGrid occupancy;
    std::shared_ptr<const SdfGrid> sdf;
    double sdf_ms = 0.0;
};

// Loads (or synthesises) the map and builds its SDF; checks start and goal
// against the map bounds.
[[nodiscard]] World build_world(const Scenario& scenario);

struct PlanResult {
    Scenario scenario;
    Trajectory initial;
    Trajectory trajectory;
    std::shared_ptr<const SdfGrid> sdf;
    std::shared_ptr<const DynamicField> field;
    LmReport lm;
    RunReport report;
};

// Sign (+1/−1) of the lateral bend added to the straight-line guess so that
// the plan passes behind the obstacles; 0 without obstacles.
[[nodiscard]] double stern_side(const Vec2& start, const Vec2& goal, const DynamicField& field,
                                std::span<const ObstacleTrack> tracks, std::uint64_t seed);

// Straight-line guess plus amplitude·sin(π t / T) along the left normal of
// the start→goal direction (positions only).
[[nodiscard]] Trajectory bent_initialisation(const Vec2& start, const Vec2& goal, const TimeGrid& grid,
                                             double amplitude);

struct PlanRequest {
    TrajectoryState start;
    Vec2 goal = Vec2::Zero();
    std::vector<ObstacleTrack> tracks;
};

// One full pipeline run: dynamic field, graph, LM and audit. The world's
// SDF build time is reported as the SDF stage.
[[nodiscard]] PlanResult plan(const Scenario& scenario, const World& world, const PlanRequest& request);
[[nodiscard]] PlanResult plan(const Scenario& scenario, const World& world);

class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Plans the scenario and writes all run outputs into `out_dir` (skipped when
// empty). Outputs are still written when the solve fails; the report's
// status carries the diagnostic.
[[nodiscard]] PlanResult run_benchmark(const Scenario& scenario, const std::filesystem::path& out_dir);

struct ReplayTick {
    int index = 0;
    double time = 0.0;
    TrajectoryState ego;
    std::vector<Vec2> obstacles;  // true positions at `time`
    double min_distance = 0.0;    // ego to nearest obstacle centre
    RunReport report;             // plan issued at this tick
};

struct ReplayResult {
    std::vector<ReplayTick> ticks;
    std::vector<double> safe_radii;
    bool reached_goal = false;
    double min_distance = 0.0;  // over all ticks
    double final_goal_distance = 0.0;
};

class ReplayError : public std::runtime_error {
public:
    ReplayError(int tick, const std::string& what)
        : std::runtime_error("replan failed at tick " + std::to_string(tick) + ": " + what), tick(tick) {}
    int tick;
};

// Closed loop: obstacles move at their true constant velocity, the ego
// follows the current plan perfectly for one tick, then replans from its
// current state. Planner tracks use speed × speed_scale.
[[nodiscard]] ReplayResult run_replay(const Scenario& scenario, double tick, double horizon,
                                      const std::filesystem::path& out_dir);

struct SweepResult {
    std::string name;
    std::filesystem::path directory;
    RunReport report;
};

[[nodiscard]] std::vector<SweepResult> run_sweep(const std::vector<SweepRun>& runs,
                                                 const std::filesystem::path& out_dir);

}  // namespace dgpmp
