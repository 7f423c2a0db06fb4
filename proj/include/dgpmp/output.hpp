#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dgpmp/benchmark.hpp"
#include "dgpmp/grid.hpp"

namespace dgpmp {

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// t,x,y,vx,vy,support at support and interpolated times.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, const Mat2& qc);

// iteration,error,damping,step_norm,wall_time_s
void write_iterations_csv(const std::filesystem::path& path, const LmReport& report);

// "# dgpmp raster v1" and "# geometry W H res ox oy" headers, then H rows of
// W values, top row (largest y) first.
void write_raster(const std::filesystem::path& path, const GridGeometry& geometry, const std::vector<double>& values);

struct Raster {
    GridGeometry geometry;
    std::vector<double> values;
};

[[nodiscard]] Raster read_raster(const std::filesystem::path& path);

// One "x y" pair per line over the dense trajectory.
void write_polyline(const std::filesystem::path& path, const Trajectory& traj, const Mat2& qc);

[[nodiscard]] std::string report_json(const RunReport& report, int indent = 2);
void write_report_json(const std::filesystem::path& path, const RunReport& report);

// trajectory.csv, iterations.csv, report.json, field.txt, polyline.txt, and
// sdf.txt for file maps.
void write_plan_outputs(const std::filesystem::path& dir, const PlanResult& result);

// tick,t,ego_x,ego_y,ego_vx,ego_vy,min_distance,iterations,status plus one
// x/y column pair per obstacle.
void write_replay_csv(const std::filesystem::path& path, const ReplayResult& result);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepResult>& results);

}  // namespace dgpmp
