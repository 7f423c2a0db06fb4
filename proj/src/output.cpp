#include "dgpmp/output.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>
#include <json.hpp>

namespace dgpmp {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw OutputError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    std::ofstream out(path);
    if (!out) {
        throw OutputError("cannot open " + path.string() + " for writing");
    }
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw OutputError("write failed: " + path.string());
    }
}

// Shortest round-trip representation keeps files byte-stable across runs.
std::string num(double v) { return fmt::format("{:.17g}", v); }

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, const Mat2& qc) {
    auto out = open_out(path);
    out << "t,x,y,vx,vy,support\n";
    for (const auto& s : densify(traj, qc)) {
        out << num(s.t) << ',' << num(s.state.position.x()) << ',' << num(s.state.position.y()) << ','
            << num(s.state.velocity.x()) << ',' << num(s.state.velocity.y()) << ',' << (s.support ? 1 : 0) << '\n';
    }
    finish(out, path);
}

void write_iterations_csv(const std::filesystem::path& path, const LmReport& report) {
    auto out = open_out(path);
    out << "iteration,error,damping,step_norm,wall_time_s\n";
    for (const auto& r : report.records) {
        out << r.iteration << ',' << num(r.error) << ',' << num(r.lambda) << ',' << num(r.step_norm) << ','
            << fmt::format("{:.6f}", r.wall_time) << '\n';
    }
    finish(out, path);
}

void write_raster(const std::filesystem::path& path, const GridGeometry& g, const std::vector<double>& values) {
    if (values.size() != g.cell_count()) {
        throw OutputError("raster size does not match its geometry");
    }
    auto out = open_out(path);
    out << "# dgpmp raster v1\n";
    out << "# geometry " << g.width << ' ' << g.height << ' ' << num(g.resolution) << ' ' << num(g.origin.x())
        << ' ' << num(g.origin.y()) << '\n';
    std::string line;
    for (int iy = g.height - 1; iy >= 0; --iy) {
        line.clear();
        for (int ix = 0; ix < g.width; ++ix) {
            if (ix > 0) {
                line += ' ';
            }
            line += fmt::format("{:.9g}", values[g.index(ix, iy)]);
        }
        out << line << '\n';
    }
    finish(out, path);
}

Raster read_raster(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw OutputError("cannot open " + path.string());
    }
    std::string magic;
    std::getline(in, magic);
    if (magic != "# dgpmp raster v1") {
        throw OutputError(path.string() + ": not a dgpmp raster");
    }
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string hash, word;
    Raster r;
    double ox = 0.0, oy = 0.0;
    if (!(hs >> hash >> word >> r.geometry.width >> r.geometry.height >> r.geometry.resolution >> ox >> oy) ||
        word != "geometry") {
        throw OutputError(path.string() + ": malformed geometry header");
    }
    r.geometry.origin = {ox, oy};
    r.geometry.validate();
    r.values.assign(r.geometry.cell_count(), 0.0);
    for (int iy = r.geometry.height - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < r.geometry.width; ++ix) {
            if (!(in >> r.values[r.geometry.index(ix, iy)])) {
                throw OutputError(path.string() + ": truncated raster");
            }
        }
    }
    return r;
}

void write_polyline(const std::filesystem::path& path, const Trajectory& traj, const Mat2& qc) {
    auto out = open_out(path);
    out << "# x y\n";
    for (const auto& s : densify(traj, qc)) {
        out << num(s.state.position.x()) << ' ' << num(s.state.position.y()) << '\n';
    }
    finish(out, path);
}

std::string report_json(const RunReport& r, int indent) {
    nlohmann::json j;
    j["name"] = r.name;
    j["solved"] = r.solved();
    j["status"] = std::string(to_string(r.status));
    j["message"] = r.message;
    j["path_length_m"] = r.path_length;
    j["straight_line_m"] = r.straight_line;
    j["total_time_s"] = r.total_time;
    j["iterations"] = r.iterations;
    j["initial_error"] = r.initial_error;
    j["final_error"] = r.final_error;
    j["init_bias_sign"] = r.init_bias_sign;
    j["times_ms"] = {{"sdf", r.times.sdf_ms},
                     {"dynamic_field", r.times.dynamic_ms},
                     {"graph", r.times.graph_ms},
                     {"solve", r.times.solve_ms},
                     {"total", r.times.total_ms()}};
    j["audit"] = {{"states_checked", r.audit.states_checked},
                  {"min_sdf_m", finite_or_null(r.audit.min_sdf)},
                  {"max_dynamic_cost", r.audit.max_dynamic_cost},
                  {"min_clearance_m", finite_or_null(r.audit.min_clearance)},
                  {"static_ok", r.audit.static_ok},
                  {"dynamic_ok", r.audit.dynamic_ok}};
    return j.dump(indent);
}

void write_report_json(const std::filesystem::path& path, const RunReport& report) {
    auto out = open_out(path);
    out << report_json(report) << '\n';
    finish(out, path);
}

void write_plan_outputs(const std::filesystem::path& dir, const PlanResult& result) {
    const Mat2& qc = result.scenario.prior.qc;
    write_trajectory_csv(dir / "trajectory.csv", result.trajectory, qc);
    write_iterations_csv(dir / "iterations.csv", result.lm);
    write_polyline(dir / "polyline.txt", result.trajectory, qc);
    const auto& geometry = result.sdf->geometry();
    write_raster(dir / "field.txt", geometry, result.field->rasterize(geometry).values);
    if (!result.scenario.map.empty) {
        write_raster(dir / "sdf.txt", geometry, result.sdf->values());
    }
    write_report_json(dir / "report.json", result.report);
}

void write_replay_csv(const std::filesystem::path& path, const ReplayResult& result) {
    auto out = open_out(path);
    const std::size_t n_obs = result.safe_radii.size();
    out << "tick,t,ego_x,ego_y,ego_vx,ego_vy,min_distance,iterations,status";
    for (std::size_t k = 0; k < n_obs; ++k) {
        out << ",obs" << k << "_x,obs" << k << "_y";
    }
    out << '\n';
    for (const auto& t : result.ticks) {
        out << t.index << ',' << num(t.time) << ',' << num(t.ego.position.x()) << ',' << num(t.ego.position.y())
            << ',' << num(t.ego.velocity.x()) << ',' << num(t.ego.velocity.y()) << ','
            << (std::isfinite(t.min_distance) ? num(t.min_distance) : std::string("inf")) << ','
            << t.report.iterations << ',' << to_string(t.report.status);
        for (const auto& p : t.obstacles) {
            out << ',' << num(p.x()) << ',' << num(p.y());
        }
        out << '\n';
    }
    finish(out, path);
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepResult>& results) {
    auto out = open_out(path);
    out << "run,status,iterations,path_length_m,min_clearance_m,max_dynamic_cost,min_sdf_m,total_ms\n";
    for (const auto& r : results) {
        const auto& a = r.report.audit;
        out << r.name << ',' << to_string(r.report.status) << ',' << r.report.iterations << ','
            << num(r.report.path_length) << ',' << num(a.min_clearance) << ',' << num(a.max_dynamic_cost) << ','
            << num(a.min_sdf) << ',' << fmt::format("{:.3f}", r.report.times.total_ms()) << '\n';
    }
    finish(out, path);
}

}  // namespace dgpmp
