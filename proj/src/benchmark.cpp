#include "dgpmp/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <spdlog/spdlog.h>

#include "dgpmp/output.hpp"

namespace dgpmp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double dense_length(const std::vector<TimedState>& dense) {
    double len = 0.0;
    for (std::size_t i = 1; i < dense.size(); ++i) {
        len += (dense[i].state.position - dense[i - 1].state.position).norm();
    }
    return len;
}

Vec2 course_unit(double course_deg) {
    const double a = course_deg * std::numbers::pi / 180.0;
    return {std::sin(a), std::cos(a)};
}

}  // namespace

CollisionAudit audit_trajectory(const Trajectory& traj, const Mat2& qc, const SdfGrid& sdf,
                                const DynamicField& field) {
    CollisionAudit a;
    a.min_sdf = std::numeric_limits<double>::infinity();
    a.min_clearance = std::numeric_limits<double>::infinity();
    for (const auto& s : densify(traj, qc)) {
        const Vec2& p = s.state.position;
        ++a.states_checked;
        const auto d = try_query_sdf(sdf, p);
        a.min_sdf = std::min(a.min_sdf, d ? d->value : -std::numeric_limits<double>::infinity());
        a.max_dynamic_cost = std::max(a.max_dynamic_cost, field.query(p).cost);
        for (const auto& m : field.models()) {
            a.min_clearance = std::min(a.min_clearance, (p - m.mean).norm());
        }
    }
    a.static_ok = a.min_sdf >= 0.0;
    a.dynamic_ok = a.max_dynamic_cost < std::exp(-0.5);
    return a;
}

World build_world(const Scenario& sc) {
    World w;
    if (sc.map.empty) {
        GridGeometry g;
        g.width = static_cast<int>(std::lround(sc.map.size.x() / sc.map.resolution));
        g.height = static_cast<int>(std::lround(sc.map.size.y() / sc.map.resolution));
        g.resolution = sc.map.resolution;
        g.origin = sc.map.origin;
        if (g.width < 1 || g.height < 1) {
            throw ScenarioError("map size is smaller than one cell");
        }
        w.occupancy = OccupancyGrid::empty(g);
    } else if (sc.map.explicit_geometry) {
        w.occupancy = load_occupancy(sc.map.file, sc.map.resolution, sc.map.origin);
    } else {
        w.occupancy = load_occupancy(sc.map.file);
    }
    const auto& g = w.occupancy.geometry;
    sc.validate_bounds(g.min_corner(), g.max_corner());

    const auto t0 = Clock::now();
    w.sdf = std::make_shared<const SdfGrid>(compute_sdf(w.occupancy));
    w.sdf_ms = ms_since(t0);
    return w;
}

double stern_side(const Vec2& start, const Vec2& goal, const DynamicField& field,
                  std::span<const ObstacleTrack> tracks, std::uint64_t seed) {
    const auto models = field.models();
    if (models.empty()) {
        return 0.0;
    }
    const Vec2 d = goal - start;
    const double len = d.norm();
    if (len == 0.0) {
        return 0.0;
    }
    const Vec2 dir = d / len;
    const Vec2 normal(-dir.y(), dir.x());

    // Passing behind obstacle k means moving along −u_k; weight each vote by
    // how strongly the obstacle covers the straight line and by its speed.
    double vote = 0.0;
    for (std::size_t k = 0; k < models.size() && k < tracks.size(); ++k) {
        const double s = std::clamp((models[k].mean - start).dot(dir), 0.0, len);
        const double w = eval_cost(models[k], start + s * dir).cost;
        vote -= w * tracks[k].speed * course_unit(tracks[k].course).dot(normal);
    }
    if (std::abs(vote) > 1e-9) {
        return vote > 0.0 ? 1.0 : -1.0;
    }
    std::mt19937_64 rng(seed);
    return (rng() & 1U) ? 1.0 : -1.0;
}

Trajectory bent_initialisation(const Vec2& start, const Vec2& goal, const TimeGrid& grid, double amplitude) {
    Trajectory traj = init_straight_line(start, goal, grid);
    const Vec2 d = goal - start;
    if (amplitude == 0.0 || d.norm() == 0.0) {
        return traj;
    }
    const Vec2 normal = Vec2(-d.y(), d.x()) / d.norm();
    const auto times = grid.support_times();
    const double total = grid.total_time();
    for (std::size_t i = 1; i + 1 < traj.states.size(); ++i) {
        traj.states[i].position += amplitude * std::sin(std::numbers::pi * times[i] / total) * normal;
    }
    return traj;
}

PlanResult plan(const Scenario& sc, const World& world, const PlanRequest& req) {
    PlanResult out;
    out.scenario = sc;
    out.sdf = world.sdf;
    auto& rep = out.report;
    rep.name = sc.name;
    rep.times.sdf_ms = world.sdf_ms;

    auto t0 = Clock::now();
    out.field = std::make_shared<const DynamicField>(compose_tracks(req.tracks, sc.safe_area));
    rep.times.dynamic_ms = ms_since(t0);

    t0 = Clock::now();
    const Vec2 start = req.start.position;
    const double total = total_time_from_nominal_speed(start, req.goal, sc.nominal_speed, sc.min_total_time);
    const TimeGrid grid = TimeGrid::uniform(total, sc.segments, sc.interp);
    GraphParams gp;
    gp.start = req.start;
    gp.goal = {req.goal, (req.goal - start) / total};
    gp.prior = sc.prior;
    gp.hinge.epsilon = sc.safety_distance;
    gp.static_sigma = sc.static_weight;
    gp.dynamic_sigma = sc.dynamic_weight;
    const FactorGraph graph = build_graph(gp, world.sdf, out.field, grid);
    rep.times.graph_ms = ms_since(t0);

    double side = 0.0;
    if (!out.field->empty() && sc.init_bias > 0.0) {
        side = stern_side(start, req.goal, *out.field, req.tracks, sc.seed);
    }
    rep.init_bias_sign = side;
    out.initial = bent_initialisation(start, req.goal, grid, side * sc.init_bias);
    out.initial.states.front() = req.start;

    t0 = Clock::now();
    auto lm = lm_optimize(graph, out.initial, sc.lm);
    rep.times.solve_ms = ms_since(t0);

    out.trajectory = std::move(lm.trajectory);
    out.lm = std::move(lm.report);
    rep.iterations = out.lm.iterations;
    rep.status = out.lm.status;
    rep.message = out.lm.message;
    rep.initial_error = out.lm.initial_error;
    rep.final_error = out.lm.final_error;
    rep.total_time = total;
    rep.straight_line = (req.goal - start).norm();
    rep.path_length = dense_length(densify(out.trajectory, sc.prior.qc));
    rep.audit = audit_trajectory(out.trajectory, sc.prior.qc, *world.sdf, *out.field);

    spdlog::debug("plan '{}': {} iterations, status {}, error {:.6g} -> {:.6g}, length {:.3f} m", sc.name,
                  rep.iterations, to_string(rep.status), rep.initial_error, rep.final_error, rep.path_length);
    return out;
}

PlanResult plan(const Scenario& sc, const World& world) {
    PlanRequest req;
    const double total = total_time_from_nominal_speed(sc.start, sc.goal, sc.nominal_speed, sc.min_total_time);
    req.start = {sc.start, (sc.goal - sc.start) / total};
    req.goal = sc.goal;
    req.tracks = sc.obstacles;
    return plan(sc, world, req);
}

PlanResult run_benchmark(const Scenario& sc, const std::filesystem::path& out_dir) {
    const World world = build_world(sc);
    PlanResult result = plan(sc, world);
    if (!result.report.solved()) {
        spdlog::error("solve failed for '{}': {}", sc.name, result.report.message);
    }
    if (!out_dir.empty()) {
        write_plan_outputs(out_dir, result);
    }
    return result;
}

ReplayResult run_replay(const Scenario& sc, double tick, double horizon, const std::filesystem::path& out_dir) {
    if (!(tick > 0.0) || !std::isfinite(tick)) {
        throw std::invalid_argument("replay tick must be positive");
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw std::invalid_argument("replay horizon must be positive");
    }
    const World world = build_world(sc);

    ReplayResult out;
    out.min_distance = std::numeric_limits<double>::infinity();
    for (const auto& t : sc.obstacles) {
        out.safe_radii.push_back(safe_radius(t, sc.safe_area.zeta));
    }

    std::vector<ObstacleTrack> truth = sc.obstacles;
    const double t0_total = total_time_from_nominal_speed(sc.start, sc.goal, sc.nominal_speed, sc.min_total_time);
    TrajectoryState ego{sc.start, (sc.goal - sc.start) / t0_total};

    for (int k = 0;; ++k) {
        ReplayTick rec;
        rec.index = k;
        rec.time = k * tick;
        rec.ego = ego;
        rec.min_distance = std::numeric_limits<double>::infinity();
        for (const auto& t : truth) {
            rec.obstacles.push_back(t.position);
            rec.min_distance = std::min(rec.min_distance, (ego.position - t.position).norm());
        }
        out.min_distance = std::min(out.min_distance, rec.min_distance);
        out.final_goal_distance = (ego.position - sc.goal).norm();

        if (out.final_goal_distance <= sc.goal_tolerance) {
            out.reached_goal = true;
            out.ticks.push_back(std::move(rec));
            break;
        }
        if (rec.time >= horizon - 1e-9) {
            out.ticks.push_back(std::move(rec));
            break;
        }

        PlanRequest req;
        req.start = ego;
        req.goal = sc.goal;
        req.tracks = truth;
        for (std::size_t i = 0; i < req.tracks.size(); ++i) {
            req.tracks[i].speed *= sc.speed_scales.at(i);
        }
        PlanResult p;
        try {
            p = plan(sc, world, req);
        } catch (const std::exception& ex) {
            throw ReplayError(k, ex.what());
        }
        if (!p.report.solved()) {
            throw ReplayError(k, p.report.message);
        }
        rec.report = p.report;
        out.ticks.push_back(std::move(rec));

        ego = state_at(p.trajectory, sc.prior.qc, tick);
        for (auto& t : truth) {
            t.position += t.speed * tick * course_unit(t.course);
        }
    }

    spdlog::info("replay '{}': {} ticks, min distance {:.3f} m, goal {}", sc.name, out.ticks.size(),
                 out.min_distance, out.reached_goal ? "reached" : "not reached");
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_replay_csv(out_dir / "replay.csv", out);
    }
    return out;
}

std::vector<SweepResult> run_sweep(const std::vector<SweepRun>& runs, const std::filesystem::path& out_dir) {
    std::vector<SweepResult> out;
    for (const auto& run : runs) {
        std::string dir_name = run.name;
        for (auto& c : dir_name) {
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_' && c != '=') {
                c = '_';
            }
        }
        Scenario sc = run.scenario;
        if (sc.name.empty()) {
            sc.name = run.name;
        } else {
            sc.name += "/" + run.name;
        }
        SweepResult r;
        r.name = run.name;
        r.directory = out_dir.empty() ? std::filesystem::path() : out_dir / dir_name;
        r.report = run_benchmark(sc, r.directory).report;
        out.push_back(std::move(r));
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_sweep_csv(out_dir / "sweep.csv", out);
    }
    return out;
}

}  // namespace dgpmp
