#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "dgpmp/benchmark.hpp"
#include "dgpmp/output.hpp"
#include "dgpmp/scenario.hpp"
#include "test_util.hpp"

using namespace dgpmp;
using dgpmp::test::fresh_dir;
using dgpmp::test::scenario_path;
using dgpmp::test::write_text;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kEmpty = "version = 1\nname = empty\nmap = empty 100 100\nstart = 50 10\ngoal = 50 90\nqc = 1e-4\n";

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DGPMP_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RunBenchmarkTest, WritesOutputs) {
    const auto dir = fresh_dir("bench_table3");
    const auto res = run_benchmark(parse_scenario(scenario_path("table3.scn")), dir);
    for (const char* f : {"trajectory.csv", "iterations.csv", "report.json", "field.txt", "polyline.txt"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    }
    EXPECT_FALSE(std::filesystem::exists(dir / "sdf.txt"));
    EXPECT_TRUE(res.report.solved());
    EXPECT_EQ(slurp(dir / "trajectory.csv").substr(0, 22), "t,x,y,vx,vy,support\n0,");
    EXPECT_EQ(slurp(dir / "iterations.csv").substr(0, 44), "iteration,error,damping,step_norm,wall_time_");

    // support + interpolated rows plus the header
    std::ifstream in(dir / "trajectory.csv");
    int lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    EXPECT_EQ(lines, 1 + 21 + 20 * 4);

    const auto raster = read_raster(dir / "field.txt");
    EXPECT_EQ(raster.geometry.width, 100);
    EXPECT_EQ(raster.geometry.height, 100);
    EXPECT_EQ(raster.values.size(), 100u * 100u);
    EXPECT_NEAR(*std::max_element(raster.values.begin(), raster.values.end()), 1.0, 1e-12);
}

TEST(RunBenchmarkTest, Deterministic) {
    const auto sc = parse_scenario(scenario_path("table5.scn"));
    const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
    (void)run_benchmark(sc, a);
    (void)run_benchmark(sc, b);
    EXPECT_EQ(slurp(a / "trajectory.csv"), slurp(b / "trajectory.csv"));
    EXPECT_EQ(slurp(a / "polyline.txt"), slurp(b / "polyline.txt"));
    EXPECT_EQ(slurp(a / "field.txt"), slurp(b / "field.txt"));
}

TEST(RunBenchmarkTest, PathLengthAtLeastStraightLine) {
    for (const char* name : {"table3.scn", "table4.scn", "table5.scn", "table6.scn", "table7.scn", "fig11b.scn"}) {
        const auto res = run_benchmark(parse_scenario(scenario_path(name)), {});
        EXPECT_GE(res.report.path_length, res.report.straight_line - 1e-6) << name;
        EXPECT_GE(res.report.times.sdf_ms, 0.0);
        EXPECT_GE(res.report.times.dynamic_ms, 0.0);
        EXPECT_GE(res.report.times.graph_ms, 0.0);
        EXPECT_GE(res.report.times.solve_ms, 0.0);
        EXPECT_TRUE(res.report.solved()) << name;
    }
}

TEST(RunBenchmarkTest, ObstacleFreeIsStraight) {
    const auto res = run_benchmark(parse_scenario_text(kEmpty), {});
    EXPECT_NEAR(res.report.path_length, 80.0, 1e-6);
    EXPECT_EQ(res.report.init_bias_sign, 0.0);
    EXPECT_TRUE(std::isinf(res.report.audit.min_clearance));
    EXPECT_EQ(res.report.audit.max_dynamic_cost, 0.0);
}

TEST(RunBenchmarkTest, ReportJson) {
    const auto res = run_benchmark(parse_scenario(scenario_path("table3.scn")), {});
    const auto json = report_json(res.report);
    for (const char* key : {"\"path_length_m\"", "\"iterations\"", "\"status\"", "\"audit\"", "\"times_ms\"",
                            "\"solve\""}) {
        EXPECT_NE(json.find(key), std::string::npos) << key;
    }
}

TEST(SternSideTest, TieBreakUsesSeed) {
    // obstacle parked on the line: no lateral motion, the vote is zero
    const std::vector<ObstacleTrack> t{ObstacleTrack::from_size(6, 3, {50, 50}, 0, 0)};
    const auto field = compose_tracks(t, {});
    const double a = stern_side({50, 10}, {50, 90}, field, t, 1);
    EXPECT_TRUE(a == 1.0 || a == -1.0);
    EXPECT_EQ(stern_side({50, 10}, {50, 90}, field, t, 1), a);
    bool both = false;
    for (std::uint64_t s = 2; s < 20 && !both; ++s) {
        both = stern_side({50, 10}, {50, 90}, field, t, s) != a;
    }
    EXPECT_TRUE(both);
    EXPECT_EQ(stern_side({50, 10}, {50, 90}, DynamicField(), {}, 1), 0.0);
}

TEST(SternSideTest, BendsBehindTheObstacle) {
    // ego heads north; obstacle crosses eastward, so its stern is to the west (left)
    const std::vector<ObstacleTrack> t{ObstacleTrack::from_size(6, 3, {50, 50}, 5, 90)};
    const auto field = compose_tracks(t, {});
    EXPECT_EQ(stern_side({50, 10}, {50, 90}, field, t, 1), 1.0);
    const std::vector<ObstacleTrack> w{ObstacleTrack::from_size(6, 3, {50, 50}, 5, 270)};
    EXPECT_EQ(stern_side({50, 10}, {50, 90}, compose_tracks(w, {}), w, 1), -1.0);
}

TEST(BentInitialisationTest, EndpointsAndAmplitude) {
    const auto grid = TimeGrid::uniform(40.0, 20, 0);
    const auto t = bent_initialisation({50, 10}, {50, 90}, grid, 2.0);
    EXPECT_EQ(t.states.front().position, Vec2(50, 10));
    EXPECT_NEAR((t.states.back().position - Vec2(50, 90)).norm(), 0.0, 1e-12);
    // midpoint sits 2 m along the left normal (−x for a northbound line)
    EXPECT_NEAR(t.states[10].position.x(), 48.0, 1e-12);
    EXPECT_NEAR(t.states[10].position.y(), 50.0, 1e-12);
}

TEST(AuditTest, DirectEvaluation) {
    auto g = OccupancyGrid::empty({100, 100, 1.0, Vec2::Zero()});
    g.set(60, 50, true);
    const SdfGrid sdf = compute_sdf(g);
    const std::vector<ObstacleTrack> t{ObstacleTrack::from_size(6, 3, {30, 50}, 0, 0)};
    const auto field = compose_tracks(t, {});
    const auto traj = init_straight_line({10, 50}, {90, 50}, TimeGrid::uniform(40, 8, 1));
    const auto a = audit_trajectory(traj, Mat2::Identity(), sdf, field);
    EXPECT_EQ(a.states_checked, 9u + 8u);
    EXPECT_EQ(a.min_sdf, -1.0);
    EXPECT_FALSE(a.static_ok);
    EXPECT_EQ(a.max_dynamic_cost, 1.0);
    EXPECT_FALSE(a.dynamic_ok);
    EXPECT_EQ(a.min_clearance, 0.0);
}

TEST(ReplayTest, NoObstaclesTracksTheLine) {
    const auto sc = parse_scenario_text(kEmpty);
    const auto res = run_replay(sc, 0.5, 120.0, {});
    EXPECT_TRUE(res.reached_goal);
    for (const auto& t : res.ticks) {
        EXPECT_LT(std::abs(t.ego.position.x() - 50.0), 0.1) << "tick " << t.index;
    }
    EXPECT_LE(res.final_goal_distance, 2.0);
}

TEST(ReplayTest, ObstacleMovingAwayKeepsTheLine) {
    const std::string text = std::string(kEmpty) +
                             "[obstacle]\nposition = 95 40\nspeed = 4\ncourse = 0\nlength = 6\nwidth = 3\n";
    const auto sc = parse_scenario_text(text);
    // direct evaluation: the field along the straight line stays far below
    // the level at which the whitened residual rivals the prior
    const auto field = compose_tracks(sc.obstacles, sc.safe_area);
    double peak = 0.0;
    for (double y = 10; y <= 90; y += 0.5) {
        peak = std::max(peak, field.query({50, y}).cost);
    }
    EXPECT_LT(peak, 1e-4);

    const auto res = run_replay(sc, 0.5, 120.0, {});
    EXPECT_TRUE(res.reached_goal);
    for (const auto& t : res.ticks) {
        EXPECT_LT(std::abs(t.ego.position.x() - 50.0), 0.5) << "tick " << t.index;
    }
}

TEST(ReplayTest, WritesLog) {
    const auto dir = fresh_dir("replay_log");
    const auto res = run_replay(parse_scenario(scenario_path("replay.scn")), 0.5, 120.0, dir);
    const auto csv = slurp(dir / "replay.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "tick,t,ego_x,ego_y,ego_vx,ego_vy,min_distance,iterations,status,obs0_x,obs0_y");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + res.ticks.size());
    EXPECT_THROW((void)run_replay(parse_scenario_text(kEmpty), 0.0, 10.0, {}), std::invalid_argument);
}

TEST(PlotDataTest, EmptyScenarioHasFlatRaster) {
    const auto dir = fresh_dir("plot_empty");
    (void)run_benchmark(parse_scenario_text(kEmpty), dir);
    const auto r = read_raster(dir / "field.txt");
    for (double v : r.values) {
        ASSERT_EQ(v, 0.0);
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "polyline.txt"));
}

TEST(PlotDataTest, TwoObstacleRasterHasTwoLobes) {
    const auto dir = fresh_dir("plot_two");
    (void)run_benchmark(parse_scenario(scenario_path("table7.scn")), dir);
    const auto r = read_raster(dir / "field.txt");
    const auto& g = r.geometry;
    int maxima = 0;
    for (int iy = 1; iy + 1 < g.height; ++iy) {
        for (int ix = 1; ix + 1 < g.width; ++ix) {
            const double v = r.values[g.index(ix, iy)];
            bool is_max = v > 0.5;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if ((dx || dy) && r.values[g.index(ix + dx, iy + dy)] >= v) {
                        is_max = false;
                    }
                }
            }
            maxima += is_max ? 1 : 0;
        }
    }
    EXPECT_EQ(maxima, 2);
}

TEST(PlotDataTest, RasterRoundTrip) {
    const auto dir = fresh_dir("raster_rt");
    const GridGeometry geo{3, 2, 0.5, Vec2(1, -1)};
    const std::vector<double> v{0, 0.25, 1, 1e-9, 0.5, 0.125};
    write_raster(dir / "r.txt", geo, v);
    const auto back = read_raster(dir / "r.txt");
    EXPECT_EQ(back.geometry, geo);
    EXPECT_EQ(back.values, v);
    const auto text = slurp(dir / "r.txt");
    EXPECT_EQ(text.substr(0, text.find('\n')), "# dgpmp raster v1");
}

TEST(SweepRunTest, WritesPerRunDirectories) {
    const auto dir = fresh_dir("sweep_run");
    const auto results = run_sweep(parse_sweep(scenario_path("fig9_weight.sweep")), dir);
    ASSERT_EQ(results.size(), 3u);
    for (const auto& r : results) {
        EXPECT_TRUE(std::filesystem::exists(r.directory / "trajectory.csv")) << r.name;
    }
    const auto csv = slurp(dir / "sweep.csv");
    EXPECT_EQ(static_cast<int>(std::count(csv.begin(), csv.end(), '\n')), 4);
}

TEST(CliTest, ExitCodes) {
    const auto dir = fresh_dir("cli");
    EXPECT_EQ(run_cli("plan " + scenario_path("table3.scn").string() + " -o " + (dir / "ok").string()), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "ok" / "report.json"));
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("plan"), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);

    write_text(dir / "bad.scn", "version = 1\nmap = empty 100 100\nstart = 1 1\ngoal = 2 2\nspeed = 3\n");
    EXPECT_EQ(run_cli("plan " + (dir / "bad.scn").string() + " -o " + (dir / "bad").string()), 2);
    EXPECT_EQ(run_cli("plan " + (dir / "missing.scn").string() + " -o " + (dir / "m").string()), 2);

    write_text(dir / "badmap.scn", "version = 1\nmap = nomap.pgm\nstart = 1 1\ngoal = 2 2\n");
    EXPECT_EQ(run_cli("plan " + (dir / "badmap.scn").string() + " -o " + (dir / "bm").string()), 2);

    // output path blocked by a regular file
    write_text(dir / "blocker", "x");
    EXPECT_EQ(run_cli("plan " + scenario_path("table3.scn").string() + " -o " + (dir / "blocker").string()), 4);

    EXPECT_EQ(run_cli("replay " + scenario_path("replay.scn").string() + " -o " + (dir / "rp").string()), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "rp" / "replay.csv"));
    EXPECT_EQ(run_cli("sweep " + scenario_path("fig9_speed.sweep").string() + " -o " + (dir / "sw").string()), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "sw" / "sweep.csv"));
}
