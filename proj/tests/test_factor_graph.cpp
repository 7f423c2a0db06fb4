#include <gtest/gtest.h>

#include <map>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "dgpmp/factor_graph.hpp"
#include "dgpmp/lm_optimizer.hpp"
#include "test_util.hpp"

using namespace dgpmp;

namespace {

std::shared_ptr<const SdfGrid> empty_sdf(int n = 100) {
    return std::make_shared<const SdfGrid>(compute_sdf(OccupancyGrid::empty({n, n, 1.0, Vec2::Zero()})));
}

std::shared_ptr<const SdfGrid> blocky_sdf() {
    auto g = OccupancyGrid::empty({100, 100, 1.0, Vec2::Zero()});
    for (int y = 40; y < 48; ++y) {
        for (int x = 55; x < 62; ++x) {
            g.set(x, y, true);
        }
    }
    return std::make_shared<const SdfGrid>(compute_sdf(g));
}

std::shared_ptr<const DynamicField> one_obstacle(const Vec2& pos, double speed, double course) {
    const std::vector<ObstacleTrack> t{ObstacleTrack::from_size(6, 3, pos, speed, course)};
    return std::make_shared<const DynamicField>(compose_tracks(t, {}));
}

GraphParams params_for(const Vec2& start, const Vec2& goal, double T) {
    GraphParams p;
    const Vec2 v = (goal - start) / T;
    p.start = {start, v};
    p.goal = {goal, v};
    p.hinge.epsilon = 3.0;
    return p;
}

Trajectory perturbed(Trajectory t, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    for (auto& s : t.states) {
        s.position += Vec2(n(rng), n(rng));
        s.velocity += 0.1 * Vec2(n(rng), n(rng));
    }
    return t;
}

// Whitened residual of factor k as a function of its connected states.
Eigen::VectorXd factor_residual(const FactorGraph& g, std::size_t k, Trajectory traj, const Eigen::VectorXd& x) {
    const auto& f = g.factors()[k];
    traj.states[static_cast<std::size_t>(f.first)] = TrajectoryState::from_vector(x.head<4>());
    if (f.is_binary()) {
        traj.states[static_cast<std::size_t>(f.second)] = TrajectoryState::from_vector(x.tail<4>());
    }
    const auto lf = g.linearize_factor(k, traj);
    return lf.residual.head(lf.dim);
}

}  // namespace

TEST(BuildGraphTest, FactorCounts) {
    const auto p = params_for({20, 20}, {80, 80}, 10);
    EXPECT_EQ(build_graph(p, empty_sdf(), nullptr, TimeGrid::uniform(10, 2, 0)).factors().size(), 10u);
    EXPECT_EQ(build_graph(p, empty_sdf(), nullptr, TimeGrid::uniform(10, 20, 4)).factors().size(), 224u);
    for (int n = 1; n < 12; ++n) {
        for (int m = 0; m < 5; ++m) {
            EXPECT_EQ(build_graph(p, empty_sdf(), nullptr, TimeGrid::uniform(10, n, m)).factors().size(),
                      static_cast<std::size_t>(2 + n + 2 * (n + 1) + 2 * n * m));
        }
    }
}

TEST(BuildGraphTest, Errors) {
    const auto p = params_for({20, 20}, {80, 80}, 10);
    EXPECT_THROW((void)build_graph(p, nullptr, nullptr, TimeGrid::uniform(10, 2, 0)), std::invalid_argument);
    EXPECT_THROW((void)build_graph(p, empty_sdf(), nullptr, TimeGrid()), std::invalid_argument);
    auto bad = p;
    bad.dynamic_sigma = 0.0;
    EXPECT_THROW((void)build_graph(bad, empty_sdf(), nullptr, TimeGrid::uniform(10, 2, 0)), std::invalid_argument);
}

TEST(BuildGraphTest, Structure) {
    const auto grid = TimeGrid::uniform(30, 6, 3);
    const auto g = build_graph(params_for({20, 20}, {80, 80}, 30), empty_sdf(), one_obstacle({50, 50}, 2, 225), grid);
    const int n = 6;
    std::map<int, std::map<FactorKind, int>> touches;
    for (const auto& [k, v] : g.edges()) {
        touches[v][g.factors()[k].kind]++;
        EXPECT_GE(v, 0);
        EXPECT_LE(v, n);
    }
    for (int v = 0; v <= n; ++v) {
        const bool end = v == 0 || v == n;
        EXPECT_EQ(touches[v][FactorKind::EndpointPrior], end ? 1 : 0);
        EXPECT_EQ(touches[v][FactorKind::GpPrior], end ? 1 : 2);
        EXPECT_EQ(touches[v][FactorKind::Static], 1);
        EXPECT_EQ(touches[v][FactorKind::Dynamic], 1);
        EXPECT_EQ(touches[v][FactorKind::StaticInterp], end ? 3 : 6);
        EXPECT_EQ(touches[v][FactorKind::DynamicInterp], end ? 3 : 6);
    }
    for (const auto& f : g.factors()) {
        if (f.is_interpolated()) {
            ASSERT_TRUE(f.is_binary());
            EXPECT_EQ(f.second, f.first + 1);
            const auto t = grid.support_times();
            EXPECT_GT(f.tau, t[static_cast<std::size_t>(f.first)]);
            EXPECT_LT(f.tau, t[static_cast<std::size_t>(f.second)]);
        }
        EXPECT_GT(f.sigma, 0.0);
    }
}

TEST(TotalErrorTest, StraightLineOnEmptyMap) {
    const double T = 42.43;
    const auto grid = TimeGrid::uniform(T, 20, 4);
    const auto g = build_graph(params_for({20, 20}, {80, 80}, T), empty_sdf(), nullptr, grid);
    auto traj = init_straight_line({20, 20}, {80, 80}, grid);
    EXPECT_LT(total_error(g, traj), 1e-9);
    const double base = total_error(g, traj);
    traj.states[7].position += Vec2(1, 0);
    EXPECT_GT(total_error(g, traj), base);
    EXPECT_THROW((void)total_error(g, init_straight_line({0, 0}, {1, 1}, TimeGrid::uniform(1, 3, 0))),
                 std::invalid_argument);
}

TEST(TotalErrorTest, NoObstaclesMeansZeroDynamicError) {
    const auto grid = TimeGrid::uniform(20, 5, 2);
    const auto g = build_graph(params_for({10, 50}, {90, 50}, 20), empty_sdf(), nullptr, grid);
    std::mt19937_64 rng(3);
    const auto traj = perturbed(init_straight_line({10, 50}, {90, 50}, grid), rng, 3.0);
    for (std::size_t k = 0; k < g.factors().size(); ++k) {
        const auto kind = g.factors()[k].kind;
        if (kind == FactorKind::Dynamic || kind == FactorKind::DynamicInterp) {
            EXPECT_EQ(g.factor_error(k, traj), 0.0);
        }
    }
}

TEST(TotalErrorTest, ThreeStateBruteForce) {
    const auto sdf = blocky_sdf();
    const std::vector<ObstacleTrack> tracks{ObstacleTrack::from_size(6, 3, {50, 52}, 4, 200)};
    const auto field = std::make_shared<const DynamicField>(compose_tracks(tracks, {}));
    const std::vector<double> times{0.0, 7.0, 16.0};
    const TimeGrid grid(times, 1);
    auto p = params_for({40, 40}, {70, 55}, 16.0);
    p.prior.qc << 0.5, 0.1, 0.1, 0.8;
    p.static_sigma = 0.07;
    p.dynamic_sigma = 0.02;
    p.prior.start_fix_sigma = 0.3;
    p.prior.goal_fix_sigma = 0.2;
    const auto g = build_graph(p, sdf, field, grid);

    std::mt19937_64 rng(71);
    const auto traj = perturbed(init_straight_line({40, 40}, {70, 55}, grid), rng, 2.0);
    const auto& x = traj.states;

    const auto Q = [&](double h) {
        Mat4 q;
        q << h * h * h / 3 * p.prior.qc, h * h / 2 * p.prior.qc, h * h / 2 * p.prior.qc, h * p.prior.qc;
        return q;
    };
    const auto Phi = [](double h) {
        Mat4 m = Mat4::Identity();
        m(0, 2) = m(1, 3) = h;
        return m;
    };
    const auto hinge = [&](const Vec2& pos) {
        const double d = query_sdf(*sdf, pos).value;
        return d <= 3.0 ? 3.0 - d : 0.0;
    };
    const auto dyn = [&](const Vec2& pos) { return eval_cost(field->models()[0], pos).cost; };

    double expected = 0.0;
    expected += 0.5 * (x[0].vector() - p.start.vector()).squaredNorm() / (0.3 * 0.3);
    expected += 0.5 * (x[2].vector() - p.goal.vector()).squaredNorm() / (0.2 * 0.2);
    for (int i = 0; i < 2; ++i) {
        const double dt = times[i + 1] - times[i];
        const Vec4 e = x[i + 1].vector() - Phi(dt) * x[i].vector();
        expected += 0.5 * e.dot(Q(dt).inverse() * e);

        const double tau = 0.5 * dt;
        const Mat4 lambda = Q(tau) * Phi(dt - tau).transpose() * Q(dt).inverse();
        const Vec4 mid = Phi(tau) * x[i].vector() + lambda * e;
        const double hs = hinge(mid.head<2>()) / 0.07, hd = dyn(mid.head<2>()) / 0.02;
        expected += 0.5 * (hs * hs + hd * hd);
    }
    for (int i = 0; i < 3; ++i) {
        const double hs = hinge(x[i].position) / 0.07, hd = dyn(x[i].position) / 0.02;
        expected += 0.5 * (hs * hs + hd * hd);
    }
    EXPECT_NEAR(total_error(g, traj), expected, 1e-9 * expected);
    EXPECT_GT(expected, 1.0);
}

TEST(LinearizeTest, MatchesDenseAssembly) {
    std::mt19937_64 rng(73);
    const auto sdf = blocky_sdf();
    for (int trial = 0; trial < 20; ++trial) {
        const auto grid = TimeGrid::uniform(12.0, 4, trial % 4);
        auto p = params_for({45, 35}, {70, 50}, 12.0);
        p.prior.fix_goal_velocity = trial % 2 == 0;
        const auto g = build_graph(p, sdf, one_obstacle({55, 45}, 3, 300), grid);
        const auto traj = perturbed(init_straight_line({45, 35}, {70, 50}, grid), rng, 4.0);

        const auto n = static_cast<Eigen::Index>(4 * grid.num_states());
        std::vector<Eigen::RowVectorXd> rows;
        std::vector<double> res;
        for (std::size_t k = 0; k < g.factors().size(); ++k) {
            const auto lf = g.linearize_factor(k, traj);
            for (int r = 0; r < lf.dim; ++r) {
                Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
                row.segment<4>(4 * lf.first) = lf.jac_first.row(r);
                if (lf.second >= 0) {
                    row.segment<4>(4 * lf.second) = lf.jac_second.row(r);
                }
                rows.push_back(row);
                res.push_back(lf.residual(r));
            }
        }
        Eigen::MatrixXd J(static_cast<Eigen::Index>(rows.size()), n);
        Eigen::VectorXd r(static_cast<Eigen::Index>(res.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            J.row(static_cast<Eigen::Index>(i)) = rows[i];
            r(static_cast<Eigen::Index>(i)) = res[i];
        }
        const auto sys = linearize(g, traj);
        const Eigen::MatrixXd H = J.transpose() * J;
        const Eigen::VectorXd b = J.transpose() * r;
        EXPECT_LE((sys.hessian.to_dense() - H).norm(), 1e-12 * H.norm());
        EXPECT_LE((sys.gradient - b).norm(), 1e-12 * std::max(1.0, b.norm()));
        EXPECT_NEAR(sys.error, 0.5 * r.squaredNorm(), 1e-12 * sys.error);
        EXPECT_NEAR(sys.error, total_error(g, traj), 1e-9 * sys.error);
    }
}

TEST(LinearizeTest, BlockBandwidthOne) {
    const auto grid = TimeGrid::uniform(20, 8, 4);
    const auto g = build_graph(params_for({10, 50}, {90, 50}, 20), empty_sdf(), nullptr, grid);
    std::mt19937_64 rng(79);
    const auto traj = perturbed(init_straight_line({10, 50}, {90, 50}, grid), rng, 1.0);
    const Eigen::MatrixXd H = linearize(g, traj).hessian.to_dense();
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        for (Eigen::Index j = 0; j < H.cols(); ++j) {
            if (std::abs(i / 4 - j / 4) > 1) {
                EXPECT_EQ(H(i, j), 0.0);
            }
        }
    }
}

TEST(LinearizeTest, ZeroResidualHasZeroGradient) {
    const auto grid = TimeGrid::uniform(20, 8, 4);
    const auto g = build_graph(params_for({10, 50}, {90, 50}, 20), empty_sdf(), nullptr, grid);
    const auto sys = linearize(g, init_straight_line({10, 50}, {90, 50}, grid));
    EXPECT_LT(sys.gradient.norm(), 1e-9);
}

TEST(FactorJacobianTest, AllKindsMatchFiniteDifferences) {
    const auto sdf = blocky_sdf();
    const auto grid = TimeGrid::uniform(20.0, 5, 3);
    auto p = params_for({40, 35}, {75, 55}, 20.0);
    p.prior.qc = 1e-2 * Mat2::Identity();
    const auto g = build_graph(p, sdf, one_obstacle({55, 50}, 4, 250), grid);
    std::mt19937_64 rng(83);
    std::map<FactorKind, int> checked;
    for (int trial = 0; trial < 40; ++trial) {
        const auto traj = perturbed(init_straight_line({40, 35}, {75, 55}, grid), rng, 6.0);
        for (std::size_t k = 0; k < g.factors().size(); ++k) {
            const auto& f = g.factors()[k];
            Eigen::VectorXd x(f.is_binary() ? 8 : 4);
            x.head<4>() = traj.states[static_cast<std::size_t>(f.first)].vector();
            if (f.is_binary()) {
                x.tail<4>() = traj.states[static_cast<std::size_t>(f.second)].vector();
            }
            if (f.kind == FactorKind::Static || f.kind == FactorKind::StaticInterp) {
                Vec4 s = x.head<4>();
                if (f.is_binary()) {
                    s = f.interp_first * x.head<4>() + f.interp_second * x.tail<4>();
                }
                // skip the hinge kink and bilinear patch edges
                const double d = query_sdf(*sdf, s.head<2>()).value;
                const Vec2 c = sdf->geometry().to_cell(s.head<2>());
                if (std::abs(d - 3.0) < 1e-3 || (c - c.array().round().matrix()).cwiseAbs().minCoeff() < 1e-3) {
                    continue;
                }
            }
            const auto fn = [&](const Eigen::VectorXd& v) { return factor_residual(g, k, traj, v); };
            const Eigen::MatrixXd fd = dgpmp::test::numeric_jacobian(fn, x);
            const auto lf = g.linearize_factor(k, traj);
            Eigen::MatrixXd an(lf.dim, x.size());
            an.leftCols(4) = lf.jac_first.topRows(lf.dim);
            if (f.is_binary()) {
                an.rightCols(4) = lf.jac_second.topRows(lf.dim);
            }
            EXPECT_LT(dgpmp::test::rel_err(an, fd), 1e-5) << to_string(f.kind) << " factor " << k;
            checked[f.kind]++;
        }
    }
    for (auto kind : {FactorKind::EndpointPrior, FactorKind::GpPrior, FactorKind::Static, FactorKind::StaticInterp,
                      FactorKind::Dynamic, FactorKind::DynamicInterp}) {
        EXPECT_GT(checked[kind], 50) << to_string(kind);
    }
}

TEST(BlockTridiagonalTest, SolveMatchesDense) {
    std::mt19937_64 rng(89);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t blocks : {1u, 2u, 5u, 21u}) {
        // SPD by construction: Aᵀ A of a random block-bidiagonal A, plus a ridge
        BlockTridiagonal t(blocks);
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4 * blocks, 4 * blocks);
        for (std::size_t i = 0; i < blocks; ++i) {
            for (int r = 0; r < 4; ++r) {
                for (int c = 0; c < 4; ++c) {
                    A(4 * i + r, 4 * i + c) = n(rng);
                    if (i + 1 < blocks) {
                        A(4 * i + r, 4 * i + 4 + c) = n(rng);
                    }
                }
            }
        }
        const Eigen::MatrixXd M = A.transpose() * A + 0.1 * Eigen::MatrixXd::Identity(4 * blocks, 4 * blocks);
        for (std::size_t i = 0; i < blocks; ++i) {
            t.diag[i] = M.block<4, 4>(4 * i, 4 * i);
            if (i + 1 < blocks) {
                t.upper[i] = M.block<4, 4>(4 * i, 4 * i + 4);
            }
        }
        ASSERT_LE((t.to_dense() - M).norm(), 1e-12 * M.norm());
        Eigen::VectorXd rhs(4 * blocks);
        for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs[i] = n(rng);
        const auto x = t.solve(rhs);
        ASSERT_TRUE(x.has_value());
        const Eigen::VectorXd ref = M.ldlt().solve(rhs);
        EXPECT_LE((*x - ref).norm(), 1e-8 * std::max(1.0, ref.norm()));
        EXPECT_LE((t.multiply(*x) - rhs).norm(), 1e-8 * std::max(1.0, rhs.norm()));
    }
}

TEST(BlockTridiagonalTest, IndefiniteReturnsNothing) {
    BlockTridiagonal t(3);
    for (auto& d : t.diag) d = Mat4::Identity();
    t.diag[1](2, 2) = -1.0;
    EXPECT_FALSE(t.solve(Eigen::VectorXd::Ones(12)).has_value());
    EXPECT_THROW((void)t.solve(Eigen::VectorXd::Ones(5)), std::invalid_argument);
}

TEST(LmTest, ObstacleFreeConvergesImmediately) {
    const auto grid = TimeGrid::uniform(42.43, 20, 4);
    const auto g = build_graph(params_for({20, 20}, {80, 80}, 42.43), empty_sdf(), nullptr, grid);
    const auto init = init_straight_line({20, 20}, {80, 80}, grid);
    const auto res = lm_optimize(g, init);
    EXPECT_LE(res.report.iterations, 2);
    EXPECT_LT(res.report.final_error, 1e-9);
    EXPECT_EQ(res.report.status, LmStatus::Converged);
    for (std::size_t i = 0; i < init.size(); ++i) {
        EXPECT_LT((res.trajectory.states[i].position - init.states[i].position).norm(), 1e-6);
    }
}

TEST(LmTest, PriorOnlyRecoversStraightLine) {
    const auto grid = TimeGrid::uniform(20.0, 10, 2);
    const auto g = build_graph(params_for({50, 10}, {50, 90}, 20.0), empty_sdf(), nullptr, grid);
    std::mt19937_64 rng(97);
    const auto line = init_straight_line({50, 10}, {50, 90}, grid);
    const auto res = lm_optimize(g, perturbed(line, rng, 3.0));
    EXPECT_NE(res.report.status, LmStatus::Singular);
    for (std::size_t i = 0; i < line.size(); ++i) {
        EXPECT_LT((res.trajectory.states[i].position - line.states[i].position).norm(), 1e-6);
    }
}

TEST(LmTest, AcceptedErrorsStrictlyDecrease) {
    const auto grid = TimeGrid::uniform(42.43, 20, 4);
    auto p = params_for({20, 20}, {80, 80}, 42.43);
    p.prior.qc = 1e-4 * Mat2::Identity();
    const auto g = build_graph(p, blocky_sdf(), one_obstacle({50, 50}, 2, 225), grid);
    auto init = init_straight_line({20, 20}, {80, 80}, grid);
    for (std::size_t i = 1; i + 1 < init.size(); ++i) {
        init.states[i].position += Vec2(-0.5, 0.5);
    }
    const auto res = lm_optimize(g, init);
    ASSERT_FALSE(res.report.records.empty());
    double prev = res.report.initial_error;
    for (const auto& r : res.report.records) {
        EXPECT_LT(r.error, prev);
        EXPECT_GE(r.wall_time, 0.0);
        prev = r.error;
    }
    EXPECT_EQ(res.report.final_error, prev);
    EXPECT_NEAR(total_error(g, res.trajectory), res.report.final_error, 1e-12 * prev);
}

TEST(LmTest, GaussNewtonSolvesAffineProblemInOneStep) {
    const auto grid = TimeGrid::uniform(10.0, 6, 0);
    const auto g = build_graph(params_for({0, 0}, {30, 40}, 10.0), empty_sdf(), nullptr, grid);
    std::mt19937_64 rng(101);
    LmSettings s;
    s.gauss_newton = true;
    const auto res = lm_optimize(g, perturbed(init_straight_line({0, 0}, {30, 40}, grid), rng, 2.0), s);
    ASSERT_GE(res.report.records.size(), 1u);
    EXPECT_LT(res.report.records.front().error, 1e-9);
}

TEST(LmTest, SettingsValidation) {
    LmSettings s;
    s.lambda_up = 1.0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = {};
    s.lambda_down = 1.0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = {};
    s.max_iterations = 0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    const auto grid = TimeGrid::uniform(10.0, 2, 0);
    const auto g = build_graph(params_for({0, 0}, {3, 4}, 10.0), empty_sdf(), nullptr, grid);
    auto bad = init_straight_line({0, 0}, {3, 4}, grid);
    bad.states[1].position.x() = std::nan("");
    EXPECT_THROW((void)lm_optimize(g, bad), std::invalid_argument);
}
