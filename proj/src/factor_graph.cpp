#include "dgpmp/factor_graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace dgpmp {

std::string_view to_string(FactorKind kind) {
    switch (kind) {
        case FactorKind::EndpointPrior: return "endpoint-prior";
        case FactorKind::GpPrior: return "gp-prior";
        case FactorKind::Static: return "static";
        case FactorKind::StaticInterp: return "static-interp";
        case FactorKind::Dynamic: return "dynamic";
        case FactorKind::DynamicInterp: return "dynamic-interp";
    }
    return "unknown";
}

int Factor::dim() const noexcept {
    switch (kind) {
        case FactorKind::EndpointPrior:
            return position_only ? 2 : 4;
        case FactorKind::GpPrior:
            return 4;
        default:
            return 1;
    }
}

void GraphParams::validate() const {
    prior.validate();
    if (!start.is_finite() || !goal.is_finite()) {
        throw std::invalid_argument("start and goal states must be finite");
    }
    if (!(static_sigma > 0) || !(dynamic_sigma > 0)) {
        throw std::invalid_argument("likelihood weights must be positive");
    }
    if (!(hinge.epsilon >= 0)) {
        throw std::invalid_argument("safety distance must be non-negative");
    }
}

FactorGraph::FactorGraph(TimeGrid grid, GraphParams params, std::shared_ptr<const SdfGrid> sdf,
                         std::shared_ptr<const DynamicField> dynamic, std::vector<Factor> factors)
    : grid_(std::move(grid)),
      params_(std::move(params)),
      sdf_(std::move(sdf)),
      dynamic_(std::move(dynamic)),
      factors_(std::move(factors)) {
    if (!sdf_) {
        throw std::invalid_argument("factor graph requires a signed distance field");
    }
    if (!dynamic_) {
        dynamic_ = std::make_shared<const DynamicField>();
    }
}

std::vector<std::pair<std::size_t, int>> FactorGraph::edges() const {
    std::vector<std::pair<std::size_t, int>> out;
    out.reserve(factors_.size() * 2);
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        out.emplace_back(i, factors_[i].first);
        if (factors_[i].is_binary()) {
            out.emplace_back(i, factors_[i].second);
        }
    }
    return out;
}

void FactorGraph::check(const Trajectory& traj) const {
    if (traj.states.size() != num_variables()) {
        throw std::invalid_argument("trajectory has " + std::to_string(traj.states.size()) +
                                    " states, graph expects " + std::to_string(num_variables()));
    }
}

LinearizedFactor FactorGraph::linearize_factor(std::size_t index, const Trajectory& traj) const {
    const Factor& f = factors_.at(index);
    LinearizedFactor lf;
    lf.dim = f.dim();
    lf.first = f.first;
    lf.second = f.second;
    const auto& xi = traj.states.at(static_cast<std::size_t>(f.first));

    auto scalar = [&](const ScalarFactorEval& ev, const Mat4* a, const Mat4* b) {
        const double w = 1.0 / f.sigma;
        lf.residual(0) = w * ev.residual;
        if (a == nullptr) {
            lf.jac_first.row(0) = w * ev.jacobian;
        } else {
            lf.jac_first.row(0) = w * ev.jacobian * (*a);
            lf.jac_second.row(0) = w * ev.jacobian * (*b);
        }
    };

    switch (f.kind) {
        case FactorKind::EndpointPrior: {
            const double w = 1.0 / f.sigma;
            lf.residual = w * (xi.vector() - f.target.vector());
            lf.jac_first = w * Mat4::Identity();
            if (f.position_only) {
                lf.residual.tail<2>().setZero();
                lf.jac_first.bottomRows<2>().setZero();
            }
            break;
        }
        case FactorKind::GpPrior: {
            const auto& xj = traj.states.at(static_cast<std::size_t>(f.second));
            const double dt = grid_.dt(static_cast<std::size_t>(f.first));
            const auto [ja, jb] = gp_prior_jacobians(xi, xj, dt);
            lf.residual = f.whitening * gp_prior_error(xi, xj, dt);
            lf.jac_first = f.whitening * ja;
            lf.jac_second = f.whitening * jb;
            break;
        }
        case FactorKind::Static:
            scalar(static_factor_error(xi, *sdf_, params_.hinge), nullptr, nullptr);
            break;
        case FactorKind::Dynamic:
            scalar(dynamic_factor_error(xi, *dynamic_), nullptr, nullptr);
            break;
        case FactorKind::StaticInterp:
        case FactorKind::DynamicInterp: {
            const auto& xj = traj.states.at(static_cast<std::size_t>(f.second));
            const auto s = TrajectoryState::from_vector(f.interp_first * xi.vector() + f.interp_second * xj.vector());
            const auto ev = f.kind == FactorKind::StaticInterp ? static_factor_error(s, *sdf_, params_.hinge)
                                                                : dynamic_factor_error(s, *dynamic_);
            scalar(ev, &f.interp_first, &f.interp_second);
            break;
        }
    }
    return lf;
}

double FactorGraph::factor_error(std::size_t index, const Trajectory& traj) const {
    const Factor& f = factors_.at(index);
    const auto& xi = traj.states.at(static_cast<std::size_t>(f.first));
    switch (f.kind) {
        case FactorKind::EndpointPrior: {
            const Vec4 e = xi.vector() - f.target.vector();
            const double sq = f.position_only ? e.head<2>().squaredNorm() : e.squaredNorm();
            return 0.5 * sq / (f.sigma * f.sigma);
        }
        case FactorKind::GpPrior: {
            const auto& xj = traj.states.at(static_cast<std::size_t>(f.second));
            const double dt = grid_.dt(static_cast<std::size_t>(f.first));
            return 0.5 * (f.whitening * gp_prior_error(xi, xj, dt)).squaredNorm();
        }
        case FactorKind::Static: {
            const double r = static_factor_error(xi, *sdf_, params_.hinge).residual / f.sigma;
            return 0.5 * r * r;
        }
        case FactorKind::Dynamic: {
            const double r = dynamic_factor_error(xi, *dynamic_).residual / f.sigma;
            return 0.5 * r * r;
        }
        case FactorKind::StaticInterp:
        case FactorKind::DynamicInterp: {
            const auto& xj = traj.states.at(static_cast<std::size_t>(f.second));
            const auto s = TrajectoryState::from_vector(f.interp_first * xi.vector() + f.interp_second * xj.vector());
            const double raw = f.kind == FactorKind::StaticInterp
                                   ? static_factor_error(s, *sdf_, params_.hinge).residual
                                   : dynamic_factor_error(s, *dynamic_).residual;
            const double r = raw / f.sigma;
            return 0.5 * r * r;
        }
    }
    return 0.0;
}

FactorGraph build_graph(const GraphParams& params, std::shared_ptr<const SdfGrid> sdf,
                        std::shared_ptr<const DynamicField> dynamic, const TimeGrid& grid) {
    params.validate();
    if (grid.num_states() < 2) {
        throw std::invalid_argument("build_graph: empty time grid");
    }
    if (!sdf) {
        throw std::invalid_argument("build_graph: missing signed distance field");
    }
    if (!dynamic) {
        dynamic = std::make_shared<const DynamicField>();
    }

    const int n_seg = static_cast<int>(grid.num_segments());
    const int interp = grid.interp_per_segment();
    std::vector<Factor> factors;
    factors.reserve(static_cast<std::size_t>(2 + n_seg + (n_seg + 1) * 2 + n_seg * interp * 2));

    Factor start;
    start.kind = FactorKind::EndpointPrior;
    start.first = 0;
    start.sigma = params.prior.start_fix_sigma;
    start.target = params.start;
    start.position_only = !params.prior.fix_start_velocity;
    factors.push_back(start);

    Factor goal = start;
    goal.first = n_seg;
    goal.sigma = params.prior.goal_fix_sigma;
    goal.target = params.goal;
    goal.position_only = !params.prior.fix_goal_velocity;
    factors.push_back(goal);

    for (int i = 0; i < n_seg; ++i) {
        Factor f;
        f.kind = FactorKind::GpPrior;
        f.first = i;
        f.second = i + 1;
        const Mat4 q = process_noise_cov(grid.dt(static_cast<std::size_t>(i)), params.prior.qc);
        Eigen::LLT<Mat4> llt(q);
        if (llt.info() != Eigen::Success) {
            throw std::runtime_error("GP prior covariance is not positive definite on segment " + std::to_string(i));
        }
        f.whitening = llt.matrixL().solve(Mat4::Identity());
        factors.push_back(f);
    }

    for (int i = 0; i <= n_seg; ++i) {
        Factor f;
        f.kind = FactorKind::Static;
        f.first = i;
        f.sigma = params.static_sigma;
        factors.push_back(f);
        f.kind = FactorKind::Dynamic;
        f.sigma = params.dynamic_sigma;
        factors.push_back(f);
    }

    for (int i = 0; i < n_seg; ++i) {
        const auto seg = static_cast<std::size_t>(i);
        const double t0 = grid.support_times()[seg];
        for (int j = 0; j < interp; ++j) {
            const double tau = grid.interp_time(seg, j);
            const auto m = GpInterpolator::make(grid.dt(seg), tau - t0, params.prior.qc);
            Factor f;
            f.first = i;
            f.second = i + 1;
            f.tau = tau;
            f.interp_first = m.first;
            f.interp_second = m.second;
            f.kind = FactorKind::StaticInterp;
            f.sigma = params.static_sigma;
            factors.push_back(f);
            f.kind = FactorKind::DynamicInterp;
            f.sigma = params.dynamic_sigma;
            factors.push_back(f);
        }
    }

    return FactorGraph(grid, params, std::move(sdf), std::move(dynamic), std::move(factors));
}

double total_error(const FactorGraph& graph, const Trajectory& traj) {
    if (traj.states.size() != graph.num_variables()) {
        throw std::invalid_argument("total_error: trajectory does not match graph");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < graph.factors().size(); ++i) {
        sum += graph.factor_error(i, traj);
    }
    return sum;
}

Eigen::MatrixXd BlockTridiagonal::to_dense() const {
    const auto n = static_cast<Eigen::Index>(4 * blocks());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < blocks(); ++i) {
        const auto o = static_cast<Eigen::Index>(4 * i);
        m.block<4, 4>(o, o) = diag[i];
        if (i < upper.size()) {
            m.block<4, 4>(o, o + 4) = upper[i];
            m.block<4, 4>(o + 4, o) = upper[i].transpose();
        }
    }
    return m;
}

Eigen::VectorXd BlockTridiagonal::multiply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
    for (std::size_t i = 0; i < blocks(); ++i) {
        const auto o = static_cast<Eigen::Index>(4 * i);
        y.segment<4>(o) += diag[i] * x.segment<4>(o);
        if (i < upper.size()) {
            y.segment<4>(o) += upper[i] * x.segment<4>(o + 4);
            y.segment<4>(o + 4) += upper[i].transpose() * x.segment<4>(o);
        }
    }
    return y;
}

std::optional<Eigen::VectorXd> BlockTridiagonal::solve(const Eigen::VectorXd& rhs) const {
    const std::size_t n = blocks();
    if (rhs.size() != static_cast<Eigen::Index>(4 * n)) {
        throw std::invalid_argument("BlockTridiagonal::solve: size mismatch");
    }
    // A = L Lᵀ with L block lower-bidiagonal: L_ii = chol(S_i), L_{i+1,i} = (L_ii⁻¹ U_i)ᵀ.
    std::vector<Eigen::LLT<Mat4>> chol(n);
    std::vector<Mat4> sub(n > 0 ? n - 1 : 0);  // L_{i+1,i}
    Mat4 s = diag.empty() ? Mat4::Zero() : diag[0];
    for (std::size_t i = 0; i < n; ++i) {
        chol[i].compute(s);
        if (chol[i].info() != Eigen::Success) {
            return std::nullopt;
        }
        if (i + 1 < n) {
            const Mat4 w = chol[i].matrixL().solve(upper[i]);
            sub[i] = w.transpose();
            s = diag[i + 1] - w.transpose() * w;
        }
    }
    Eigen::VectorXd y(rhs.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto o = static_cast<Eigen::Index>(4 * i);
        Vec4 r = rhs.segment<4>(o);
        if (i > 0) {
            r -= sub[i - 1] * y.segment<4>(o - 4);
        }
        y.segment<4>(o) = chol[i].matrixL().solve(r);
    }
    Eigen::VectorXd x(rhs.size());
    for (std::size_t k = n; k-- > 0;) {
        const auto o = static_cast<Eigen::Index>(4 * k);
        Vec4 r = y.segment<4>(o);
        if (k + 1 < n) {
            r -= sub[k].transpose() * x.segment<4>(o + 4);
        }
        x.segment<4>(o) = chol[k].matrixU().solve(r);
    }
    if (!x.allFinite()) {
        return std::nullopt;
    }
    return x;
}

NormalSystem linearize(const FactorGraph& graph, const Trajectory& traj) {
    if (traj.states.size() != graph.num_variables()) {
        throw std::invalid_argument("linearize: trajectory does not match graph");
    }
    const std::size_t n = graph.num_variables();
    NormalSystem sys{BlockTridiagonal(n), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(4 * n)), 0.0};
    for (std::size_t k = 0; k < graph.factors().size(); ++k) {
        const auto lf = graph.linearize_factor(k, traj);
        const auto d = lf.dim;
        const auto r = lf.residual.head(d);
        const auto ja = lf.jac_first.topRows(d);
        sys.error += 0.5 * r.squaredNorm();

        const auto i = static_cast<std::size_t>(lf.first);
        sys.hessian.diag[i].noalias() += ja.transpose() * ja;
        sys.gradient.segment<4>(static_cast<Eigen::Index>(4 * i)).noalias() += ja.transpose() * r;
        if (lf.second >= 0) {
            const auto j = static_cast<std::size_t>(lf.second);
            if (j != i + 1) {
                throw std::logic_error("binary factors must couple consecutive states");
            }
            const auto jb = lf.jac_second.topRows(d);
            sys.hessian.diag[j].noalias() += jb.transpose() * jb;
            sys.hessian.upper[i].noalias() += ja.transpose() * jb;
            sys.gradient.segment<4>(static_cast<Eigen::Index>(4 * j)).noalias() += jb.transpose() * r;
        }
    }
    return sys;
}

Eigen::VectorXd stack_states(const Trajectory& traj) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(4 * traj.states.size()));
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        x.segment<4>(static_cast<Eigen::Index>(4 * i)) = traj.states[i].vector();
    }
    return x;
}

void unstack_states(const Eigen::VectorXd& x, Trajectory& traj) {
    if (x.size() != static_cast<Eigen::Index>(4 * traj.states.size())) {
        throw std::invalid_argument("unstack_states: size mismatch");
    }
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        traj.states[i] = TrajectoryState::from_vector(x.segment<4>(static_cast<Eigen::Index>(4 * i)));
    }
}

}  // namespace dgpmp
