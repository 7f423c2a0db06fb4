#include "dgpmp/gp_prior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace dgpmp {

void GpPriorParams::validate() const {
    if (!qc.allFinite() || (qc - qc.transpose()).cwiseAbs().maxCoeff() > 1e-12 * qc.cwiseAbs().maxCoeff()) {
        throw std::invalid_argument("qc must be a finite symmetric matrix");
    }
    Eigen::SelfAdjointEigenSolver<Mat2> eig(qc);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("qc must be positive definite");
    }
    if (!(start_fix_sigma > 0.0) || !(goal_fix_sigma > 0.0)) {
        throw std::invalid_argument("endpoint prior sigmas must be positive");
    }
}

Mat4 state_transition(double dt) {
    if (dt < 0.0 || !std::isfinite(dt)) {
        throw std::invalid_argument("state_transition: dt must be non-negative");
    }
    Mat4 phi = Mat4::Identity();
    phi.topRightCorner<2, 2>() = dt * Mat2::Identity();
    return phi;
}

Mat4 process_noise_cov(double dt, const Mat2& qc) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("process_noise_cov: dt must be positive");
    }
    const double dt2 = dt * dt;
    const double dt3 = dt2 * dt;
    Mat4 q;
    q.topLeftCorner<2, 2>() = (dt3 / 3.0) * qc;
    q.topRightCorner<2, 2>() = (dt2 / 2.0) * qc;
    q.bottomLeftCorner<2, 2>() = (dt2 / 2.0) * qc;
    q.bottomRightCorner<2, 2>() = dt * qc;
    return q;
}

Vec4 gp_prior_error(const TrajectoryState& theta_i, const TrajectoryState& theta_ip1, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("gp_prior_error: dt must be positive");
    }
    // Φ θ_i without forming the matrix
    Vec4 e;
    e.head<2>() = theta_ip1.position - (theta_i.position + dt * theta_i.velocity);
    e.tail<2>() = theta_ip1.velocity - theta_i.velocity;
    return e;
}

std::pair<Mat4, Mat4> gp_prior_jacobians(const TrajectoryState& /*theta_i*/,
                                         const TrajectoryState& /*theta_ip1*/, double dt) {
    return {-state_transition(dt), Mat4::Identity()};
}

GpInterpolator GpInterpolator::make(double dt, double tau_offset, const Mat2& qc) {
    if (!(tau_offset > 0.0) || !(tau_offset < dt)) {
        throw std::invalid_argument("interpolation time must lie strictly inside the segment");
    }
    const Mat4 q_tau = process_noise_cov(tau_offset, qc);
    const Mat4 q_seg = process_noise_cov(dt, qc);
    const Mat4 phi_rest = state_transition(dt - tau_offset);

    // Λ = Q_τ Φ_restᵀ Q_seg⁻¹  ⇔  Q_seg Λᵀ = Φ_rest Q_τ (both Q symmetric)
    Eigen::LLT<Mat4> llt(q_seg);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("segment process-noise covariance is not positive definite");
    }
    const Mat4 lambda = llt.solve(phi_rest * q_tau).transpose();

    GpInterpolator out;
    out.second = lambda;
    out.first = state_transition(tau_offset) - lambda * state_transition(dt);
    return out;
}

TrajectoryState GpInterpolator::apply(const TrajectoryState& theta_i, const TrajectoryState& theta_ip1) const {
    return TrajectoryState::from_vector(first * theta_i.vector() + second * theta_ip1.vector());
}

InterpolatedState gp_interpolate(const TrajectoryState& theta_i, const TrajectoryState& theta_ip1, double t_i,
                                 double t_ip1, double tau, const Mat2& qc) {
    if (!(t_i < tau) || !(tau < t_ip1)) {
        throw std::invalid_argument("gp_interpolate: tau outside the open segment");
    }
    const auto interp = GpInterpolator::make(t_ip1 - t_i, tau - t_i, qc);
    return {interp.apply(theta_i, theta_ip1), interp.first, interp.second};
}

std::vector<TimedState> densify(const Trajectory& traj, const Mat2& qc) {
    const auto& grid = traj.grid;
    if (traj.states.size() != grid.num_states()) {
        throw std::invalid_argument("densify: trajectory does not match its grid");
    }
    std::vector<TimedState> out;
    out.reserve(grid.num_states() + grid.num_segments() * static_cast<std::size_t>(grid.interp_per_segment()));
    const auto times = grid.support_times();
    for (std::size_t i = 0; i < grid.num_states(); ++i) {
        out.push_back({times[i], traj.states[i], true});
        if (i + 1 == grid.num_states()) {
            break;
        }
        for (int j = 0; j < grid.interp_per_segment(); ++j) {
            const double tau = grid.interp_time(i, j);
            const auto m = GpInterpolator::make(grid.dt(i), tau - times[i], qc);
            out.push_back({tau, m.apply(traj.states[i], traj.states[i + 1]), false});
        }
    }
    return out;
}

TrajectoryState state_at(const Trajectory& traj, const Mat2& qc, double t) {
    const auto times = traj.grid.support_times();
    if (times.empty() || traj.states.size() != times.size()) {
        throw std::invalid_argument("state_at: trajectory does not match its grid");
    }
    if (t <= times.front()) {
        return traj.states.front();
    }
    if (t >= times.back()) {
        return traj.states.back();
    }
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto i = static_cast<std::size_t>(std::distance(times.begin(), it)) - 1;
    if (t == times[i]) {
        return traj.states[i];
    }
    return GpInterpolator::make(times[i + 1] - times[i], t - times[i], qc).apply(traj.states[i], traj.states[i + 1]);
}

}  // namespace dgpmp
