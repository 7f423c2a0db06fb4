#pragma once

#include <utility>
#include <vector>

#include "dgpmp/trajectory.hpp"

namespace dgpmp {

// Constant-velocity (white-noise-on-acceleration) prior settings.
struct GpPriorParams {
    Mat2 qc = Mat2::Identity();  // power-spectral density, (m/s^2)^2 s
    double start_fix_sigma = 1e-4;
    double goal_fix_sigma = 1e-4;
    // Endpoint priors pin the velocity too when set; otherwise only the
    // position is fixed and the endpoint heading is free.
    bool fix_start_velocity = true;
    bool fix_goal_velocity = true;

    // Throws std::invalid_argument when qc is not SPD or a sigma is non-positive.
    void validate() const;
};

// Φ(dt) = [[I, dt I], [0, I]] over (position, velocity).
[[nodiscard]] Mat4 state_transition(double dt);

// Q(dt) = [[dt^3/3 Qc, dt^2/2 Qc], [dt^2/2 Qc, dt Qc]].
[[nodiscard]] Mat4 process_noise_cov(double dt, const Mat2& qc);

// e = θ_{i+1} − Φ(dt) θ_i.
[[nodiscard]] Vec4 gp_prior_error(const TrajectoryState& theta_i, const TrajectoryState& theta_ip1, double dt);

// (∂e/∂θ_i, ∂e/∂θ_{i+1}) = (−Φ(dt), I). The residual is affine, so these are exact.
[[nodiscard]] std::pair<Mat4, Mat4> gp_prior_jacobians(const TrajectoryState& theta_i,
                                                       const TrajectoryState& theta_ip1, double dt);

// Linear map of the GP posterior mean at an off-support time:
//   θ(τ) = first · θ_i + second · θ_{i+1}
// where second = Λ(τ) = Q(τ − t_i) Φ(t_{i+1} − τ)^T Q(Δt)^{-1} and
// first = Φ(τ − t_i) − Λ(τ) Φ(Δt). Both matrices are the state Jacobians.
struct GpInterpolator {
    Mat4 first;
    Mat4 second;

    // Throws when tau is not strictly inside (0, dt).
    static GpInterpolator make(double dt, double tau_offset, const Mat2& qc);

    [[nodiscard]] TrajectoryState apply(const TrajectoryState& theta_i, const TrajectoryState& theta_ip1) const;
};

struct InterpolatedState {
    TrajectoryState state;
    Mat4 jacobian_i;
    Mat4 jacobian_ip1;
};

[[nodiscard]] InterpolatedState gp_interpolate(const TrajectoryState& theta_i, const TrajectoryState& theta_ip1,
                                               double t_i, double t_ip1, double tau, const Mat2& qc);

struct TimedState {
    double t = 0.0;
    TrajectoryState state;
    bool support = true;
};

// Support states interleaved with the GP-interpolated states at every
// interpolated time of the trajectory's grid.
[[nodiscard]] std::vector<TimedState> densify(const Trajectory& traj, const Mat2& qc);

// Posterior-mean state at any t in [0, T]; clamps outside the horizon.
[[nodiscard]] TrajectoryState state_at(const Trajectory& traj, const Mat2& qc, double t);

}  // namespace dgpmp
