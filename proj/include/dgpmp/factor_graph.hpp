#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dgpmp/dynamic_field.hpp"
#include "dgpmp/gp_prior.hpp"
#include "dgpmp/static_field.hpp"
#include "dgpmp/trajectory.hpp"

namespace dgpmp {

enum class FactorKind {
    EndpointPrior,
    GpPrior,
    Static,
    StaticInterp,
    Dynamic,
    DynamicInterp,
};

[[nodiscard]] std::string_view to_string(FactorKind kind);

struct Factor {
    FactorKind kind = FactorKind::EndpointPrior;
    int first = 0;
    int second = -1;  // -1 for unary factors
    double sigma = 1.0;  // isotropic σ; GP priors carry `whitening` instead
    double tau = 0.0;    // absolute time of an interpolated factor
    bool position_only = false;  // endpoint prior on position alone

    TrajectoryState target;          // endpoint prior mean
    Mat4 whitening = Mat4::Identity();  // L⁻¹ with Q = L Lᵀ (GP prior)
    Mat4 interp_first = Mat4::Zero();   // ∂θ(τ)/∂θ_i
    Mat4 interp_second = Mat4::Zero();  // ∂θ(τ)/∂θ_{i+1}

    [[nodiscard]] int dim() const noexcept;
    [[nodiscard]] bool is_binary() const noexcept { return second >= 0; }
    [[nodiscard]] bool is_interpolated() const noexcept {
        return kind == FactorKind::StaticInterp || kind == FactorKind::DynamicInterp;
    }
};

// Whitened residual and Jacobian blocks of one factor; only the first dim rows
// are meaningful.
struct LinearizedFactor {
    int dim = 0;
    int first = 0;
    int second = -1;
    Vec4 residual = Vec4::Zero();
    Mat4 jac_first = Mat4::Zero();
    Mat4 jac_second = Mat4::Zero();
};

struct GraphParams {
    TrajectoryState start;
    TrajectoryState goal;
    GpPriorParams prior;
    HingeParams hinge;
    double static_sigma = 0.05;
    double dynamic_sigma = 0.005;

    void validate() const;
};

// Bipartite graph of trajectory variables and factors. Obstacle fields are
// shared read-only.
class FactorGraph {
public:
    FactorGraph(TimeGrid grid, GraphParams params, std::shared_ptr<const SdfGrid> sdf,
                std::shared_ptr<const DynamicField> dynamic, std::vector<Factor> factors);

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const GraphParams& params() const noexcept { return params_; }
    [[nodiscard]] const SdfGrid& sdf() const noexcept { return *sdf_; }
    [[nodiscard]] const DynamicField& dynamic_field() const noexcept { return *dynamic_; }
    [[nodiscard]] std::size_t num_variables() const noexcept { return grid_.num_states(); }
    [[nodiscard]] std::span<const Factor> factors() const noexcept { return factors_; }

    // (factor index, variable index) pairs.
    [[nodiscard]] std::vector<std::pair<std::size_t, int>> edges() const;

    [[nodiscard]] LinearizedFactor linearize_factor(std::size_t index, const Trajectory& traj) const;
    // ½‖whitened residual‖².
    [[nodiscard]] double factor_error(std::size_t index, const Trajectory& traj) const;

private:
    void check(const Trajectory& traj) const;

    TimeGrid grid_;
    GraphParams params_;
    std::shared_ptr<const SdfGrid> sdf_;
    std::shared_ptr<const DynamicField> dynamic_;
    std::vector<Factor> factors_;
};

// Endpoint priors at 0 and N, one GP prior per segment, static and dynamic
// factors at every support state and at every interpolated time.
[[nodiscard]] FactorGraph build_graph(const GraphParams& params, std::shared_ptr<const SdfGrid> sdf,
                                      std::shared_ptr<const DynamicField> dynamic, const TimeGrid& grid);

[[nodiscard]] double total_error(const FactorGraph& graph, const Trajectory& traj);

// Symmetric block-tridiagonal matrix with 4×4 blocks; upper[i] couples i and i+1.
struct BlockTridiagonal {
    std::vector<Mat4> diag;
    std::vector<Mat4> upper;

    explicit BlockTridiagonal(std::size_t n = 0) : diag(n, Mat4::Zero()), upper(n > 0 ? n - 1 : 0, Mat4::Zero()) {}

    [[nodiscard]] std::size_t blocks() const noexcept { return diag.size(); }
    [[nodiscard]] Eigen::MatrixXd to_dense() const;
    [[nodiscard]] Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

    // Block Cholesky solve of A x = rhs; nullopt when A is not positive definite.
    [[nodiscard]] std::optional<Eigen::VectorXd> solve(const Eigen::VectorXd& rhs) const;
};

// Gauss-Newton normal equations Jᵀ J δ = −Jᵀ r of the whitened system.
struct NormalSystem {
    BlockTridiagonal hessian;
    Eigen::VectorXd gradient;  // Jᵀ r
    double error = 0.0;        // ½ rᵀ r
};

[[nodiscard]] NormalSystem linearize(const FactorGraph& graph, const Trajectory& traj);

// Stacks trajectory states as [θ_0; θ_1; ...].
[[nodiscard]] Eigen::VectorXd stack_states(const Trajectory& traj);
void unstack_states(const Eigen::VectorXd& x, Trajectory& traj);

}  // namespace dgpmp
