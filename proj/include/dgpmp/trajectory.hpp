#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dgpmp {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

// One support state: planar position (m) and velocity (m/s).
struct TrajectoryState {
    Vec2 position = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();

    TrajectoryState() = default;
    TrajectoryState(const Vec2& p, const Vec2& v) : position(p), velocity(v) {}

    // Stacked as [x, y, vx, vy].
    [[nodiscard]] Vec4 vector() const;
    [[nodiscard]] static TrajectoryState from_vector(const Vec4& x);

    [[nodiscard]] bool is_finite() const;
};

// Support times t_0 = 0 < t_1 < ... < t_N plus a count of interpolated
// check times placed uniformly inside every segment.
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(std::vector<double> support_times, int interp_per_segment);

    // N equal segments spanning [0, total_time].
    [[nodiscard]] static TimeGrid uniform(double total_time, int segments, int interp_per_segment);

    [[nodiscard]] std::span<const double> support_times() const noexcept { return times_; }
    [[nodiscard]] int interp_per_segment() const noexcept { return interp_; }
    [[nodiscard]] std::size_t num_states() const noexcept { return times_.size(); }
    [[nodiscard]] std::size_t num_segments() const noexcept {
        return times_.empty() ? 0 : times_.size() - 1;
    }
    [[nodiscard]] double total_time() const noexcept { return times_.empty() ? 0.0 : times_.back(); }
    [[nodiscard]] double dt(std::size_t segment) const { return times_.at(segment + 1) - times_.at(segment); }

    // j-th interpolated time inside `segment`, j in [0, interp_per_segment).
    [[nodiscard]] double interp_time(std::size_t segment, int j) const;

private:
    std::vector<double> times_;
    int interp_ = 0;
};

struct Trajectory {
    TimeGrid grid;
    std::vector<TrajectoryState> states;

    [[nodiscard]] std::size_t size() const noexcept { return states.size(); }

    // Polyline length through the support positions.
    [[nodiscard]] double path_length() const;
};

// Constant-velocity straight-line trajectory from start to goal over the grid.
[[nodiscard]] Trajectory init_straight_line(const Vec2& start, const Vec2& goal, const TimeGrid& grid);

// ‖goal − start‖ / nominal_speed, floored at min_time for coincident endpoints.
[[nodiscard]] double total_time_from_nominal_speed(const Vec2& start, const Vec2& goal,
                                                   double nominal_speed, double min_time = 1.0);

}  // namespace dgpmp
