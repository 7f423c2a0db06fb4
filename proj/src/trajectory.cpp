#include "dgpmp/trajectory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dgpmp {

Vec4 TrajectoryState::vector() const {
    Vec4 x;
    x << position, velocity;
    return x;
}

TrajectoryState TrajectoryState::from_vector(const Vec4& x) {
    return {x.head<2>(), x.tail<2>()};
}

bool TrajectoryState::is_finite() const {
    return position.allFinite() && velocity.allFinite();
}

TimeGrid::TimeGrid(std::vector<double> support_times, int interp_per_segment)
    : times_(std::move(support_times)), interp_(interp_per_segment) {
    if (times_.size() < 2) {
        throw std::invalid_argument("time grid needs at least 2 support times");
    }
    if (times_.front() != 0.0) {
        throw std::invalid_argument("time grid must start at t = 0");
    }
    for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
        if (!(times_[i + 1] > times_[i]) || !std::isfinite(times_[i + 1])) {
            throw std::invalid_argument("support times must be strictly increasing (index " +
                                        std::to_string(i + 1) + ")");
        }
    }
    if (interp_ < 0) {
        throw std::invalid_argument("interp_per_segment must be non-negative");
    }
}

TimeGrid TimeGrid::uniform(double total_time, int segments, int interp_per_segment) {
    if (segments < 1) {
        throw std::invalid_argument("time grid needs at least one segment");
    }
    if (!(total_time > 0.0)) {
        throw std::invalid_argument("total time must be positive");
    }
    std::vector<double> t(static_cast<std::size_t>(segments) + 1);
    for (int i = 0; i <= segments; ++i) {
        t[static_cast<std::size_t>(i)] = total_time * static_cast<double>(i) / segments;
    }
    t.back() = total_time;
    return TimeGrid(std::move(t), interp_per_segment);
}

double TimeGrid::interp_time(std::size_t segment, int j) const {
    if (j < 0 || j >= interp_) {
        throw std::out_of_range("interpolation index out of range");
    }
    const double t0 = times_.at(segment);
    return t0 + dt(segment) * static_cast<double>(j + 1) / static_cast<double>(interp_ + 1);
}

double Trajectory::path_length() const {
    double len = 0.0;
    for (std::size_t i = 1; i < states.size(); ++i) {
        len += (states[i].position - states[i - 1].position).norm();
    }
    return len;
}

Trajectory init_straight_line(const Vec2& start, const Vec2& goal, const TimeGrid& grid) {
    if (grid.num_states() < 2) {
        throw std::invalid_argument("init_straight_line: grid needs at least 2 support times");
    }
    const double total = grid.total_time();
    const Vec2 delta = goal - start;
    const Vec2 velocity = delta / total;

    Trajectory traj{grid, {}};
    traj.states.reserve(grid.num_states());
    const auto times = grid.support_times();
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double s = times[i] / total;
        traj.states.emplace_back(start + s * delta, velocity);
    }
    // endpoints exactly as given
    traj.states.front().position = start;
    traj.states.back().position = goal;
    return traj;
}

double total_time_from_nominal_speed(const Vec2& start, const Vec2& goal, double nominal_speed,
                                     double min_time) {
    if (!(nominal_speed > 0.0)) {
        throw std::invalid_argument("nominal speed must be positive");
    }
    const double dist = (goal - start).norm();
    if (dist == 0.0) {
        return min_time;
    }
    return dist / nominal_speed;
}

}  // namespace dgpmp
