#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dgpmp/grid.hpp"
#include "dgpmp/trajectory.hpp"

namespace dgpmp {

// Binary occupancy map; true = obstacle.
struct OccupancyGrid {
    GridGeometry geometry;
    std::vector<std::uint8_t> cells;

    [[nodiscard]] static OccupancyGrid empty(const GridGeometry& geometry);

    [[nodiscard]] bool occupied(int ix, int iy) const { return cells.at(geometry.index(ix, iy)) != 0; }
    void set(int ix, int iy, bool value) { cells.at(geometry.index(ix, iy)) = value ? 1 : 0; }
    [[nodiscard]] std::size_t occupied_count() const;
};

class MapFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reads a P2 graymap or a 0/1 text matrix. The first text row is the top of
// the map (largest iy). Graymap pixels darker than half of maxval are
// obstacles; in a text matrix every nonzero entry is an obstacle.
[[nodiscard]] OccupancyGrid load_occupancy(const std::filesystem::path& path, double resolution, const Vec2& origin);

// Same, but geometry comes from an optional "# geometry <res> <ox> <oy>"
// header line (defaults: 1 m/cell, origin 0).
[[nodiscard]] OccupancyGrid load_occupancy(const std::filesystem::path& path);

void write_occupancy_pgm(const std::filesystem::path& path, const OccupancyGrid& grid);

inline constexpr double kSdfCap = 1e6;

// Signed distance in metres, positive in free space, negative inside obstacles.
class SdfGrid {
public:
    SdfGrid(GridGeometry geometry, std::vector<double> values, double cap = kSdfCap);

    [[nodiscard]] const GridGeometry& geometry() const noexcept { return geometry_; }
    [[nodiscard]] double cap() const noexcept { return cap_; }
    [[nodiscard]] double at(int ix, int iy) const { return values_.at(geometry_.index(ix, iy)); }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

private:
    GridGeometry geometry_;
    std::vector<double> values_;
    double cap_;
};

// EDT(free → nearest obstacle) − EDT(obstacle → nearest free), both measured
// between cell centres; infinite distances saturate at ±cap.
[[nodiscard]] SdfGrid compute_sdf(const OccupancyGrid& grid, double cap = kSdfCap);

class OutOfBoundsError : public std::out_of_range {
public:
    explicit OutOfBoundsError(const Vec2& p);
    Vec2 point;
};

struct SdfSample {
    double value;
    Vec2 gradient;
};

// Bilinear interpolation between cell centres with the patch's analytic gradient.
[[nodiscard]] SdfSample query_sdf(const SdfGrid& sdf, const Vec2& point);
[[nodiscard]] std::optional<SdfSample> try_query_sdf(const SdfGrid& sdf, const Vec2& point);

struct HingeParams {
    double epsilon = 3.0;  // safety distance, m
};

[[nodiscard]] double hinge_cost(double d, const HingeParams& params);

struct ScalarFactorEval {
    double residual;
    Eigen::RowVector4d jacobian;  // w.r.t. [x, y, vx, vy]
};

// Hinge-loss residual on the SDF at the state's position. Positions outside
// the map saturate at cap + ε with the Jacobian pointing back inside.
[[nodiscard]] ScalarFactorEval static_factor_error(const TrajectoryState& state, const SdfGrid& sdf,
                                                   const HingeParams& params);

}  // namespace dgpmp
