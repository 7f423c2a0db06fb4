#pragma once

#include <cstddef>

#include "dgpmp/trajectory.hpp"

namespace dgpmp {

// Cell (ix, iy) is centred at origin + resolution * (ix, iy); values are
// stored row-major with iy as the row index.
struct GridGeometry {
    int width = 0;
    int height = 0;
    double resolution = 1.0;
    Vec2 origin = Vec2::Zero();

    void validate() const;

    [[nodiscard]] std::size_t cell_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    [[nodiscard]] std::size_t index(int ix, int iy) const noexcept {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width) + static_cast<std::size_t>(ix);
    }
    [[nodiscard]] Vec2 cell_center(int ix, int iy) const noexcept {
        return origin + resolution * Vec2(ix, iy);
    }
    // Continuous cell coordinates of a metric point.
    [[nodiscard]] Vec2 to_cell(const Vec2& p) const noexcept { return (p - origin) / resolution; }

    [[nodiscard]] Vec2 min_corner() const noexcept { return origin; }
    [[nodiscard]] Vec2 max_corner() const noexcept {
        return origin + resolution * Vec2(width - 1, height - 1);
    }
    [[nodiscard]] bool contains(const Vec2& p) const noexcept;

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

}  // namespace dgpmp
