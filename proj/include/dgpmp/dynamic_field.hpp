#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "dgpmp/grid.hpp"
#include "dgpmp/static_field.hpp"
#include "dgpmp/trajectory.hpp"

namespace dgpmp {

// AIS-style record of another vessel.
struct ObstacleTrack {
    double dim_a = 0.0;  // bow to reference point, m
    double dim_b = 0.0;  // reference point to stern, m
    double dim_c = 0.0;  // port side to reference point, m
    double dim_d = 0.0;  // reference point to starboard side, m
    Vec2 position = Vec2::Zero();
    double speed = 0.0;   // m/s
    double course = 0.0;  // degrees clockwise from +Y (north), [0, 360)

    // Symmetric extents from overall length and beam.
    [[nodiscard]] static ObstacleTrack from_size(double length, double width, const Vec2& position, double speed,
                                                 double course);

    [[nodiscard]] double length() const noexcept { return dim_a + dim_b; }
    [[nodiscard]] double width() const noexcept { return dim_c + dim_d; }
    // Unit vector along the course.
    [[nodiscard]] Vec2 heading() const;

    void validate() const;
};

// Speed calibration constants for the safe-area model.
struct SafeAreaParams {
    double zeta = 2.0;
    double eta = 0.2;
    double a = 1.05;
    double b = 1.0;

    void validate() const;
};

[[nodiscard]] double safe_radius(const ObstacleTrack& track, double zeta);

struct AxisVariances {
    double sigma_x2;  // across the course
    double sigma_y2;  // along the course
};

// σ_X² = R², σ_Y² = (η v + 1) a^{b v} R².
[[nodiscard]] AxisVariances speed_calibrated_variances(double radius, double speed, double eta, double a, double b);

// Peak-normalised Gaussian safe area in the obstacle-aligned frame, placed at
// `mean` and rotated to `rotation_deg` (clockwise from +Y).
struct SafeAreaModel {
    double safe_radius = 0.0;
    double sigma_x2 = 0.0;
    double sigma_y2 = 0.0;
    Vec2 mean = Vec2::Zero();
    double rotation_deg = 0.0;
    double rho = 0.0;

    [[nodiscard]] static SafeAreaModel from_track(const ObstacleTrack& track, const SafeAreaParams& params);

    // World-frame covariance R diag(σ_X², σ_Y²) Rᵀ.
    [[nodiscard]] Mat2 covariance() const;
};

struct CostSample {
    double cost;
    Vec2 gradient;  // per metre
};

[[nodiscard]] CostSample eval_cost(const SafeAreaModel& model, const Vec2& point);

struct CostFieldRaster {
    GridGeometry geometry;
    std::vector<double> values;

    [[nodiscard]] double at(int ix, int iy) const { return values.at(geometry.index(ix, iy)); }
};

[[nodiscard]] CostFieldRaster rasterize_field(const SafeAreaModel& model, const GridGeometry& geometry);

// Pointwise maximum over a set of safe areas; empty set is zero everywhere.
class DynamicField {
public:
    DynamicField() = default;
    explicit DynamicField(std::vector<SafeAreaModel> models) : models_(std::move(models)) {}

    [[nodiscard]] std::span<const SafeAreaModel> models() const noexcept { return models_; }
    [[nodiscard]] bool empty() const noexcept { return models_.empty(); }

    // Cost and gradient of the dominating model at `point`.
    [[nodiscard]] CostSample query(const Vec2& point) const;
    [[nodiscard]] CostFieldRaster rasterize(const GridGeometry& geometry) const;

private:
    std::vector<SafeAreaModel> models_;
};

[[nodiscard]] DynamicField compose_tracks(std::span<const ObstacleTrack> tracks, const SafeAreaParams& params);

// Residual is the combined cost at the state's position; velocity columns are zero.
[[nodiscard]] ScalarFactorEval dynamic_factor_error(const TrajectoryState& state, const DynamicField& field);

}  // namespace dgpmp
