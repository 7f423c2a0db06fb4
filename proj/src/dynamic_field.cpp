#include "dgpmp/dynamic_field.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dgpmp {

namespace {

constexpr double kRasterFloor = 1e-12;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Unit vectors of the obstacle frame: `along` follows the course, `across`
// points to starboard.
struct Frame {
    Vec2 along;
    Vec2 across;
};

Frame course_frame(double course_deg) {
    const double a = deg2rad(course_deg);
    const double s = std::sin(a);
    const double c = std::cos(a);
    return {Vec2(s, c), Vec2(c, -s)};
}

}  // namespace

ObstacleTrack ObstacleTrack::from_size(double length, double width, const Vec2& position, double speed,
                                       double course) {
    ObstacleTrack t;
    t.dim_a = t.dim_b = 0.5 * length;
    t.dim_c = t.dim_d = 0.5 * width;
    t.position = position;
    t.speed = speed;
    t.course = course;
    return t;
}

Vec2 ObstacleTrack::heading() const { return course_frame(course).along; }

void ObstacleTrack::validate() const {
    if (dim_a < 0 || dim_b < 0 || dim_c < 0 || dim_d < 0) {
        throw std::invalid_argument("obstacle dimension extents must be non-negative");
    }
    if (!(length() > 0) || !(width() > 0)) {
        throw std::invalid_argument("obstacle length and width must be positive");
    }
    if (!(speed >= 0) || !std::isfinite(speed)) {
        throw std::invalid_argument("obstacle speed must be non-negative");
    }
    if (!(course >= 0) || !(course < 360)) {
        throw std::invalid_argument("obstacle course must lie in [0, 360)");
    }
    if (!position.allFinite()) {
        throw std::invalid_argument("obstacle position must be finite");
    }
}

void SafeAreaParams::validate() const {
    if (!(zeta > 0)) throw std::invalid_argument("zeta must be positive");
    if (!(eta > 0)) throw std::invalid_argument("eta must be positive");
    if (!(a >= 1)) throw std::invalid_argument("a must be at least 1");
    if (!(b >= 0)) throw std::invalid_argument("b must be non-negative");
}

double safe_radius(const ObstacleTrack& track, double zeta) {
    if (!(zeta > 0)) {
        throw std::invalid_argument("safe_radius: zeta must be positive");
    }
    return zeta * (track.length() + track.width()) / 2.0;
}

AxisVariances speed_calibrated_variances(double radius, double speed, double eta, double a, double b) {
    if (!(radius > 0)) throw std::invalid_argument("safe radius must be positive");
    if (!(speed >= 0)) throw std::invalid_argument("speed must be non-negative");
    if (!(eta > 0)) throw std::invalid_argument("eta must be positive");
    if (!(a >= 1)) throw std::invalid_argument("a must be at least 1");
    if (!(b >= 0)) throw std::invalid_argument("b must be non-negative");
    const double r2 = radius * radius;
    return {r2, (eta * speed + 1.0) * std::pow(a, b * speed) * r2};
}

SafeAreaModel SafeAreaModel::from_track(const ObstacleTrack& track, const SafeAreaParams& params) {
    track.validate();
    params.validate();
    SafeAreaModel m;
    m.safe_radius = dgpmp::safe_radius(track, params.zeta);
    const auto var = speed_calibrated_variances(m.safe_radius, track.speed, params.eta, params.a, params.b);
    m.sigma_x2 = var.sigma_x2;
    m.sigma_y2 = var.sigma_y2;
    m.mean = track.position;
    m.rotation_deg = track.course;
    return m;
}

Mat2 SafeAreaModel::covariance() const {
    const auto f = course_frame(rotation_deg);
    return sigma_x2 * f.across * f.across.transpose() + sigma_y2 * f.along * f.along.transpose();
}

CostSample eval_cost(const SafeAreaModel& model, const Vec2& point) {
    const auto f = course_frame(model.rotation_deg);
    const Vec2 d = point - model.mean;
    const double px = d.dot(f.across);
    const double py = d.dot(f.along);
    const double wx = px / model.sigma_x2;
    const double wy = py / model.sigma_y2;
    const double cost = std::exp(-0.5 * (px * wx + py * wy));
    return {cost, -cost * (wx * f.across + wy * f.along)};
}

CostFieldRaster rasterize_field(const SafeAreaModel& model, const GridGeometry& geometry) {
    return DynamicField({model}).rasterize(geometry);
}

CostSample DynamicField::query(const Vec2& point) const {
    CostSample best{0.0, Vec2::Zero()};
    for (const auto& m : models_) {
        const auto s = eval_cost(m, point);
        if (s.cost > best.cost) {
            best = s;
        }
    }
    return best;
}

CostFieldRaster DynamicField::rasterize(const GridGeometry& geometry) const {
    geometry.validate();
    CostFieldRaster r{geometry, std::vector<double>(geometry.cell_count(), 0.0)};
    for (int iy = 0; iy < geometry.height; ++iy) {
        for (int ix = 0; ix < geometry.width; ++ix) {
            const double v = query(geometry.cell_center(ix, iy)).cost;
            r.values[geometry.index(ix, iy)] = v < kRasterFloor ? 0.0 : v;
        }
    }
    return r;
}

DynamicField compose_tracks(std::span<const ObstacleTrack> tracks, const SafeAreaParams& params) {
    std::vector<SafeAreaModel> models;
    models.reserve(tracks.size());
    for (const auto& t : tracks) {
        models.push_back(SafeAreaModel::from_track(t, params));
    }
    return DynamicField(std::move(models));
}

ScalarFactorEval dynamic_factor_error(const TrajectoryState& state, const DynamicField& field) {
    const auto s = field.query(state.position);
    ScalarFactorEval out{s.cost, Eigen::RowVector4d::Zero()};
    out.jacobian.head<2>() = s.gradient.transpose();
    return out;
}

}  // namespace dgpmp
