#include "dgpmp/static_field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dgpmp {

void GridGeometry::validate() const {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("grid width and height must be at least 1");
    }
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
        throw std::invalid_argument("grid resolution must be positive");
    }
    if (!origin.allFinite()) {
        throw std::invalid_argument("grid origin must be finite");
    }
}

bool GridGeometry::contains(const Vec2& p) const noexcept {
    const Vec2 lo = min_corner();
    const Vec2 hi = max_corner();
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
}

OccupancyGrid OccupancyGrid::empty(const GridGeometry& geometry) {
    geometry.validate();
    return {geometry, std::vector<std::uint8_t>(geometry.cell_count(), 0)};
}

std::size_t OccupancyGrid::occupied_count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](auto c) { return c != 0; }));
}

namespace {

struct RawMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> top_down;  // first file row first
    std::optional<std::pair<double, Vec2>> geometry;
};

std::optional<std::pair<double, Vec2>> parse_geometry_comment(const std::string& line) {
    std::istringstream ss(line);
    std::string hash, tag;
    ss >> hash >> tag;
    if (hash != "#" || tag != "geometry") {
        return std::nullopt;
    }
    double res = 0, ox = 0, oy = 0;
    if (!(ss >> res >> ox >> oy)) {
        throw MapFormatError("malformed '# geometry' header: " + line);
    }
    return std::make_pair(res, Vec2(ox, oy));
}

RawMap read_raw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MapFormatError("cannot open map file " + path.string());
    }
    RawMap raw;
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) {
            continue;
        }
        if (line[first] == '#') {
            if (auto g = parse_geometry_comment(line.substr(first))) {
                raw.geometry = g;
            }
            continue;
        }
        lines.push_back(line);
    }
    if (lines.empty()) {
        throw MapFormatError("map file " + path.string() + " has no data");
    }

    std::istringstream head(lines.front());
    std::string magic;
    head >> magic;
    if (magic == "P2") {
        std::string joined;
        for (const auto& l : lines) {
            joined += l;
            joined += ' ';
        }
        std::istringstream ss(joined);
        ss >> magic;
        long w = 0, h = 0, maxval = 0;
        if (!(ss >> w >> h >> maxval) || w < 1 || h < 1 || maxval < 1) {
            throw MapFormatError("malformed P2 header in " + path.string());
        }
        raw.width = static_cast<int>(w);
        raw.height = static_cast<int>(h);
        raw.top_down.reserve(static_cast<std::size_t>(w * h));
        long v = 0;
        while (ss >> v) {
            if (v < 0 || v > maxval) {
                throw MapFormatError("pixel value out of range in " + path.string());
            }
            // dark pixels are obstacles
            raw.top_down.push_back(2 * v < maxval ? 1 : 0);
        }
        if (!ss.eof()) {
            throw MapFormatError("non-numeric pixel in " + path.string());
        }
        if (raw.top_down.size() != static_cast<std::size_t>(w * h)) {
            throw MapFormatError("dimension mismatch in " + path.string() + ": header says " + std::to_string(w) +
                                 "x" + std::to_string(h) + ", found " + std::to_string(raw.top_down.size()) +
                                 " pixels");
        }
        return raw;
    }

    // 0/1 text matrix, one row per line
    for (std::size_t r = 0; r < lines.size(); ++r) {
        std::istringstream ss(lines[r]);
        int count = 0;
        std::string tok;
        while (ss >> tok) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') {
                throw MapFormatError("non-numeric entry '" + tok + "' on data row " + std::to_string(r + 1));
            }
            raw.top_down.push_back(v != 0.0 ? 1 : 0);
            ++count;
        }
        if (r == 0) {
            raw.width = count;
        } else if (count != raw.width) {
            throw MapFormatError("dimension mismatch: data row " + std::to_string(r + 1) + " has " +
                                 std::to_string(count) + " entries, expected " + std::to_string(raw.width));
        }
    }
    raw.height = static_cast<int>(lines.size());
    return raw;
}

OccupancyGrid to_grid(const RawMap& raw, double resolution, const Vec2& origin) {
    GridGeometry g{raw.width, raw.height, resolution, origin};
    g.validate();
    OccupancyGrid grid = OccupancyGrid::empty(g);
    for (int row = 0; row < raw.height; ++row) {
        const int iy = raw.height - 1 - row;
        for (int ix = 0; ix < raw.width; ++ix) {
            grid.set(ix, iy, raw.top_down[static_cast<std::size_t>(row * raw.width + ix)] != 0);
        }
    }
    return grid;
}

}  // namespace

OccupancyGrid load_occupancy(const std::filesystem::path& path, double resolution, const Vec2& origin) {
    return to_grid(read_raw(path), resolution, origin);
}

OccupancyGrid load_occupancy(const std::filesystem::path& path) {
    const RawMap raw = read_raw(path);
    const auto geometry = raw.geometry.value_or(std::make_pair(1.0, Vec2(0.0, 0.0)));
    return to_grid(raw, geometry.first, geometry.second);
}

void write_occupancy_pgm(const std::filesystem::path& path, const OccupancyGrid& grid) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    const auto& g = grid.geometry;
    out << "P2\n# geometry " << g.resolution << ' ' << g.origin.x() << ' ' << g.origin.y() << '\n'
        << g.width << ' ' << g.height << "\n255\n";
    for (int iy = g.height - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < g.width; ++ix) {
            out << (grid.occupied(ix, iy) ? 0 : 255) << (ix + 1 < g.width ? ' ' : '\n');
        }
    }
}

SdfGrid::SdfGrid(GridGeometry geometry, std::vector<double> values, double cap)
    : geometry_(geometry), values_(std::move(values)), cap_(cap) {
    geometry_.validate();
    if (values_.size() != geometry_.cell_count()) {
        throw std::invalid_argument("SDF value count does not match grid geometry");
    }
}

namespace {

constexpr double kInf = 1e20;

// Squared distance transform of a sampled function (Felzenszwalb & Huttenlocher).
void edt_1d(const double* f, double* d, int n, int* v, double* z) {
    // |s| <= kInf / 2 for finite inputs, so z[0] = -kInf is never crossed.
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = 0.0;
        while (true) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
            if (s > z[k]) {
                break;
            }
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) {
            ++k;
        }
        const double diff = q - v[k];
        d[q] = diff * diff + f[v[k]];
    }
}

// Squared Euclidean distance (in cells) from every cell to the nearest site.
std::vector<double> squared_edt(const GridGeometry& g, const std::vector<std::uint8_t>& cells, std::uint8_t site) {
    const int w = g.width;
    const int h = g.height;
    const int n = std::max(w, h);
    std::vector<double> grid(g.cell_count());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        grid[i] = cells[i] == site ? 0.0 : kInf;
    }
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int ix = 0; ix < w; ++ix) {
        for (int iy = 0; iy < h; ++iy) f[iy] = grid[g.index(ix, iy)];
        edt_1d(f.data(), d.data(), h, v.data(), z.data());
        for (int iy = 0; iy < h; ++iy) grid[g.index(ix, iy)] = d[iy];
    }
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) f[ix] = grid[g.index(ix, iy)];
        edt_1d(f.data(), d.data(), w, v.data(), z.data());
        for (int ix = 0; ix < w; ++ix) grid[g.index(ix, iy)] = d[ix];
    }
    return grid;
}

}  // namespace

SdfGrid compute_sdf(const OccupancyGrid& grid, double cap) {
    const auto& g = grid.geometry;
    g.validate();
    const auto to_obstacle = squared_edt(g, grid.cells, 1);
    const auto to_free = squared_edt(g, grid.cells, 0);

    std::vector<double> values(g.cell_count());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double outside = to_obstacle[i] >= 0.5 * kInf ? cap : std::sqrt(to_obstacle[i]) * g.resolution;
        const double inside = to_free[i] >= 0.5 * kInf ? cap : std::sqrt(to_free[i]) * g.resolution;
        values[i] = std::clamp(outside - inside, -cap, cap);
    }
    return SdfGrid(g, std::move(values), cap);
}

OutOfBoundsError::OutOfBoundsError(const Vec2& p)
    : std::out_of_range("point (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                        ") is outside the signed distance field"),
      point(p) {}

std::optional<SdfSample> try_query_sdf(const SdfGrid& sdf, const Vec2& point) {
    const auto& g = sdf.geometry();
    if (!point.allFinite() || !g.contains(point)) {
        return std::nullopt;
    }
    const Vec2 c = g.to_cell(point);

    // Lower corner of the bilinear patch; degenerate axes collapse to one cell.
    auto axis = [](double u, int n, int& i0, int& i1, double& frac) {
        if (n == 1) {
            i0 = i1 = 0;
            frac = 0.0;
            return;
        }
        i0 = std::clamp(static_cast<int>(std::floor(u)), 0, n - 2);
        i1 = i0 + 1;
        frac = u - i0;
    };
    int x0, x1, y0, y1;
    double fx, fy;
    axis(c.x(), g.width, x0, x1, fx);
    axis(c.y(), g.height, y0, y1, fy);

    const double v00 = sdf.at(x0, y0);
    const double v10 = sdf.at(x1, y0);
    const double v01 = sdf.at(x0, y1);
    const double v11 = sdf.at(x1, y1);

    SdfSample s;
    s.value = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
    const double dfx = (1 - fy) * (v10 - v00) + fy * (v11 - v01);
    const double dfy = (1 - fx) * (v01 - v00) + fx * (v11 - v10);
    s.gradient = Vec2(g.width == 1 ? 0.0 : dfx, g.height == 1 ? 0.0 : dfy) / g.resolution;
    return s;
}

SdfSample query_sdf(const SdfGrid& sdf, const Vec2& point) {
    auto s = try_query_sdf(sdf, point);
    if (!s) {
        throw OutOfBoundsError(point);
    }
    return *s;
}

double hinge_cost(double d, const HingeParams& params) {
    return d <= params.epsilon ? params.epsilon - d : 0.0;
}

ScalarFactorEval static_factor_error(const TrajectoryState& state, const SdfGrid& sdf, const HingeParams& params) {
    ScalarFactorEval out{0.0, Eigen::RowVector4d::Zero()};
    if (const auto s = try_query_sdf(sdf, state.position)) {
        out.residual = hinge_cost(s->value, params);
        // inside-branch gradient at the kink, d == ε
        if (s->value <= params.epsilon) {
            out.jacobian.head<2>() = -s->gradient.transpose();
        }
        return out;
    }

    // Saturate as if deep inside an obstacle; steer back toward the map.
    const auto& g = sdf.geometry();
    out.residual = sdf.cap() + params.epsilon;
    Vec2 inward = Vec2::Zero();
    if (state.position.allFinite()) {
        const Vec2 clamped = state.position.cwiseMax(g.min_corner()).cwiseMin(g.max_corner());
        inward = clamped - state.position;
        const double n = inward.norm();
        if (n > 0.0) {
            inward /= n;
        }
    }
    out.jacobian.head<2>() = -inward.transpose();
    return out;
}

}  // namespace dgpmp
