#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgpmp/dynamic_field.hpp"
#include "dgpmp/gp_prior.hpp"
#include "dgpmp/lm_optimizer.hpp"
#include "dgpmp/trajectory.hpp"

namespace dgpmp {

inline constexpr int kScenarioVersion = 1;

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MapSpec {
    bool empty = true;
    Vec2 size = Vec2(100.0, 100.0);  // metres, empty maps only
    std::filesystem::path file;      // resolved against the scenario directory
    double resolution = 1.0;
    Vec2 origin = Vec2::Zero();
    // File maps: true when the scenario sets resolution/origin itself,
    // otherwise the file's geometry header applies.
    bool explicit_geometry = false;
};

struct Scenario {
    std::string name;
    MapSpec map;
    Vec2 start = Vec2::Zero();
    Vec2 goal = Vec2::Zero();
    std::vector<ObstacleTrack> obstacles;
    std::vector<double> speed_scales;  // per obstacle, replay only

    double dynamic_weight = 0.005;
    double static_weight = 0.05;
    double safety_distance = 3.0;

    GpPriorParams prior;
    int segments = 20;
    int interp = 4;
    double nominal_speed = 2.0;
    double min_total_time = 1.0;

    SafeAreaParams safe_area;
    LmSettings lm;

    // Lateral amplitude (m) of the symmetry-breaking bend added to the
    // straight-line initial guess when dynamic obstacles are present.
    double init_bias = 0.1;
    std::uint64_t seed = 1;

    double tick = 0.5;
    double horizon = 120.0;
    double goal_tolerance = 2.0;

    // Map extents for bounds checks; for file maps this needs the loaded grid.
    void validate_bounds(const Vec2& min_corner, const Vec2& max_corner) const;
};

// Raw key/value form of a scenario file, kept so that sweeps can override
// entries before validation.
struct ScenarioEntry {
    std::string value;
    int line = 0;
};

struct ScenarioDoc {
    std::string source;
    std::filesystem::path base_dir;
    std::map<std::string, ScenarioEntry> globals;
    std::vector<std::map<std::string, ScenarioEntry>> obstacles;
};

[[nodiscard]] ScenarioDoc read_scenario_doc(const std::string& text, const std::string& source,
                                            const std::filesystem::path& base_dir);

// key is "name", "obstacle.name" (every obstacle) or "obstacle[i].name".
void apply_override(ScenarioDoc& doc, const std::string& key, const std::string& value);

[[nodiscard]] Scenario scenario_from_doc(const ScenarioDoc& doc);

[[nodiscard]] Scenario parse_scenario(const std::filesystem::path& path);
[[nodiscard]] Scenario parse_scenario_text(const std::string& text, const std::string& source = "<string>",
                                           const std::filesystem::path& base_dir = ".");

// Sweep manifest: a base scenario plus one or more "vary = key v1 v2 ..."
// lines, expanded as a cartesian product.
struct SweepRun {
    std::string name;
    std::vector<std::pair<std::string, std::string>> overrides;
    Scenario scenario;
};

[[nodiscard]] std::vector<SweepRun> parse_sweep(const std::filesystem::path& path);

}  // namespace dgpmp
