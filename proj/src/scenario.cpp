#include "dgpmp/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace dgpmp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> out;
    for (std::string tok; ss >> tok;) {
        out.push_back(tok);
    }
    return out;
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
    throw ScenarioError(source + ":" + std::to_string(line) + ": " + msg);
}

double to_double(const std::string& tok, const std::string& source, int line, const std::string& key) {
    double v = 0.0;
    const char* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        fail(source, line, "key '" + key + "': cannot parse '" + tok + "' as a number");
    }
    return v;
}

std::vector<double> numbers(const ScenarioEntry& e, const std::string& source, const std::string& key,
                            std::size_t min_count, std::size_t max_count) {
    const auto toks = split_ws(e.value);
    if (toks.size() < min_count || toks.size() > max_count) {
        fail(source, e.line,
             "key '" + key + "' expects " +
                 (min_count == max_count ? std::to_string(min_count)
                                         : std::to_string(min_count) + "-" + std::to_string(max_count)) +
                 " value(s), got " + std::to_string(toks.size()));
    }
    std::vector<double> out;
    for (const auto& t : toks) {
        out.push_back(to_double(t, source, e.line, key));
    }
    return out;
}

// Typed accessors over one section; each records which keys were consumed.
class Section {
public:
    Section(const std::map<std::string, ScenarioEntry>& entries, std::string source, std::string prefix)
        : entries_(entries), source_(std::move(source)), prefix_(std::move(prefix)) {}

    const ScenarioEntry* find(const std::string& key) {
        used_.insert(key);
        const auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

    double number(const std::string& key, double fallback) {
        const auto* e = find(key);
        return e ? numbers(*e, source_, prefix_ + key, 1, 1)[0] : fallback;
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    Vec2 vec2(const std::string& key, const Vec2& fallback) {
        const auto* e = find(key);
        if (!e) {
            return fallback;
        }
        const auto v = numbers(*e, source_, prefix_ + key, 2, 2);
        return {v[0], v[1]};
    }

    Vec2 required_vec2(const std::string& key) {
        if (!has(key)) {
            missing(key);
        }
        return vec2(key, Vec2::Zero());
    }

    double required_number(const std::string& key) {
        if (!has(key)) {
            missing(key);
        }
        return number(key, 0.0);
    }

    bool boolean(const std::string& key, bool fallback) {
        const auto* e = find(key);
        if (!e) {
            return fallback;
        }
        if (e->value == "true") {
            return true;
        }
        if (e->value == "false") {
            return false;
        }
        fail(source_, e->line, "key '" + prefix_ + key + "' expects true or false");
    }

    int integer(const std::string& key, int fallback) {
        const auto* e = find(key);
        if (!e) {
            return fallback;
        }
        const double v = numbers(*e, source_, prefix_ + key, 1, 1)[0];
        if (v != std::floor(v) || std::abs(v) > 1e9) {
            fail(source_, e->line, "key '" + prefix_ + key + "' must be an integer");
        }
        return static_cast<int>(v);
    }

    // Range check with the location of the offending key.
    void require(bool ok, const std::string& key, const std::string& what) {
        if (ok) {
            return;
        }
        const auto it = entries_.find(key);
        const int line = it == entries_.end() ? 0 : it->second.line;
        fail(source_, line, "key '" + prefix_ + key + "' out of range: " + what);
    }

    [[noreturn]] void missing(const std::string& key) const {
        throw ScenarioError(source_ + ": missing required key '" + prefix_ + key + "'");
    }

    void reject_unknown() const {
        for (const auto& [k, e] : entries_) {
            if (used_.count(k) == 0) {
                fail(source_, e.line, "unknown key '" + prefix_ + k + "'");
            }
        }
    }

    const std::string& source() const { return source_; }

private:
    const std::map<std::string, ScenarioEntry>& entries_;
    std::string source_;
    std::string prefix_;
    std::set<std::string> used_;
};

ObstacleTrack parse_obstacle(Section& s, const SafeAreaParams& safe_area, double& speed_scale) {
    ObstacleTrack t;
    t.position = s.required_vec2("position");
    t.speed = s.number("speed", 0.0);
    s.require(t.speed >= 0.0, "speed", "must be >= 0");
    t.course = s.number("course", 0.0);
    s.require(t.course >= 0.0 && t.course < 360.0, "course", "must lie in [0, 360)");

    if (s.has("dims")) {
        s.require(!s.has("length") && !s.has("width"), "dims", "give either dims or length/width, not both");
        const auto* e = s.find("dims");
        const auto v = numbers(*e, s.source(), "dims", 4, 4);
        t.dim_a = v[0];
        t.dim_b = v[1];
        t.dim_c = v[2];
        t.dim_d = v[3];
        s.require(v[0] >= 0 && v[1] >= 0 && v[2] >= 0 && v[3] >= 0, "dims", "extents must be >= 0");
    } else {
        const double length = s.required_number("length");
        const double width = s.required_number("width");
        s.require(length > 0, "length", "must be > 0");
        s.require(width > 0, "width", "must be > 0");
        t.dim_a = t.dim_b = 0.5 * length;
        t.dim_c = t.dim_d = 0.5 * width;
    }
    s.require(t.length() > 0 && t.width() > 0, "dims", "length and width must be > 0");

    if (s.has("safe_radius")) {
        const double stated = s.number("safe_radius", 0.0);
        const double derived = safe_radius(t, safe_area.zeta);
        s.require(std::abs(stated - derived) <= 1e-9 * std::max(1.0, derived), "safe_radius",
                  "stated " + std::to_string(stated) + " m but zeta*(length+width)/2 = " + std::to_string(derived) +
                      " m");
    }
    speed_scale = s.number("speed_scale", 1.0);
    s.require(speed_scale > 0, "speed_scale", "must be > 0");
    s.reject_unknown();
    return t;
}

}  // namespace

ScenarioDoc read_scenario_doc(const std::string& text, const std::string& source,
                              const std::filesystem::path& base_dir) {
    ScenarioDoc doc;
    doc.source = source;
    doc.base_dir = base_dir;
    std::map<std::string, ScenarioEntry>* section = &doc.globals;
    std::istringstream in(text);
    int line_no = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line != "[obstacle]") {
                fail(source, line_no, "unknown section " + line);
            }
            doc.obstacles.emplace_back();
            section = &doc.obstacles.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(source, line_no, "expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            fail(source, line_no, "empty key");
        }
        if (value.empty()) {
            fail(source, line_no, "key '" + key + "' has no value");
        }
        if (section->count(key) != 0) {
            fail(source, line_no, "duplicate key '" + key + "' (first set on line " +
                                      std::to_string(section->at(key).line) + ")");
        }
        (*section)[key] = {value, line_no};
    }
    return doc;
}

void apply_override(ScenarioDoc& doc, const std::string& key, const std::string& value) {
    const std::string all_prefix = "obstacle.";
    if (key.rfind(all_prefix, 0) == 0) {
        if (doc.obstacles.empty()) {
            throw ScenarioError("override '" + key + "': scenario has no obstacles");
        }
        for (auto& o : doc.obstacles) {
            o[key.substr(all_prefix.size())] = {value, 0};
        }
        return;
    }
    if (key.rfind("obstacle[", 0) == 0) {
        const auto close = key.find("].");
        if (close == std::string::npos) {
            throw ScenarioError("malformed override key '" + key + "'");
        }
        std::size_t idx = 0;
        const auto digits = key.substr(9, close - 9);
        const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec != std::errc() || p != digits.data() + digits.size() || idx >= doc.obstacles.size()) {
            throw ScenarioError("override '" + key + "': no such obstacle");
        }
        doc.obstacles[idx][key.substr(close + 2)] = {value, 0};
        return;
    }
    doc.globals[key] = {value, 0};
}

Scenario scenario_from_doc(const ScenarioDoc& doc) {
    Section g(doc.globals, doc.source, "");
    Scenario sc;

    if (!g.has("version")) {
        g.missing("version");
    }
    const int version = g.integer("version", 0);
    g.require(version == kScenarioVersion, "version", "only version " + std::to_string(kScenarioVersion) + " is supported");

    if (const auto* e = g.find("name")) {
        sc.name = e->value;
    }

    if (!g.has("map")) {
        g.missing("map");
    }
    {
        const auto* e = g.find("map");
        const auto toks = split_ws(e->value);
        if (toks.empty()) {
            fail(doc.source, e->line, "key 'map' is empty");
        }
        if (toks[0] == "empty") {
            if (toks.size() != 3) {
                fail(doc.source, e->line, "key 'map': expected 'empty <width_m> <height_m>'");
            }
            sc.map.empty = true;
            sc.map.size = {to_double(toks[1], doc.source, e->line, "map"), to_double(toks[2], doc.source, e->line, "map")};
            g.require(sc.map.size.x() > 0 && sc.map.size.y() > 0, "map", "empty map size must be positive");
        } else {
            if (toks.size() != 1) {
                fail(doc.source, e->line, "key 'map': expected a single file name");
            }
            sc.map.empty = false;
            const std::filesystem::path p(toks[0]);
            sc.map.file = p.is_absolute() ? p : doc.base_dir / p;
        }
    }
    sc.map.explicit_geometry = g.has("resolution") || g.has("origin");
    sc.map.resolution = g.number("resolution", 1.0);
    g.require(sc.map.resolution > 0, "resolution", "must be > 0");
    sc.map.origin = g.vec2("origin", Vec2::Zero());

    sc.start = g.required_vec2("start");
    sc.goal = g.required_vec2("goal");

    sc.dynamic_weight = g.number("dynamic_weight", sc.dynamic_weight);
    g.require(sc.dynamic_weight > 0, "dynamic_weight", "must be > 0");
    sc.static_weight = g.number("static_weight", sc.static_weight);
    g.require(sc.static_weight > 0, "static_weight", "must be > 0");
    sc.safety_distance = g.number("safety_distance", sc.safety_distance);
    g.require(sc.safety_distance >= 0, "safety_distance", "must be >= 0");

    if (const auto* e = g.find("qc")) {
        const auto v = numbers(*e, doc.source, "qc", 1, 4);
        if (v.size() == 1) {
            sc.prior.qc = v[0] * Mat2::Identity();
        } else if (v.size() == 2) {
            sc.prior.qc = Eigen::Vector2d(v[0], v[1]).asDiagonal();
        } else if (v.size() == 4) {
            sc.prior.qc << v[0], v[1], v[2], v[3];
        } else {
            fail(doc.source, e->line, "key 'qc' expects 1, 2 or 4 values");
        }
    }
    sc.prior.start_fix_sigma = g.number("start_sigma", sc.prior.start_fix_sigma);
    g.require(sc.prior.start_fix_sigma > 0, "start_sigma", "must be > 0");
    sc.prior.goal_fix_sigma = g.number("goal_sigma", sc.prior.goal_fix_sigma);
    g.require(sc.prior.goal_fix_sigma > 0, "goal_sigma", "must be > 0");
    sc.prior.fix_start_velocity = g.boolean("fix_start_velocity", sc.prior.fix_start_velocity);
    sc.prior.fix_goal_velocity = g.boolean("fix_goal_velocity", sc.prior.fix_goal_velocity);
    try {
        sc.prior.validate();
    } catch (const std::invalid_argument& ex) {
        g.require(false, "qc", ex.what());
    }

    sc.segments = g.integer("segments", sc.segments);
    g.require(sc.segments >= 1, "segments", "must be >= 1");
    sc.interp = g.integer("interp", sc.interp);
    g.require(sc.interp >= 0, "interp", "must be >= 0");
    sc.nominal_speed = g.number("nominal_speed", sc.nominal_speed);
    g.require(sc.nominal_speed > 0, "nominal_speed", "must be > 0");
    sc.min_total_time = g.number("min_total_time", sc.min_total_time);
    g.require(sc.min_total_time > 0, "min_total_time", "must be > 0");

    sc.safe_area.zeta = g.number("zeta", sc.safe_area.zeta);
    g.require(sc.safe_area.zeta > 0, "zeta", "must be > 0");
    sc.safe_area.eta = g.number("eta", sc.safe_area.eta);
    g.require(sc.safe_area.eta > 0, "eta", "must be > 0");
    sc.safe_area.a = g.number("a", sc.safe_area.a);
    g.require(sc.safe_area.a >= 1, "a", "must be >= 1");
    sc.safe_area.b = g.number("b", sc.safe_area.b);
    g.require(sc.safe_area.b >= 0, "b", "must be >= 0");

    sc.lm.initial_lambda = g.number("lm_lambda", sc.lm.initial_lambda);
    g.require(sc.lm.initial_lambda > 0, "lm_lambda", "must be > 0");
    sc.lm.max_iterations = g.integer("lm_max_iterations", sc.lm.max_iterations);
    g.require(sc.lm.max_iterations >= 1, "lm_max_iterations", "must be >= 1");
    sc.lm.rel_tolerance = g.number("lm_rel_tolerance", sc.lm.rel_tolerance);
    g.require(sc.lm.rel_tolerance > 0, "lm_rel_tolerance", "must be > 0");

    sc.init_bias = g.number("init_bias", sc.init_bias);
    g.require(sc.init_bias >= 0, "init_bias", "must be >= 0");
    {
        const int seed = g.integer("seed", static_cast<int>(sc.seed));
        g.require(seed >= 0, "seed", "must be >= 0");
        sc.seed = static_cast<std::uint64_t>(seed);
    }

    sc.tick = g.number("tick", sc.tick);
    g.require(sc.tick > 0, "tick", "must be > 0");
    sc.horizon = g.number("horizon", sc.horizon);
    g.require(sc.horizon > 0, "horizon", "must be > 0");
    sc.goal_tolerance = g.number("goal_tolerance", sc.goal_tolerance);
    g.require(sc.goal_tolerance > 0, "goal_tolerance", "must be > 0");

    g.reject_unknown();

    for (std::size_t i = 0; i < doc.obstacles.size(); ++i) {
        Section s(doc.obstacles[i], doc.source, "obstacle[" + std::to_string(i) + "].");
        double scale = 1.0;
        sc.obstacles.push_back(parse_obstacle(s, sc.safe_area, scale));
        sc.speed_scales.push_back(scale);
    }

    if (sc.map.empty) {
        const Vec2 hi = sc.map.origin + sc.map.size - Vec2::Constant(sc.map.resolution);
        try {
            sc.validate_bounds(sc.map.origin, hi);
        } catch (const ScenarioError& ex) {
            throw ScenarioError(doc.source + ": " + ex.what());
        }
    }
    return sc;
}

void Scenario::validate_bounds(const Vec2& lo, const Vec2& hi) const {
    auto inside = [&](const Vec2& p) {
        return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
    };
    if (!inside(start)) {
        throw ScenarioError("start position lies outside the map");
    }
    if (!inside(goal)) {
        throw ScenarioError("goal position lies outside the map");
    }
}

Scenario parse_scenario_text(const std::string& text, const std::string& source,
                             const std::filesystem::path& base_dir) {
    return scenario_from_doc(read_scenario_doc(text, source, base_dir));
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ScenarioError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Scenario parse_scenario(const std::filesystem::path& path) {
    return parse_scenario_text(read_file(path), path.string(), path.parent_path());
}

std::vector<SweepRun> parse_sweep(const std::filesystem::path& path) {
    const std::string source = path.string();
    std::istringstream in(read_file(path));
    std::filesystem::path scenario_path;
    // One axis per "vary" line; all "zip" lines together form one more axis
    // whose keys change in lockstep.
    using Axis = std::vector<std::pair<std::string, std::vector<std::string>>>;
    std::vector<Axis> axes;
    Axis zipped;
    int line_no = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(source, line_no, "expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const auto toks = split_ws(line.substr(eq + 1));
        if (key == "scenario") {
            if (toks.size() != 1 || !scenario_path.empty()) {
                fail(source, line_no, "exactly one 'scenario = <file>' line is required");
            }
            scenario_path = toks[0];
        } else if (key == "vary" || key == "zip") {
            if (toks.size() < 2) {
                fail(source, line_no, "'" + key + "' expects a key followed by at least one value");
            }
            std::pair<std::string, std::vector<std::string>> entry{toks[0], {toks.begin() + 1, toks.end()}};
            if (key == "vary") {
                axes.push_back({std::move(entry)});
            } else {
                if (!zipped.empty() && zipped.front().second.size() != entry.second.size()) {
                    fail(source, line_no, "'zip' lines must all list the same number of values");
                }
                zipped.push_back(std::move(entry));
            }
        } else {
            fail(source, line_no, "unknown key '" + key + "'");
        }
    }
    if (scenario_path.empty()) {
        throw ScenarioError(source + ": missing 'scenario'");
    }
    if (!zipped.empty()) {
        axes.push_back(std::move(zipped));
    }
    if (scenario_path.is_relative()) {
        scenario_path = path.parent_path() / scenario_path;
    }
    const ScenarioDoc base =
        read_scenario_doc(read_file(scenario_path), scenario_path.string(), scenario_path.parent_path());

    std::vector<SweepRun> runs{SweepRun{}};
    for (const auto& axis : axes) {
        std::vector<SweepRun> next;
        for (const auto& r : runs) {
            for (std::size_t i = 0; i < axis.front().second.size(); ++i) {
                SweepRun n = r;
                for (const auto& [key, values] : axis) {
                    n.overrides.emplace_back(key, values[i]);
                    n.name += (n.name.empty() ? "" : "_") + key + "=" + values[i];
                }
                next.push_back(std::move(n));
            }
        }
        runs = std::move(next);
    }
    for (auto& r : runs) {
        ScenarioDoc doc = base;
        for (const auto& [k, v] : r.overrides) {
            apply_override(doc, k, v);
        }
        if (r.name.empty()) {
            r.name = "base";
        }
        try {
            r.scenario = scenario_from_doc(doc);
        } catch (const ScenarioError& ex) {
            throw ScenarioError(source + ": run '" + r.name + "': " + ex.what());
        }
    }
    return runs;
}

}  // namespace dgpmp
