#include "sfim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sfim {

namespace {

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return std::string(s.substr(begin, end - begin + 1));
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t used = 0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == s.size();
}

std::string format_message(const std::string& source, int line, const std::string& message) {
    std::ostringstream os;
    os << source;
    if (line > 0) os << ':' << line;
    os << ": " << message;
    return os.str();
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(format_message(source, line, message)), line_(line) {}

ConfigFile ConfigFile::parse(std::string_view text, std::string source) {
    ConfigFile file;
    file.source_ = std::move(source);
    std::istringstream in{std::string(text)};
    std::string raw_line;
    int line_no = 0;
    while (std::getline(in, raw_line)) {
        ++line_no;
        const auto hash = raw_line.find('#');
        const std::string line = trim(std::string_view(raw_line).substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(file.source_, line_no, "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(file.source_, line_no, "empty key");
        if (file.entries_.count(key))
            throw ConfigError(file.source_, line_no, "duplicate key '" + key + "'");
        if (value.empty()) throw ConfigError(file.source_, line_no, "empty value for '" + key + "'");
        file.set(key, value);
        file.entries_[key].line = line_no;
    }
    return file;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open configuration file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
}

void ConfigFile::set(const std::string& key, const std::string& raw_value) {
    Entry e;
    e.raw = trim(raw_value);
    if (!e.raw.empty() && e.raw.front() == '[') {
        if (e.raw.back() != ']') throw ConfigError(source_, 0, "unterminated array for '" + key + "'");
        e.is_array = true;
        const std::string body = e.raw.substr(1, e.raw.size() - 2);
        std::stringstream items(body);
        std::string item;
        while (std::getline(items, item, ',')) {
            item = trim(item);
            if (!item.empty()) e.items.push_back(unquote(item));
        }
    } else {
        e.items.push_back(unquote(e.raw));
    }
    auto it = entries_.find(key);
    if (it != entries_.end()) e.line = it->second.line;
    entries_[key] = std::move(e);
}

std::vector<std::string> ConfigFile::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

const ConfigFile::Entry& ConfigFile::entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(source_, 0, "missing required key '" + key + "'");
    return it->second;
}

void ConfigFile::fail(const Entry& e, const std::string& key, const std::string& what) const {
    throw ConfigError(source_, e.line, "key '" + key + "': " + what + " (got '" + e.raw + "')");
}

double ConfigFile::number(const std::string& key) const {
    const auto& e = entry(key);
    double v = 0.0;
    if (e.is_array || e.items.size() != 1 || !parse_double(e.items[0], v)) fail(e, key, "expected a number");
    return v;
}

double ConfigFile::number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

int ConfigFile::integer(const std::string& key) const {
    const auto& e = entry(key);
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(e, key, "expected an integer");
    return static_cast<int>(v);
}

int ConfigFile::integer_or(const std::string& key, int fallback) const {
    return has(key) ? integer(key) : fallback;
}

std::string ConfigFile::text(const std::string& key) const {
    const auto& e = entry(key);
    if (e.is_array) fail(e, key, "expected a single value");
    return e.items[0];
}

std::string ConfigFile::text_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
}

bool ConfigFile::boolean_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = text(key);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    fail(entry(key), key, "expected a boolean");
}

std::vector<double> ConfigFile::numbers(const std::string& key) const {
    const auto& e = entry(key);
    std::vector<double> out;
    for (const auto& item : e.items) {
        double v = 0.0;
        if (!parse_double(item, v)) fail(e, key, "expected numbers");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> ConfigFile::texts(const std::string& key) const { return entry(key).items; }

void ConfigFile::require_known(const std::vector<std::string>& allowed) const {
    const std::set<std::string> known(allowed.begin(), allowed.end());
    const Entry* worst = nullptr;
    std::string worst_key;
    for (const auto& [k, e] : entries_) {
        if (known.count(k)) continue;
        if (worst == nullptr || e.line < worst->line) {
            worst = &e;
            worst_key = k;
        }
    }
    if (worst != nullptr) throw ConfigError(source_, worst->line, "unknown key '" + worst_key + "'");
}

std::string ConfigFile::dump() const {
    std::ostringstream os;
    for (const auto& [k, e] : entries_) os << k << " = " << e.raw << '\n';
    return os.str();
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

const std::vector<std::string>& problem_keys() {
    static const std::vector<std::string> keys = {
        "carrier_frequency", "wavelength", "num_users", "num_antennas", "layers", "elements_x",
        "elements_z", "antenna_spacing", "antenna_spacing_wl", "element_spacing_x",
        "element_spacing_x_wl", "element_spacing_z", "element_spacing_z_wl", "layer_offsets",
        "layer_offsets_wl", "stack_depth", "stack_depth_wl", "antenna_area", "antenna_area_wl2",
        "element_area", "element_area_wl2", "morph_limit", "morph_limit_wl", "reference_offset_x",
        "reference_offset_z", "num_paths", "path_loss_exponent", "path_loss_reference_db",
        "noise_power", "noise_power_dbm", "user_distance_range", "user_angle_range",
        "scatterer_distance_range", "scatterer_angle_range", "max_power", "max_power_dbm",
        "step_morph", "step_morph_wl", "step_power", "step_power_rel", "step_phase", "tolerance",
        "max_iters", "mode", "line_search", "backtrack_factor", "armijo", "max_backtracks", "step_memory",
        "power_projection", "block_order", "seed", "gradcheck_layers", "gradcheck_elements_x",
        "gradcheck_elements_z", "gradcheck_users", "gradcheck_instances",
        "gradcheck_threshold_morph", "gradcheck_threshold_power", "gradcheck_threshold_phase"};
    return keys;
}

namespace {

// Length given either in metres (`key`) or in wavelengths (`key_wl`).
double length(const ConfigFile& f, const std::string& key, double lambda,
              std::optional<double> fallback_wl = std::nullopt) {
    if (f.has(key) && f.has(key + "_wl"))
        throw ConfigError(f.source(), 0, "give only one of '" + key + "' and '" + key + "_wl'");
    if (f.has(key)) return f.number(key);
    if (f.has(key + "_wl")) return f.number(key + "_wl") * lambda;
    if (fallback_wl) return *fallback_wl * lambda;
    throw ConfigError(f.source(), 0, "missing required key '" + key + "' (or '" + key + "_wl')");
}

double area(const ConfigFile& f, const std::string& key, double lambda) {
    if (f.has(key)) return f.number(key);
    if (f.has(key + "_wl2")) return f.number(key + "_wl2") * lambda * lambda;
    throw ConfigError(f.source(), 0, "missing required key '" + key + "' (or '" + key + "_wl2')");
}

std::pair<double, double> range(const ConfigFile& f, const std::string& key,
                                std::pair<double, double> fallback) {
    if (!f.has(key)) return fallback;
    const auto v = f.numbers(key);
    if (v.size() != 2) throw ConfigError(f.source(), 0, "key '" + key + "': expected [min, max]");
    return {v[0], v[1]};
}

template <typename Fn>
auto wrap(const ConfigFile& f, Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(f.source(), 0, e.what());
    }
}

}  // namespace

ProblemConfig load_problem(const ConfigFile& f) {
    f.require_known(problem_keys());
    ProblemConfig cfg;
    auto& g = cfg.geometry;

    if (f.has("wavelength")) {
        g.wavelength = f.number("wavelength");
    } else if (f.has("carrier_frequency")) {
        g.wavelength = kSpeedOfLight / f.number("carrier_frequency");
    } else {
        throw ConfigError(f.source(), 0, "missing required key 'carrier_frequency' (or 'wavelength')");
    }
    const double lambda = g.wavelength;
    g.num_users = f.integer("num_users");
    g.num_antennas = f.integer_or("num_antennas", g.num_users);
    g.layers = f.integer("layers");
    g.elements_x = f.integer("elements_x");
    g.elements_z = f.integer("elements_z");
    g.antenna_spacing = length(f, "antenna_spacing", lambda, 0.5);
    g.element_spacing_x = length(f, "element_spacing_x", lambda, 0.5);
    g.element_spacing_z = length(f, "element_spacing_z", lambda, 0.5);
    if (f.has("layer_offsets")) {
        g.layer_offsets = f.numbers("layer_offsets");
    } else if (f.has("layer_offsets_wl")) {
        g.layer_offsets = f.numbers("layer_offsets_wl");
        for (double& v : g.layer_offsets) v *= lambda;
    } else {
        const double depth = length(f, "stack_depth", lambda);
        g.layer_offsets.assign(static_cast<std::size_t>(std::max(g.layers, 0)), depth / g.layers);
    }
    g.antenna_area = area(f, "antenna_area", lambda);
    g.element_area = area(f, "element_area", lambda);
    g.morph_limit = length(f, "morph_limit", lambda);
    g.center_reference_offsets();
    g.reference_x = f.number_or("reference_offset_x", g.reference_x);
    g.reference_z = f.number_or("reference_offset_z", g.reference_z);
    wrap(f, [&] { g.validate(); return 0; });

    auto& s = cfg.scenario;
    s.num_paths = f.integer_or("num_paths", 6);
    s.path_loss_exponent = f.number_or("path_loss_exponent", 3.5);
    const std::string reference = f.text_or("path_loss_reference_db", "free_space");
    if (reference == "free_space") {
        s.reference_gain = free_space_reference_gain(lambda);
    } else {
        s.reference_gain = std::pow(10.0, f.number("path_loss_reference_db") / 10.0);
    }
    if (f.has("noise_power")) {
        s.noise_power = f.number("noise_power");
    } else {
        s.noise_power = dbm_to_watts(f.number("noise_power_dbm"));
    }
    std::tie(s.user_distance_min, s.user_distance_max) =
        range(f, "user_distance_range", {s.user_distance_min, s.user_distance_max});
    std::tie(s.user_angle_min, s.user_angle_max) =
        range(f, "user_angle_range", {s.user_angle_min, s.user_angle_max});
    std::tie(s.scatterer_distance_min, s.scatterer_distance_max) =
        range(f, "scatterer_distance_range", {s.scatterer_distance_min, s.scatterer_distance_max});
    std::tie(s.scatterer_angle_min, s.scatterer_angle_max) =
        range(f, "scatterer_angle_range", {s.scatterer_angle_min, s.scatterer_angle_max});
    wrap(f, [&] { s.validate(); return 0; });

    const double max_power =
        f.has("max_power") ? f.number("max_power") : dbm_to_watts(f.number("max_power_dbm"));
    const Mode mode = wrap(f, [&] { return parse_mode(f.text_or("mode", "sfim")); });
    auto& o = cfg.optimizer;
    o = OptimizerConfig::defaults(g, max_power, mode);
    if (f.has("step_morph")) o.step_morph = f.number("step_morph");
    if (f.has("step_morph_wl")) o.step_morph = f.number("step_morph_wl") * lambda;
    if (f.has("step_power")) o.step_power = f.number("step_power");
    if (f.has("step_power_rel")) o.step_power = f.number("step_power_rel") * std::sqrt(max_power);
    o.step_phase = f.number_or("step_phase", o.step_phase);
    o.tolerance = f.number_or("tolerance", o.tolerance);
    o.max_iters = f.integer_or("max_iters", o.max_iters);
    const std::string ls = f.text_or("line_search", "backtracking");
    if (ls == "backtracking") {
        o.line_search = LineSearch::Backtracking;
    } else if (ls == "off") {
        o.line_search = LineSearch::Off;
    } else {
        throw ConfigError(f.source(), 0, "key 'line_search': expected backtracking or off");
    }
    o.backtrack_factor = f.number_or("backtrack_factor", o.backtrack_factor);
    o.armijo = f.number_or("armijo", o.armijo);
    o.max_backtracks = f.integer_or("max_backtracks", o.max_backtracks);
    o.step_memory = f.boolean_or("step_memory", o.step_memory);
    const std::string proj = f.text_or("power_projection", "printed");
    if (proj == "printed") {
        o.power_projection = PowerProjection::Printed;
    } else if (proj == "exact") {
        o.power_projection = PowerProjection::Exact;
    } else {
        throw ConfigError(f.source(), 0, "key 'power_projection': expected printed or exact");
    }
    if (f.has("block_order")) {
        const auto blocks = f.texts("block_order");
        if (blocks.size() != 3) throw ConfigError(f.source(), 0, "key 'block_order': expected three blocks");
        for (std::size_t i = 0; i < 3; ++i)
            o.block_order[i] = wrap(f, [&] { return parse_block(blocks[i]); });
    }
    wrap(f, [&] { o.validate(); return 0; });
    cfg.seed = static_cast<std::uint64_t>(f.integer_or("seed", 1));
    return cfg;
}

GradientCheckConfig load_gradient_check(const ConfigFile& f) {
    GradientCheckConfig c;
    c.layers = f.integer_or("gradcheck_layers", c.layers);
    c.elements_x = f.integer_or("gradcheck_elements_x", c.elements_x);
    c.elements_z = f.integer_or("gradcheck_elements_z", c.elements_z);
    c.users = f.integer_or("gradcheck_users", c.users);
    c.instances = f.integer_or("gradcheck_instances", c.instances);
    c.threshold_morph = f.number_or("gradcheck_threshold_morph", c.threshold_morph);
    c.threshold_power = f.number_or("gradcheck_threshold_power", c.threshold_power);
    c.threshold_phase = f.number_or("gradcheck_threshold_phase", c.threshold_phase);
    return c;
}

}  // namespace sfim
