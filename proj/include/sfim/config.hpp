#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sfim/optimizer.hpp"

namespace sfim {

/// Malformed or incomplete configuration. `line()` is 0 when the problem is
/// not tied to a line (e.g. a missing key).
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& message);
    int line() const { return line_; }

private:
    int line_;
};

/// Flat `key = value` text with `#` comments and `[a, b, ...]` arrays.
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text, std::string source = "<string>");
    static ConfigFile load(const std::string& path);

    const std::string& source() const { return source_; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::vector<std::string> keys() const;

    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    int integer(const std::string& key) const;
    int integer_or(const std::string& key, int fallback) const;
    std::string text(const std::string& key) const;
    std::string text_or(const std::string& key, const std::string& fallback) const;
    bool boolean_or(const std::string& key, bool fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<std::string> texts(const std::string& key) const;
    /// Value exactly as written (arrays include their brackets).
    const std::string& raw(const std::string& key) const { return entry(key).raw; }
    int line_of(const std::string& key) const { return has(key) ? entry(key).line : 0; }

    /// Adds or replaces a value (raw text, parsed like a file value).
    void set(const std::string& key, const std::string& raw_value);
    void erase(const std::string& key) { entries_.erase(key); }

    /// Rejects keys outside `allowed`, reporting the line of the first one.
    void require_known(const std::vector<std::string>& allowed) const;

    /// Canonical `key = value` listing, sorted by key.
    std::string dump() const;

private:
    struct Entry {
        std::string raw;
        std::vector<std::string> items;
        bool is_array = false;
        int line = 0;
    };
    const Entry& entry(const std::string& key) const;
    [[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& what) const;

    std::string source_;
    std::map<std::string, Entry> entries_;
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

/// Fully resolved problem: geometry, scenario model and optimizer settings.
struct ProblemConfig {
    SystemGeometry geometry;
    ScenarioModel scenario;
    OptimizerConfig optimizer;
    std::uint64_t seed = 1;
};

/// Keys understood by load_problem.
const std::vector<std::string>& problem_keys();

ProblemConfig load_problem(const ConfigFile& file);

/// Gradient-check suite settings (instance dimensions and thresholds).
struct GradientCheckConfig {
    int layers = 3;
    int elements_x = 3;
    int elements_z = 3;
    int users = 2;
    int instances = 100;
    double threshold_morph = 1e-5;
    double threshold_power = 1e-5;
    double threshold_phase = 1e-4;
};

GradientCheckConfig load_gradient_check(const ConfigFile& file);

}  // namespace sfim
