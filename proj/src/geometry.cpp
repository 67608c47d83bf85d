#include "sfim/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace sfim {

namespace {

// Portable draws: the std distributions are implementation-defined, which
// would make seeded scenarios differ between standard libraries.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

cd standard_complex_normal(std::mt19937_64& rng) {
    // Box-Muller; u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    const double radius = std::sqrt(-std::log(u1));
    return std::polar(radius, 2.0 * kPi * u2);
}

void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

}  // namespace

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::SFIM: return "sfim";
        case Mode::HSIM: return "hsim";
        case Mode::RSIM: return "rsim";
    }
    return "unknown";
}

Mode parse_mode(const std::string& text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "sfim") return Mode::SFIM;
    if (lower == "hsim") return Mode::HSIM;
    if (lower == "rsim") return Mode::RSIM;
    throw std::invalid_argument("unknown mode '" + text + "' (expected sfim, hsim or rsim)");
}

void SystemGeometry::validate() const {
    require(wavelength > 0.0, "wavelength must be positive");
    require(num_users >= 1, "num_users must be at least 1");
    require(num_antennas == num_users, "num_antennas must equal num_users");
    require(layers >= 1, "layers must be at least 1");
    require(elements_x >= 1 && elements_z >= 1, "elements_x and elements_z must be at least 1");
    require(antenna_spacing > 0.0, "antenna_spacing must be positive");
    require(element_spacing_x > 0.0 && element_spacing_z > 0.0,
            "element spacings must be positive");
    require(static_cast<int>(layer_offsets.size()) == layers,
            "layer_offsets must have one entry per layer");
    for (double offset : layer_offsets) require(offset > 0.0, "layer offsets must be positive");
    require(antenna_area > 0.0 && element_area > 0.0, "areas must be positive");
    require(morph_limit >= 0.0, "morph_limit must be nonnegative");
    const double min_gap = *std::min_element(layer_offsets.begin(), layer_offsets.end());
    if (!(morph_limit < min_gap / 2.0)) {
        std::ostringstream os;
        os << "morph_limit " << morph_limit << " m must be below half the smallest layer gap ("
           << min_gap / 2.0 << " m)";
        throw std::invalid_argument(os.str());
    }
}

void SystemGeometry::center_reference_offsets() {
    const double array_center = 0.5 * antenna_spacing * (num_antennas - 1);
    reference_x = -0.5 * element_spacing_x * (elements_x - 1);
    reference_z = -0.5 * element_spacing_z * (elements_z - 1) + array_center;
}

SystemGeometry make_uniform_geometry(double wavelength, int users, int layers, int elements_x,
                                     int elements_z, double stack_depth, double antenna_spacing,
                                     double element_spacing, double antenna_area,
                                     double element_area, double morph_limit) {
    SystemGeometry g;
    g.wavelength = wavelength;
    g.num_users = users;
    g.num_antennas = users;
    g.layers = layers;
    g.elements_x = elements_x;
    g.elements_z = elements_z;
    g.antenna_spacing = antenna_spacing;
    g.element_spacing_x = element_spacing;
    g.element_spacing_z = element_spacing;
    g.layer_offsets.assign(static_cast<std::size_t>(layers), stack_depth / layers);
    g.antenna_area = antenna_area;
    g.element_area = element_area;
    g.morph_limit = morph_limit;
    g.center_reference_offsets();
    return g;
}

std::array<double, 3> element_position(const SystemGeometry& geometry, int layer, int index,
                                       double morph_value) {
    if (layer < 0 || layer > geometry.layers)
        throw DomainError("layer " + std::to_string(layer) + " out of range");
    if (layer == 0) {
        if (index < 0 || index >= geometry.num_antennas)
            throw DomainError("antenna index " + std::to_string(index) + " out of range");
        return {0.0, 0.0, index * geometry.antenna_spacing};
    }
    if (index < 0 || index >= geometry.elements())
        throw DomainError("element index " + std::to_string(index) + " out of range");
    if (std::abs(morph_value) > geometry.morph_limit)
        throw DomainError("morph value exceeds the morphing limit");
    double depth = 0.0;
    for (int u = 0; u < layer; ++u) depth += geometry.layer_offsets[static_cast<std::size_t>(u)];
    const int col = index % geometry.elements_x;
    const int row = index / geometry.elements_x;
    return {geometry.reference_x + geometry.element_spacing_x * col, depth + morph_value,
            geometry.reference_z + geometry.element_spacing_z * row};
}

void ScenarioModel::validate() const {
    require(num_paths >= 1, "num_paths must be at least 1");
    require(noise_power > 0.0, "noise power must be positive");
    require(path_loss_exponent > 0.0, "path_loss_exponent must be positive");
    require(reference_gain > 0.0, "reference path gain must be positive");
    require(user_distance_min > 0.0 && user_distance_min <= user_distance_max,
            "user distance range must be positive and ordered");
    require(scatterer_distance_min > 0.0 && scatterer_distance_min <= scatterer_distance_max,
            "scatterer distance range must be positive and ordered");
    require(user_angle_min <= user_angle_max, "user angle range must be ordered");
    require(scatterer_angle_min <= scatterer_angle_max, "scatterer angle range must be ordered");
}

cd draw_path_gain(std::mt19937_64& rng, bool line_of_sight, double distance, double exponent,
                  int paths, double reference_gain) {
    const double mean_power = reference_gain * std::pow(distance, -exponent);
    if (line_of_sight) return std::polar(std::sqrt(mean_power), uniform(rng, 0.0, 2.0 * kPi));
    const double variance = mean_power / std::max(paths - 1, 1);
    return std::sqrt(variance) * standard_complex_normal(rng);
}

Scenario generate_scenario(const SystemGeometry& geometry, const ScenarioModel& model,
                           std::uint64_t seed) {
    geometry.validate();
    model.validate();
    std::mt19937_64 rng(seed);
    Scenario scenario(static_cast<std::size_t>(geometry.num_users));
    for (auto& user : scenario) {
        const int paths = model.num_paths;
        user.noise_power = model.noise_power;
        user.gains.resize(static_cast<std::size_t>(paths));
        user.azimuth.resize(static_cast<std::size_t>(paths));
        user.elevation.resize(static_cast<std::size_t>(paths));

        user.distance = uniform(rng, model.user_distance_min, model.user_distance_max);
        user.azimuth[0] = uniform(rng, model.user_angle_min, model.user_angle_max);
        user.elevation[0] = uniform(rng, model.user_angle_min, model.user_angle_max);
        user.gains[0] = draw_path_gain(rng, true, user.distance, model.path_loss_exponent, paths,
                                       model.reference_gain);
        for (int i = 1; i < paths; ++i) {
            const auto s = static_cast<std::size_t>(i);
            const double d = uniform(rng, model.scatterer_distance_min, model.scatterer_distance_max);
            user.azimuth[s] = uniform(rng, model.scatterer_angle_min, model.scatterer_angle_max);
            user.elevation[s] = uniform(rng, model.scatterer_angle_min, model.scatterer_angle_max);
            user.gains[s] = draw_path_gain(rng, false, d, model.path_loss_exponent, paths,
                                            model.reference_gain);
        }
    }
    return scenario;
}

DesignState initial_state(const SystemGeometry& geometry, Mode /*mode*/, double max_power,
                          std::uint64_t seed) {
    // Every mode starts from the same rigid point so paired comparisons share it.
    const int size = geometry.design_size();
    std::mt19937_64 rng(seed);
    DesignState state;
    state.morph = Eigen::VectorXd::Zero(size);
    state.phases.resize(size);
    for (int i = 0; i < size; ++i) state.phases[i] = std::polar(1.0, uniform(rng, 0.0, 2.0 * kPi));
    state.power = Eigen::VectorXd::Constant(geometry.num_users,
                                            std::sqrt(max_power / geometry.num_users));
    return state;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ stream) ^ index);
}

}  // namespace sfim
