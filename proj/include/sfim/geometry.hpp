#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sfim {

using cd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Raised when a geometric or numerical precondition is violated
/// (out-of-range index, morph outside its limit, non-positive axial offset).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Which layers are allowed to morph.
enum class Mode { SFIM, HSIM, RSIM };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

/// Physical layout of the transmit array and the stacked layers.
///
/// Layers are numbered 1..L; layer 0 denotes the transmit antenna array.
/// `layer_offsets[l-1]` is the axial gap between the rigid planes of
/// layer l-1 and layer l.
struct SystemGeometry {
    double wavelength = 0.0;
    int num_users = 0;
    int num_antennas = 0;
    int layers = 0;
    int elements_x = 0;
    int elements_z = 0;
    double antenna_spacing = 0.0;
    double element_spacing_x = 0.0;
    double element_spacing_z = 0.0;
    std::vector<double> layer_offsets;
    double antenna_area = 0.0;
    double element_area = 0.0;
    double morph_limit = 0.0;
    double reference_x = 0.0;
    double reference_z = 0.0;

    int elements() const { return elements_x * elements_z; }
    int design_size() const { return layers * elements(); }

    /// Effective aperture of the transmitting side of hop `layer` (1-based).
    double hop_area(int layer) const { return layer == 1 ? antenna_area : element_area; }

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const;

    /// x/z offsets that centre each layer on the transmit array boresight.
    void center_reference_offsets();
};

/// Builds a geometry with uniform layer gaps `stack_depth / layers`,
/// antenna count equal to the user count, and centred reference offsets.
SystemGeometry make_uniform_geometry(double wavelength, int users, int layers, int elements_x,
                                     int elements_z, double stack_depth, double antenna_spacing,
                                     double element_spacing, double antenna_area,
                                     double element_area, double morph_limit);

/// Position of an antenna (layer 0) or a meta-atom (layer >= 1).
/// Indices are zero-based. The y coordinate is cumulative along the stack.
std::array<double, 3> element_position(const SystemGeometry& geometry, int layer, int index,
                                       double morph_value = 0.0);

/// Multipath description of the link from the final layer to one user.
/// Path 0 is the line-of-sight path.
struct UserChannelParams {
    std::vector<cd> gains;
    std::vector<double> azimuth;
    std::vector<double> elevation;
    double noise_power = 0.0;
    double distance = 0.0;

    int path_count() const { return static_cast<int>(gains.size()); }
};

using Scenario = std::vector<UserChannelParams>;

/// Random-draw ranges for user and scatterer placement.
struct ScenarioModel {
    int num_paths = 6;
    double path_loss_exponent = 3.5;
    double reference_gain = 1.0;  // linear gain at 1 m, multiplies d^-exponent
    double noise_power = 0.0;
    double user_distance_min = 95.0;
    double user_distance_max = 105.0;
    double user_angle_min = -kPi / 4.0;
    double user_angle_max = kPi / 4.0;
    double scatterer_distance_min = 50.0;
    double scatterer_distance_max = 105.0;
    double scatterer_angle_min = -kPi / 2.0;
    double scatterer_angle_max = -kPi / 4.0;

    void validate() const;
};

/// LoS gain at distance d: sqrt(C0 d^-ple) with a uniform random phase.
/// NLoS gains: circularly symmetric Gaussian with variance C0 d^-ple / (I-1).
cd draw_path_gain(std::mt19937_64& rng, bool line_of_sight, double distance, double exponent,
                  int paths, double reference_gain = 1.0);

/// Free-space gain (lambda / 4 pi)^2 at the 1 m reference distance.
inline double free_space_reference_gain(double wavelength) {
    const double r = wavelength / (4.0 * kPi);
    return r * r;
}

/// Draws a scenario for every user; deterministic in `seed`.
Scenario generate_scenario(const SystemGeometry& geometry, const ScenarioModel& model,
                           std::uint64_t seed);

/// The three optimization blocks. Index (l, n) maps to l * N + n (zero-based).
struct DesignState {
    Eigen::VectorXd morph;
    Eigen::VectorXcd phases;
    Eigen::VectorXd power;  // amplitudes, power_k = power[k]^2
};

/// Rigid start, uniformly random phases, full-budget uniform power split.
DesignState initial_state(const SystemGeometry& geometry, Mode mode, double max_power,
                          std::uint64_t seed);

/// Mixes a base seed with stream identifiers (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace sfim
