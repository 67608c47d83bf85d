#pragma once

#include <random>
#include <string>

#include "sfim/config.hpp"

#ifndef SFIM_SOURCE_DIR
#define SFIM_SOURCE_DIR "."
#endif

namespace testing {

inline std::string defaults_path() { return std::string(SFIM_SOURCE_DIR) + "/configs/paper_defaults.cfg"; }

inline sfim::ConfigFile defaults_file() { return sfim::ConfigFile::load(defaults_path()); }

// Default physics with smaller dimensions.
inline sfim::ProblemConfig small_problem(int layers, int nx, int nz, int users,
                                         const std::string& mode = "sfim") {
    auto f = defaults_file();
    f.set("layers", std::to_string(layers));
    f.set("elements_x", std::to_string(nx));
    f.set("elements_z", std::to_string(nz));
    f.set("num_users", std::to_string(users));
    f.set("num_antennas", std::to_string(users));
    f.set("mode", mode);
    return sfim::load_problem(f);
}

// Random feasible state: morph inside a fraction of the limit, unit phases,
// equal small amplitudes.
inline sfim::DesignState random_state(const sfim::SystemGeometry& g, std::uint64_t seed,
                                      double morph_fraction = 0.9, double amplitude = 0.1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    sfim::DesignState s;
    s.morph.resize(g.design_size());
    s.phases.resize(g.design_size());
    for (int i = 0; i < g.design_size(); ++i) {
        s.morph[i] = morph_fraction * g.morph_limit * u(rng);
        s.phases[i] = std::polar(1.0, sfim::kPi * u(rng));
    }
    s.power = Eigen::VectorXd::Constant(g.num_users, amplitude);
    return s;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
inline std::vector<std::complex<double>> to_std(const Eigen::VectorXcd& v) {
    return {v.data(), v.data() + v.size()};
}

inline double wavelength() { return sfim::kSpeedOfLight / 28e9; }

}  // namespace testing
