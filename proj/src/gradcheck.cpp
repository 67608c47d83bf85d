#include "sfim/gradcheck.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace sfim {

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& reference) {
    const double diff = (analytic - reference).norm();
    const double scale = reference.norm();
    return scale > 0.0 ? diff / scale : diff;
}

DesignState random_feasible_state(const SystemGeometry& geometry, double max_power,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    const int size = geometry.design_size();
    DesignState s;
    s.morph.resize(size);
    s.phases.resize(size);
    // Stay clear of the bounds so a finite-difference probe remains feasible.
    for (int i = 0; i < size; ++i) {
        s.morph[i] = 0.9 * geometry.morph_limit * (2.0 * unit() - 1.0);
        s.phases[i] = std::polar(1.0, 2.0 * kPi * unit());
    }
    s.power.resize(geometry.num_users);
    for (int k = 0; k < geometry.num_users; ++k) s.power[k] = 0.1 + unit();
    const double fraction = 0.2 + 0.8 * unit();
    s.power *= std::sqrt(fraction * max_power) / s.power.norm();
    return s;
}

std::vector<GradientCheckRow> run_gradient_check(const ConfigFile& base,
                                                 const GradientCheckConfig& check,
                                                 const std::vector<Block>& blocks,
                                                 std::uint64_t seed) {
    ConfigFile f = base;
    f.set("layers", std::to_string(check.layers));
    f.set("elements_x", std::to_string(check.elements_x));
    f.set("elements_z", std::to_string(check.elements_z));
    f.set("num_users", std::to_string(check.users));
    f.set("num_antennas", std::to_string(check.users));
    const ProblemConfig problem = load_problem(f);
    const auto& geo = problem.geometry;
    const ChannelModel model(geo);
    const double max_power = problem.optimizer.max_power;

    std::vector<GradientCheckRow> rows;
    for (Block block : blocks) {
        GradientCheckRow row;
        row.block = block;
        row.instances = check.instances;
        row.threshold = block == Block::Morph   ? check.threshold_morph
                        : block == Block::Power ? check.threshold_power
                                                : check.threshold_phase;
        rows.push_back(row);
    }
    for (int i = 0; i < check.instances; ++i) {
        const std::uint64_t instance_seed = derive_seed(seed, 7, static_cast<std::uint64_t>(i));
        const Scenario scenario = generate_scenario(geo, problem.scenario, instance_seed);
        const DesignState state = random_feasible_state(geo, max_power, derive_seed(instance_seed, 8, 0));
        const GradientBundle g = compute_gradients(model, state, scenario);
        for (auto& row : rows) {
            Eigen::VectorXd analytic, numeric;
            switch (row.block) {
                case Block::Morph:
                    analytic = g.d_morph;
                    numeric = fd_gradient(Block::Morph, model, state, scenario, 1e-5 * geo.wavelength).real();
                    break;
                case Block::Power:
                    analytic = g.d_power;
                    numeric = fd_gradient(Block::Power, model, state, scenario, 1e-5 * std::sqrt(max_power)).real();
                    break;
                case Block::Phase:
                    analytic = phase_tangent(g.d_phase, state.phases);
                    numeric = fd_gradient(Block::Phase, model, state, scenario, 1e-5).real();
                    break;
            }
            double err = relative_error(analytic, numeric);
            if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
            if (i == 0 || err > row.worst_error) {
                row.worst_error = err;
                row.worst_seed = instance_seed;
            }
        }
    }
    for (auto& row : rows) row.pass = row.worst_error < row.threshold;
    return rows;
}

}  // namespace sfim
