#include "sfim/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace sfim {

void OptimizerConfig::validate() const {
    if (!(step_morph > 0.0 && step_power > 0.0 && step_phase > 0.0))
        throw std::invalid_argument("step sizes must be positive");
    if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be nonnegative");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
    if (!(max_power > 0.0)) throw std::invalid_argument("max_power must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
        throw std::invalid_argument("backtrack_factor must lie in (0, 1)");
    if (!(armijo >= 0.0 && armijo < 1.0)) throw std::invalid_argument("armijo must lie in [0, 1)");
    if (max_backtracks < 0) throw std::invalid_argument("max_backtracks must be nonnegative");
}

OptimizerConfig OptimizerConfig::defaults(const SystemGeometry& geometry, double max_power,
                                          Mode mode) {
    OptimizerConfig c;
    c.step_morph = 1e-2 * geometry.wavelength;
    c.step_power = 1e-2 * std::sqrt(max_power);
    c.step_phase = 0.1;
    c.max_power = max_power;
    c.mode = mode;
    return c;
}

std::string Trace::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "iter,sum_rate,step_morph_taken,step_power_taken,step_phase_taken,feasible\n";
    for (const auto& r : records)
        os << r.iter << ',' << r.sum_rate << ',' << r.step_morph << ',' << r.step_power << ','
           << r.step_phase << ',' << (r.feasible ? 1 : 0) << '\n';
    return os.str();
}

Eigen::VectorXd project_morph(const Eigen::VectorXd& morph, double morph_limit) {
    return morph.cwiseMax(-morph_limit).cwiseMin(morph_limit);
}

Eigen::VectorXd project_power(const Eigen::VectorXd& power, double max_power,
                              PowerProjection variant) {
    Eigen::VectorXd p = power.cwiseMax(0.0);
    const double norm = p.norm();
    if (norm == 0.0) return p;
    if (variant == PowerProjection::Printed) {
        p = p.cwiseMin(std::sqrt(max_power) / norm);
    }
    // The entrywise cap alone can leave the budget exceeded when amplitudes
    // are below one; the radial rescale restores ||p||^2 <= P_max.
    const double budget = std::sqrt(max_power);
    const double capped = p.norm();
    if (capped > budget) p *= budget / capped;
    return p;
}

Eigen::VectorXcd project_phase(const Eigen::VectorXcd& phases) {
    Eigen::VectorXcd out(phases.size());
    for (Eigen::Index i = 0; i < phases.size(); ++i) {
        const double mag = std::abs(phases[i]);
        out[i] = mag == 0.0 ? cd(1.0, 0.0) : phases[i] / mag;
    }
    return out;
}

Eigen::VectorXd mask_morph_gradient(const Eigen::VectorXd& gradient, const SystemGeometry& geometry,
                                    Mode mode) {
    Eigen::VectorXd masked = gradient;
    const int n_elem = geometry.elements();
    if (mode == Mode::RSIM) masked.setZero();
    if (mode == Mode::HSIM) masked.head((geometry.layers - 1) * n_elem).setZero();
    return masked;
}

namespace {

// Interlayer matrices and user channels are shared between iterates that
// differ only in power or phases; `links->cascaded` may be stale, `cascaded`
// always matches `state`.
struct Point {
    DesignState state;
    std::shared_ptr<const ChannelStack> links;
    std::vector<Eigen::VectorXcd> cascaded;
    double rate = 0.0;
};

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }
bool all_finite(const Eigen::VectorXcd& v) {
    return v.real().allFinite() && v.imag().allFinite();
}

// Candidate for `block` at step `delta`, with the channels it needs.
Point make_candidate(Block block, const ChannelModel& model, const Scenario& scenario,
                     const Point& current, const Eigen::VectorXd& direction_real,
                     const Eigen::VectorXcd& direction_complex, double delta,
                     const OptimizerConfig& config) {
    Point next;
    next.state = current.state;
    const auto& geo = model.geometry();
    switch (block) {
        case Block::Morph:
            next.state.morph =
                project_morph(current.state.morph + delta * direction_real, geo.morph_limit);
            next.links = std::make_shared<const ChannelStack>(
                update_channels(model, *current.links, current.state.morph, next.state, scenario));
            next.cascaded = next.links->cascaded;
            break;
        case Block::Power:
            next.state.power = project_power(current.state.power + delta * direction_real,
                                             config.max_power, config.power_projection);
            next.links = current.links;
            next.cascaded = current.cascaded;
            break;
        case Block::Phase:
            next.state.phases = project_phase(current.state.phases + delta * direction_complex);
            next.links = current.links;
            next.cascaded =
                build_cascade(geo, next.state.phases, next.links->user_channels, next.links->interlayer);
            break;
    }
    next.rate = sum_rate(next.cascaded, next.state.power, scenario);
    return next;
}

// First-order increase predicted by the gradient for the realised displacement.
double predicted_increase(Block block, const Point& from, const Point& to,
                          const Eigen::VectorXd& gradient_real,
                          const Eigen::VectorXcd& gradient_complex) {
    switch (block) {
        case Block::Morph: return gradient_real.dot(to.state.morph - from.state.morph);
        case Block::Power: return gradient_real.dot(to.state.power - from.state.power);
        case Block::Phase:
            return (gradient_complex.conjugate().cwiseProduct(to.state.phases - from.state.phases))
                .real()
                .sum();
    }
    return 0.0;
}

struct BlockResult {
    Point point;
    double step_taken = 0.0;
};

BlockResult step_point(Block block, const ChannelModel& model, const Scenario& scenario,
                       const Point& current, const GradientBundle& gradient,
                       const OptimizerConfig& config, double initial_step) {
    const auto& geo = model.geometry();
    Eigen::VectorXd grad_real;
    Eigen::VectorXcd grad_complex, direction_complex;
    double delta = 0.0;
    switch (block) {
        case Block::Morph:
            if (!all_finite(gradient.d_morph)) throw NumericalError("non-finite morph gradient");
            grad_real = mask_morph_gradient(gradient.d_morph, geo, config.mode);
            break;
        case Block::Power:
            if (!all_finite(gradient.d_power)) throw NumericalError("non-finite power gradient");
            grad_real = gradient.d_power;
            break;
        case Block::Phase: {
            if (!all_finite(gradient.d_phase)) throw NumericalError("non-finite phase gradient");
            grad_complex = gradient.d_phase;
            // Each element moves by the same distance along its own ascent direction.
            direction_complex.resize(grad_complex.size());
            for (Eigen::Index i = 0; i < grad_complex.size(); ++i) {
                const double mag = std::abs(grad_complex[i]);
                direction_complex[i] = mag > 0.0 ? grad_complex[i] / mag : cd(0.0, 0.0);
            }
            break;
        }
    }
    delta = initial_step;
    const bool null_direction =
        block == Block::Phase ? direction_complex.cwiseAbs().maxCoeff() == 0.0
                              : grad_real.cwiseAbs().maxCoeff() == 0.0;
    if (null_direction) return {current, 0.0};

    if (config.line_search == LineSearch::Off) {
        Point next = make_candidate(block, model, scenario, current, grad_real, direction_complex,
                                    delta, config);
        if (!std::isfinite(next.rate)) throw NumericalError("non-finite sum rate after update");
        return {std::move(next), delta};
    }
    for (int attempt = 0; attempt <= config.max_backtracks; ++attempt) {
        Point next = make_candidate(block, model, scenario, current, grad_real, direction_complex,
                                    delta, config);
        const double predicted =
            predicted_increase(block, current, next, grad_real, grad_complex);
        if (std::isfinite(next.rate) && predicted > 0.0 &&
            next.rate >= current.rate + config.armijo * predicted)
            return {std::move(next), delta};
        delta *= config.backtrack_factor;
    }
    return {current, 0.0};
}

Point evaluate_point(const ChannelModel& model, const Scenario& scenario, DesignState state) {
    Point p;
    p.links = std::make_shared<const ChannelStack>(build_channels(model, state, scenario));
    p.cascaded = p.links->cascaded;
    p.rate = sum_rate(p.cascaded, state.power, scenario);
    p.state = std::move(state);
    return p;
}

double configured_step(Block block, const OptimizerConfig& config) {
    switch (block) {
        case Block::Morph: return config.step_morph;
        case Block::Power: return config.step_power;
        case Block::Phase: return config.step_phase;
    }
    return 0.0;
}

BlockSelection select(Block block, const SystemGeometry& geometry, Mode mode) {
    BlockSelection sel{block == Block::Morph, block == Block::Power, block == Block::Phase};
    // Layers the mode keeps rigid need no morph derivatives.
    if (mode == Mode::HSIM) sel.first_morph_layer = geometry.layers - 1;
    if (mode == Mode::RSIM) sel.first_morph_layer = geometry.layers;
    return sel;
}

}  // namespace

StepOutcome step_block(Block block, const ChannelModel& model, const Scenario& scenario,
                       const DesignState& state, const GradientBundle& gradient,
                       const OptimizerConfig& config, double current_rate) {
    Point current = evaluate_point(model, scenario, state);
    current.rate = current_rate;
    auto result = step_point(block, model, scenario, current, gradient, config,
                             configured_step(block, config));
    return {std::move(result.point.state), result.point.rate, result.step_taken};
}

StepOutcome step_block(Block block, const ChannelModel& model, const Scenario& scenario,
                       const DesignState& state, const GradientBundle& gradient,
                       const OptimizerConfig& config) {
    const double rate = sum_rate(build_channels(model, state, scenario).cascaded, state.power, scenario);
    return step_block(block, model, scenario, state, gradient, config, rate);
}

RunResult run_ao(const ChannelModel& model, const Scenario& scenario, const OptimizerConfig& config,
                 DesignState start) {
    config.validate();
    const auto& geo = model.geometry();
    // Start inside the feasible set so every traced iterate is feasible.
    start.morph = project_morph(start.morph, geo.morph_limit);
    if (config.mode == Mode::RSIM) start.morph.setZero();
    if (config.mode == Mode::HSIM) start.morph.head((geo.layers - 1) * geo.elements()).setZero();
    start.power = project_power(start.power, config.max_power, config.power_projection);
    start.phases = project_phase(start.phases);

    Point current = evaluate_point(model, scenario, std::move(start));
    if (!std::isfinite(current.rate)) throw NumericalError("non-finite initial sum rate");

    RunResult result;
    auto feasible = [&](const DesignState& s) {
        return check_feasibility(geo, s, config.max_power).empty();
    };
    result.trace.records.push_back({0, current.rate, 0.0, 0.0, 0.0, feasible(current.state)});
    result.state = current.state;
    result.sum_rate = current.rate;

    // With step memory each block's trial step starts one growth factor above
    // its last accepted step, capped at the configured step.
    std::array<double, 3> trial_step{config.step_morph, config.step_power, config.step_phase};
    double previous = current.rate;
    for (int t = 1; t <= config.max_iters; ++t) {
        TraceRecord record;
        record.iter = t;
        for (Block block : config.block_order) {
            if (block == Block::Morph && config.mode == Mode::RSIM) continue;
            GradientBundle gradient;
            if (block == Block::Power) {
                gradient.d_power = grad_power_from_cascade(current.cascaded, current.state.power, scenario);
            } else {
                gradient = compute_gradients(model, current.state, scenario,
                                             select(block, geo, config.mode), current.links.get());
            }
            double& start_step = trial_step[static_cast<std::size_t>(block)];
            auto step = step_point(block, model, scenario, current, gradient, config,
                                   config.step_memory ? start_step : configured_step(block, config));
            if (config.step_memory) {
                start_step = step.step_taken > 0.0 && config.line_search == LineSearch::Backtracking
                                 ? std::min(configured_step(block, config),
                                            step.step_taken / config.backtrack_factor)
                                 : configured_step(block, config);
            }
            current = std::move(step.point);
            switch (block) {
                case Block::Morph: record.step_morph = step.step_taken; break;
                case Block::Power: record.step_power = step.step_taken; break;
                case Block::Phase: record.step_phase = step.step_taken; break;
            }
        }
        record.sum_rate = current.rate;
        record.feasible = feasible(current.state);
        result.trace.records.push_back(record);
        result.iterations = t;
        if (record.feasible && current.rate > result.sum_rate) {
            result.sum_rate = current.rate;
            result.state = current.state;
            result.best_iter = t;
        }
        if (std::abs(current.rate - previous) <= config.tolerance) break;
        previous = current.rate;
    }
    return result;
}

RunResult run_ao(const ChannelModel& model, const Scenario& scenario, const OptimizerConfig& config,
                 std::uint64_t seed) {
    return run_ao(model, scenario, config,
                  initial_state(model.geometry(), config.mode, config.max_power, seed));
}

}  // namespace sfim
