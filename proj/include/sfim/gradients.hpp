#pragma once

#include "sfim/objective.hpp"

namespace sfim {

enum class Block { Morph, Power, Phase };

std::string to_string(Block block);
Block parse_block(const std::string& text);

/// Analytic gradients of the sum rate.
///
/// `d_phase` is the real ascent direction dR/dRe(phi) + j dR/dIm(phi); moving
/// phi along it increases the sum rate to first order.
struct GradientBundle {
    Eigen::VectorXd d_morph;
    Eigen::VectorXd d_power;
    Eigen::VectorXcd d_phase;
};

struct BlockSelection {
    bool morph = true;
    bool power = true;
    bool phase = true;
    int first_morph_layer = 0;  // morph entries of earlier (0-based) layers are left zero
};

/// Computes the selected block gradients from one shared set of forward
/// (transmit-side) and backward (user-side) cascade products. `cached`, when
/// given, must be built for the same morph; it supplies the interlayer
/// matrices and user channels (its cascaded channels are not read).
GradientBundle compute_gradients(const ChannelModel& model, const DesignState& state,
                                 const Scenario& scenario, BlockSelection blocks = {},
                                 const ChannelStack* cached = nullptr);

Eigen::VectorXd grad_morph(const ChannelModel& model, const DesignState& state,
                           const Scenario& scenario);
Eigen::VectorXd grad_power(const ChannelModel& model, const DesignState& state,
                           const Scenario& scenario);
Eigen::VectorXcd grad_phase(const ChannelModel& model, const DesignState& state,
                            const Scenario& scenario);

/// Power gradient from the cascaded channels alone (power block does not
/// need the stack intermediates).
Eigen::VectorXd grad_power_from_cascade(const std::vector<Eigen::VectorXcd>& cascaded,
                                        const Eigen::VectorXd& power, const Scenario& scenario);

/// Central finite differences of the sum rate for one block.
///
/// Morph and power entries are perturbed by +-step. Phase entries are rotated
/// by exp(+-j step), so the phase result is dR/dtheta (real, stored in the
/// real part), the tangent component of the phase gradient.
Eigen::VectorXcd fd_gradient(Block block, const ChannelModel& model, const DesignState& state,
                             const Scenario& scenario, double step);

/// Tangent (rotation) derivative dR/dtheta_n implied by an ascent direction.
Eigen::VectorXd phase_tangent(const Eigen::VectorXcd& d_phase, const Eigen::VectorXcd& phases);

}  // namespace sfim
