#include "sfim/gradients.hpp"

#include <algorithm>
#include <cmath>

namespace sfim {

std::string to_string(Block block) {
    switch (block) {
        case Block::Morph: return "morph";
        case Block::Power: return "power";
        case Block::Phase: return "phase";
    }
    return "unknown";
}

Block parse_block(const std::string& text) {
    if (text == "morph") return Block::Morph;
    if (text == "power") return Block::Power;
    if (text == "phase") return Block::Phase;
    throw std::invalid_argument("unknown block '" + text + "' (expected morph, power or phase)");
}

namespace {

// Rate-quotient weights: dR_sum = sum_{k,i} W(k,i) dJ(k,i).
Eigen::MatrixXd rate_weights(const Eigen::MatrixXd& J, const Scenario& scenario) {
    const Eigen::Index users = J.rows();
    const double inv_ln2 = 1.0 / std::log(2.0);
    Eigen::MatrixXd W(users, users);
    for (Eigen::Index k = 0; k < users; ++k) {
        double interference = scenario[static_cast<std::size_t>(k)].noise_power;
        for (Eigen::Index i = 0; i < users; ++i)
            if (i != k) interference += J(k, i);
        const double total = interference + J(k, k);
        for (Eigen::Index i = 0; i < users; ++i)
            W(k, i) = inv_ln2 * (1.0 / total - (i != k ? 1.0 / interference : 0.0));
    }
    return W;
}

}  // namespace

Eigen::VectorXd grad_power_from_cascade(const std::vector<Eigen::VectorXcd>& cascaded,
                                        const Eigen::VectorXd& power, const Scenario& scenario) {
    const auto users = static_cast<Eigen::Index>(cascaded.size());
    Eigen::MatrixXd gain_sq(users, users);
    for (Eigen::Index k = 0; k < users; ++k)
        gain_sq.row(k) = cascaded[static_cast<std::size_t>(k)].cwiseAbs2().transpose();
    const Eigen::MatrixXd J = gain_sq.array().rowwise() * power.array().square().transpose();
    const Eigen::MatrixXd W = rate_weights(J, scenario);
    Eigen::VectorXd grad(users);
    for (Eigen::Index j = 0; j < users; ++j)
        grad[j] = 2.0 * power[j] * (W.col(j).array() * gain_sq.col(j).array()).sum();
    return grad;
}

GradientBundle compute_gradients(const ChannelModel& model, const DesignState& state,
                                 const Scenario& scenario, BlockSelection blocks,
                                 const ChannelStack* cached) {
    const auto& geo = model.geometry();
    const int L = geo.layers;
    const int N = geo.elements();
    const int K = geo.num_users;
    const auto layer = [](int a) { return static_cast<std::size_t>(a); };

    if (static_cast<int>(scenario.size()) != K || state.morph.size() != geo.design_size() ||
        state.phases.size() != geo.design_size() || state.power.size() != K)
        throw std::invalid_argument("design state or scenario does not match the geometry");
    const bool reuse = cached != nullptr;
    const int first = std::clamp(blocks.first_morph_layer, 0, L);

    std::vector<Eigen::MatrixXcd> omega_owned, d_omega(blocks.morph ? layer(L) : 0);
    if (!reuse) {
        omega_owned.resize(layer(L));
        for (int a = 0; a < L; ++a) {
            if (blocks.morph && a >= first)
                model.interlayer_with_derivative(state.morph, a + 1, omega_owned[layer(a)],
                                                 d_omega[layer(a)]);
            else
                omega_owned[layer(a)] = model.interlayer(state.morph, a + 1);
        }
    } else if (blocks.morph) {
        for (int a = first; a < L; ++a)
            d_omega[layer(a)] = model.interlayer_derivative(state.morph, a + 1, cached->interlayer[layer(a)]);
    }
    const std::vector<Eigen::MatrixXcd>& omega = reuse ? cached->interlayer : omega_owned;
    auto phi = [&](int a) { return state.phases.segment(a * N, N); };

    Eigen::MatrixXcd H(N, K), dH;
    if (blocks.morph) dH.resize(N, K);
    for (int k = 0; k < K; ++k) {
        H.col(k) = reuse ? cached->user_channels[layer(k)]
                         : model.user_channel(scenario[layer(k)], state.morph);
        if (blocks.morph) dH.col(k) = model.user_channel_derivative(scenario[layer(k)], state.morph);
    }

    // Forward: U[a] is the field arriving at layer a for each stream (columns),
    // T[a] the field leaving it. T_in is diag(p) at the antennas.
    const Eigen::MatrixXcd T_in = state.power.cast<cd>().asDiagonal();
    std::vector<Eigen::MatrixXcd> U(layer(L)), T(layer(L));
    for (int a = 0; a < L; ++a) {
        U[layer(a)] = omega[layer(a)] * (a == 0 ? T_in : T[layer(a - 1)]);
        T[layer(a)] = phi(a).asDiagonal() * U[layer(a)];
    }
    // Backward: column k of C[a] satisfies s(k, i) = C[a].col(k) . T[a].col(i).
    std::vector<Eigen::MatrixXcd> C(layer(L));
    C[layer(L - 1)] = H;
    for (int a = L - 1; a >= 1; --a)
        C[layer(a - 1)] = omega[layer(a)].transpose() * (phi(a).asDiagonal() * C[layer(a)]);

    const Eigen::MatrixXcd S = C[layer(L - 1)].transpose() * T[layer(L - 1)];
    const Eigen::MatrixXd J = S.cwiseAbs2();
    const Eigen::MatrixXd W = rate_weights(J, scenario);
    // Qc(k,i) = W(k,i) conj(s(k,i)); dR = 2 Re sum W conj(s) ds.
    const Eigen::MatrixXcd Qc = W.cast<cd>().cwiseProduct(S.conjugate());

    GradientBundle out;
    if (blocks.morph) {
        out.d_morph = Eigen::VectorXd::Zero(L * N);
        for (int a = first; a < L; ++a) {
            const Eigen::MatrixXcd& T_prev = a == 0 ? T_in : T[layer(a - 1)];
            // Receiver-side term: row n of Omega_a depends on morph (a, n).
            const Eigen::MatrixXcd V = phi(a).asDiagonal() * (d_omega[layer(a)] * T_prev);
            Eigen::VectorXcd total = (C[layer(a)].cwiseProduct(V * Qc.transpose())).rowwise().sum();
            const Eigen::MatrixXcd TQ = T[layer(a)] * Qc.transpose();
            if (a < L - 1) {
                // Transmitter-side term: column n of Omega_{a+1}; d/dy_tx = -d/d(axial).
                const Eigen::MatrixXcd Y =
                    d_omega[layer(a + 1)].transpose() * (phi(a + 1).asDiagonal() * C[layer(a + 1)]);
                total -= Y.cwiseProduct(TQ).rowwise().sum();
            } else {
                total += dH.cwiseProduct(TQ).rowwise().sum();
            }
            out.d_morph.segment(a * N, N) = 2.0 * total.real();
        }
    }
    if (blocks.power) {
        std::vector<Eigen::VectorXcd> cascaded(layer(K));
        for (int k = 0; k < K; ++k)
            cascaded[layer(k)] = omega[0].transpose() * phi(0).cwiseProduct(C[0].col(k));
        out.d_power = grad_power_from_cascade(cascaded, state.power, scenario);
    }
    if (blocks.phase) {
        out.d_phase.resize(L * N);
        for (int a = 0; a < L; ++a) {
            const Eigen::VectorXcd inner =
                (C[layer(a)].cwiseProduct(U[layer(a)] * Qc.transpose())).rowwise().sum();
            out.d_phase.segment(a * N, N) = 2.0 * inner.conjugate();
        }
    }
    return out;
}

Eigen::VectorXd grad_morph(const ChannelModel& model, const DesignState& state,
                           const Scenario& scenario) {
    return compute_gradients(model, state, scenario, {true, false, false}).d_morph;
}

Eigen::VectorXd grad_power(const ChannelModel& model, const DesignState& state,
                           const Scenario& scenario) {
    return compute_gradients(model, state, scenario, {false, true, false}).d_power;
}

Eigen::VectorXcd grad_phase(const ChannelModel& model, const DesignState& state,
                            const Scenario& scenario) {
    return compute_gradients(model, state, scenario, {false, false, true}).d_phase;
}

Eigen::VectorXd phase_tangent(const Eigen::VectorXcd& d_phase, const Eigen::VectorXcd& phases) {
    // phi -> phi exp(j theta): dphi/dtheta = j phi, dR = Re(conj(G) dphi).
    return (d_phase.conjugate().cwiseProduct(phases * cd(0.0, 1.0))).real();
}

Eigen::VectorXcd fd_gradient(Block block, const ChannelModel& model, const DesignState& state,
                             const Scenario& scenario, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
    auto rate = [&](const DesignState& s) {
        return sum_rate(build_channels(model, s, scenario).cascaded, s.power, scenario);
    };
    DesignState probe = state;
    Eigen::VectorXcd out;
    switch (block) {
        case Block::Morph: {
            out.resize(state.morph.size());
            for (Eigen::Index i = 0; i < state.morph.size(); ++i) {
                probe.morph[i] = state.morph[i] + step;
                const double up = rate(probe);
                probe.morph[i] = state.morph[i] - step;
                const double down = rate(probe);
                probe.morph[i] = state.morph[i];
                out[i] = (up - down) / (2.0 * step);
            }
            break;
        }
        case Block::Power: {
            // Channels do not depend on power; reuse the cascade.
            const auto cascaded = build_channels(model, state, scenario).cascaded;
            out.resize(state.power.size());
            for (Eigen::Index i = 0; i < state.power.size(); ++i) {
                probe.power[i] = state.power[i] + step;
                const double up = sum_rate(cascaded, probe.power, scenario);
                probe.power[i] = state.power[i] - step;
                const double down = sum_rate(cascaded, probe.power, scenario);
                probe.power[i] = state.power[i];
                out[i] = (up - down) / (2.0 * step);
            }
            break;
        }
        case Block::Phase: {
            out.resize(state.phases.size());
            const cd up_rot = std::polar(1.0, step);
            const cd down_rot = std::polar(1.0, -step);
            for (Eigen::Index i = 0; i < state.phases.size(); ++i) {
                probe.phases[i] = state.phases[i] * up_rot;
                const double up = rate(probe);
                probe.phases[i] = state.phases[i] * down_rot;
                const double down = rate(probe);
                probe.phases[i] = state.phases[i];
                out[i] = (up - down) / (2.0 * step);
            }
            break;
        }
    }
    return out;
}

}  // namespace sfim
