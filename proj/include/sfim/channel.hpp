#pragma once

#include <vector>

#include "sfim/geometry.hpp"

namespace sfim {

/// Rayleigh-Sommerfeld coefficient between two elements separated by a
/// squared lateral distance `lateral_sq` and an axial offset `axial_offset`.
///
///   d = sqrt(rho + dy^2),  w = A dy / d^2,  q = 1/(2 pi d) - j/lambda,
///   r = exp(j 2 pi d / lambda),  entry = w q r.
///
/// Throws DomainError unless axial_offset > 0.
cd rs_entry(double area, double lateral_sq, double axial_offset, double wavelength);

/// d(entry)/d(axial_offset), via the product rule on w, q and r.
cd rs_entry_axial_derivative(double area, double lateral_sq, double axial_offset,
                             double wavelength);

/// Every channel object for one design point.
struct ChannelStack {
    std::vector<Eigen::MatrixXcd> interlayer;     // hop l (0-based): N x M for l = 0, N x N after
    std::vector<Eigen::VectorXcd> user_channels;  // h_k, length N
    std::vector<Eigen::VectorXcd> cascaded;       // g_k, length M
};

/// Geometry plus the morph-independent lateral distances of every hop.
///
/// Lateral coordinates do not move with morphing, so the squared lateral
/// distances are computed once; only the axial offsets change afterwards.
class ChannelModel {
public:
    explicit ChannelModel(SystemGeometry geometry);

    const SystemGeometry& geometry() const { return geometry_; }

    /// Squared lateral distances of hop `layer` (1-based), rows = receivers.
    const Eigen::MatrixXd& lateral_sq(int layer) const;

    /// Axial offset between receiver n of `layer` and transmitter m of the
    /// previous layer (antenna m when layer = 1).
    double axial_offset(const Eigen::VectorXd& morph, int layer, int n, int m) const;

    Eigen::MatrixXcd interlayer(const Eigen::VectorXd& morph, int layer) const;

    /// Interlayer matrix and its elementwise derivative w.r.t. the axial offset.
    void interlayer_with_derivative(const Eigen::VectorXd& morph, int layer,
                                    Eigen::MatrixXcd& omega, Eigen::MatrixXcd& d_omega) const;

    /// Elementwise derivative from an already built `omega` for the same morph.
    Eigen::MatrixXcd interlayer_derivative(const Eigen::VectorXd& morph, int layer,
                                           const Eigen::MatrixXcd& omega) const;

    Eigen::VectorXcd user_channel(const UserChannelParams& user, const Eigen::VectorXd& morph) const;

    /// Elementwise derivative of h_k w.r.t. the final-layer morph of the same element.
    Eigen::VectorXcd user_channel_derivative(const UserChannelParams& user,
                                             const Eigen::VectorXd& morph) const;

private:
    SystemGeometry geometry_;
    std::vector<Eigen::MatrixXd> lateral_;
};

/// Free-function forms; each builds a throwaway ChannelModel.
Eigen::MatrixXcd build_interlayer(const SystemGeometry& geometry, const Eigen::VectorXd& morph,
                                  int layer);

/// Element u (zero-based) of the final-layer steering vector.
cd steering_element(const SystemGeometry& geometry, int u, double final_morph, double azimuth,
                    double elevation);

Eigen::VectorXcd build_user_channel(const SystemGeometry& geometry, const UserChannelParams& user,
                                    const Eigen::VectorXd& morph);

/// g_k^T = h_k^T Phi^L Omega^L ... Phi^1 Omega^1, evaluated right-to-left
/// from h_k^T as vector-matrix products.
std::vector<Eigen::VectorXcd> build_cascade(const SystemGeometry& geometry,
                                            const Eigen::VectorXcd& phases,
                                            const std::vector<Eigen::VectorXcd>& user_channels,
                                            const std::vector<Eigen::MatrixXcd>& interlayer);

ChannelStack build_channels(const ChannelModel& model, const DesignState& state,
                            const Scenario& scenario);

/// Rebuilds only the hops touched by a morph change from `previous_morph`
/// (hop l depends on layers l-1 and l) and refreshes the cascade.
ChannelStack update_channels(const ChannelModel& model, const ChannelStack& previous,
                             const Eigen::VectorXd& previous_morph, const DesignState& state,
                             const Scenario& scenario);

/// Writes (row, col, re, im) lines; vectors are written as a single column.
void write_complex_csv(const std::string& path, const Eigen::MatrixXcd& values);

}  // namespace sfim
