#include "sfim/channel.hpp"

#include <cmath>
#include <fstream>

namespace sfim {

namespace {

void check_axial(double axial_offset) {
    if (!(axial_offset > 0.0))
        throw DomainError("non-positive axial offset: receiver is not in front of transmitter");
}

}  // namespace

cd rs_entry(double area, double lateral_sq, double axial_offset, double wavelength) {
    check_axial(axial_offset);
    const double dist_sq = lateral_sq + axial_offset * axial_offset;
    const double dist = std::sqrt(dist_sq);
    const double w = area * axial_offset / dist_sq;
    const cd q(1.0 / (2.0 * kPi * dist), -1.0 / wavelength);
    const cd r = std::polar(1.0, 2.0 * kPi * dist / wavelength);
    return w * q * r;
}

cd rs_entry_axial_derivative(double area, double lateral_sq, double axial_offset,
                             double wavelength) {
    check_axial(axial_offset);
    const double dy = axial_offset;
    const double dist_sq = lateral_sq + dy * dy;
    const double dist = std::sqrt(dist_sq);
    const double w = area * dy / dist_sq;
    const double dw = area * (lateral_sq - dy * dy) / (dist_sq * dist_sq);
    const cd q(1.0 / (2.0 * kPi * dist), -1.0 / wavelength);
    const double dq = -dy / (2.0 * kPi * dist_sq * dist);
    const cd r = std::polar(1.0, 2.0 * kPi * dist / wavelength);
    const cd dr = cd(0.0, 2.0 * kPi * dy / (wavelength * dist)) * r;
    return dw * q * r + w * dq * r + w * q * dr;
}

ChannelModel::ChannelModel(SystemGeometry geometry) : geometry_(std::move(geometry)) {
    geometry_.validate();
    const int n_elem = geometry_.elements();
    lateral_.reserve(static_cast<std::size_t>(geometry_.layers));
    for (int layer = 1; layer <= geometry_.layers; ++layer) {
        const int n_tx = layer == 1 ? geometry_.num_antennas : n_elem;
        Eigen::MatrixXd rho(n_elem, n_tx);
        for (int m = 0; m < n_tx; ++m) {
            const auto tx = element_position(geometry_, layer - 1, m);
            for (int n = 0; n < n_elem; ++n) {
                const auto rx = element_position(geometry_, layer, n);
                const double dx = rx[0] - tx[0];
                const double dz = rx[2] - tx[2];
                rho(n, m) = dx * dx + dz * dz;
            }
        }
        lateral_.push_back(std::move(rho));
    }
}

const Eigen::MatrixXd& ChannelModel::lateral_sq(int layer) const {
    if (layer < 1 || layer > geometry_.layers) throw DomainError("hop index out of range");
    return lateral_[static_cast<std::size_t>(layer - 1)];
}

double ChannelModel::axial_offset(const Eigen::VectorXd& morph, int layer, int n, int m) const {
    const int n_elem = geometry_.elements();
    const double gap = geometry_.layer_offsets[static_cast<std::size_t>(layer - 1)];
    const double rx = morph[(layer - 1) * n_elem + n];
    const double tx = layer == 1 ? 0.0 : morph[(layer - 2) * n_elem + m];
    return gap + rx - tx;
}

Eigen::MatrixXcd ChannelModel::interlayer(const Eigen::VectorXd& morph, int layer) const {
    const auto& rho = lateral_sq(layer);
    const double area = geometry_.hop_area(layer);
    const double lambda = geometry_.wavelength;
    Eigen::MatrixXcd omega(rho.rows(), rho.cols());
    for (Eigen::Index m = 0; m < rho.cols(); ++m)
        for (Eigen::Index n = 0; n < rho.rows(); ++n)
            omega(n, m) = rs_entry(area, rho(n, m),
                                   axial_offset(morph, layer, static_cast<int>(n),
                                                static_cast<int>(m)),
                                   lambda);
    return omega;
}

void ChannelModel::interlayer_with_derivative(const Eigen::VectorXd& morph, int layer,
                                              Eigen::MatrixXcd& omega,
                                              Eigen::MatrixXcd& d_omega) const {
    const auto& rho = lateral_sq(layer);
    const double area = geometry_.hop_area(layer);
    const double lambda = geometry_.wavelength;
    omega.resize(rho.rows(), rho.cols());
    d_omega.resize(rho.rows(), rho.cols());
    for (Eigen::Index m = 0; m < rho.cols(); ++m) {
        for (Eigen::Index n = 0; n < rho.rows(); ++n) {
            const double dy =
                axial_offset(morph, layer, static_cast<int>(n), static_cast<int>(m));
            check_axial(dy);
            // Shares d, q and r between the entry and its derivative.
            const double rs = rho(n, m);
            const double dist_sq = rs + dy * dy;
            const double dist = std::sqrt(dist_sq);
            const double w = area * dy / dist_sq;
            const double dw = area * (rs - dy * dy) / (dist_sq * dist_sq);
            const cd q(1.0 / (2.0 * kPi * dist), -1.0 / lambda);
            const double dq = -dy / (2.0 * kPi * dist_sq * dist);
            const cd r = std::polar(1.0, 2.0 * kPi * dist / lambda);
            const cd dr = cd(0.0, 2.0 * kPi * dy / (lambda * dist)) * r;
            omega(n, m) = w * q * r;
            d_omega(n, m) = dw * q * r + w * dq * r + w * q * dr;
        }
    }
}

Eigen::MatrixXcd ChannelModel::interlayer_derivative(const Eigen::VectorXd& morph, int layer,
                                                    const Eigen::MatrixXcd& omega) const {
    const auto& rho = lateral_sq(layer);
    if (omega.rows() != rho.rows() || omega.cols() != rho.cols())
        throw std::invalid_argument("interlayer matrix does not match the hop");
    const double lambda = geometry_.wavelength;
    Eigen::MatrixXcd d_omega(rho.rows(), rho.cols());
    // Logarithmic derivative of w q r, so no trigonometry is repeated:
    // w'/w = (rho - dy^2) / (dy d^2), q'/q = -dy / (2 pi d^3 q), r'/r = j 2 pi dy / (lambda d).
    for (Eigen::Index m = 0; m < rho.cols(); ++m)
        for (Eigen::Index n = 0; n < rho.rows(); ++n) {
            const double dy = axial_offset(morph, layer, static_cast<int>(n), static_cast<int>(m));
            check_axial(dy);
            const double rs = rho(n, m);
            const double dist_sq = rs + dy * dy;
            const double dist = std::sqrt(dist_sq);
            const cd q(1.0 / (2.0 * kPi * dist), -1.0 / lambda);
            const cd log_derivative = (rs - dy * dy) / (dy * dist_sq) -
                                      dy / (2.0 * kPi * dist_sq * dist) / q +
                                      cd(0.0, 2.0 * kPi * dy / (lambda * dist));
            d_omega(n, m) = omega(n, m) * log_derivative;
        }
    return d_omega;
}

Eigen::VectorXcd ChannelModel::user_channel(const UserChannelParams& user,
                                            const Eigen::VectorXd& morph) const {
    const int n_elem = geometry_.elements();
    const int offset = (geometry_.layers - 1) * n_elem;
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(n_elem);
    for (int i = 0; i < user.path_count(); ++i) {
        const auto s = static_cast<std::size_t>(i);
        for (int u = 0; u < n_elem; ++u)
            h[u] += user.gains[s] * steering_element(geometry_, u, morph[offset + u],
                                                     user.azimuth[s], user.elevation[s]);
    }
    return h;
}

Eigen::VectorXcd ChannelModel::user_channel_derivative(const UserChannelParams& user,
                                                       const Eigen::VectorXd& morph) const {
    const int n_elem = geometry_.elements();
    const int offset = (geometry_.layers - 1) * n_elem;
    const double k0 = 2.0 * kPi / geometry_.wavelength;
    Eigen::VectorXcd dh = Eigen::VectorXcd::Zero(n_elem);
    for (int i = 0; i < user.path_count(); ++i) {
        const auto s = static_cast<std::size_t>(i);
        const double axial = std::sin(user.azimuth[s]) * std::sin(user.elevation[s]);
        const cd factor = cd(0.0, k0 * axial) * user.gains[s];
        for (int u = 0; u < n_elem; ++u)
            dh[u] += factor * steering_element(geometry_, u, morph[offset + u], user.azimuth[s],
                                               user.elevation[s]);
    }
    return dh;
}

Eigen::MatrixXcd build_interlayer(const SystemGeometry& geometry, const Eigen::VectorXd& morph,
                                  int layer) {
    return ChannelModel(geometry).interlayer(morph, layer);
}

cd steering_element(const SystemGeometry& geometry, int u, double final_morph, double azimuth,
                    double elevation) {
    const int col = u % geometry.elements_x;
    const int row = u / geometry.elements_x;
    const double psi = geometry.element_spacing_x * col * std::cos(azimuth) * std::sin(elevation) +
                       geometry.element_spacing_z * row * std::cos(elevation);
    const double path = psi + final_morph * std::sin(azimuth) * std::sin(elevation);
    return std::polar(1.0, 2.0 * kPi / geometry.wavelength * path);
}

Eigen::VectorXcd build_user_channel(const SystemGeometry& geometry, const UserChannelParams& user,
                                    const Eigen::VectorXd& morph) {
    return ChannelModel(geometry).user_channel(user, morph);
}

std::vector<Eigen::VectorXcd> build_cascade(const SystemGeometry& geometry,
                                            const Eigen::VectorXcd& phases,
                                            const std::vector<Eigen::VectorXcd>& user_channels,
                                            const std::vector<Eigen::MatrixXcd>& interlayer) {
    const int n_elem = geometry.elements();
    if (static_cast<int>(interlayer.size()) != geometry.layers ||
        phases.size() != geometry.design_size())
        throw std::invalid_argument("cascade inputs do not match the geometry");
    std::vector<Eigen::VectorXcd> cascaded;
    cascaded.reserve(user_channels.size());
    for (const auto& h : user_channels) {
        Eigen::VectorXcd row = h;
        for (int layer = geometry.layers; layer >= 1; --layer) {
            const auto& omega = interlayer[static_cast<std::size_t>(layer - 1)];
            row = omega.transpose() * row.cwiseProduct(phases.segment((layer - 1) * n_elem, n_elem));
        }
        cascaded.push_back(std::move(row));
    }
    return cascaded;
}

ChannelStack build_channels(const ChannelModel& model, const DesignState& state,
                            const Scenario& scenario) {
    const auto& g = model.geometry();
    if (state.morph.size() != g.design_size() || state.phases.size() != g.design_size() ||
        state.power.size() != g.num_users || static_cast<int>(scenario.size()) != g.num_users)
        throw std::invalid_argument("design state or scenario does not match the geometry");
    ChannelStack stack;
    stack.interlayer.reserve(static_cast<std::size_t>(g.layers));
    for (int layer = 1; layer <= g.layers; ++layer)
        stack.interlayer.push_back(model.interlayer(state.morph, layer));
    stack.user_channels.reserve(scenario.size());
    for (const auto& user : scenario) stack.user_channels.push_back(model.user_channel(user, state.morph));
    stack.cascaded = build_cascade(g, state.phases, stack.user_channels, stack.interlayer);
    return stack;
}

ChannelStack update_channels(const ChannelModel& model, const ChannelStack& previous,
                             const Eigen::VectorXd& previous_morph, const DesignState& state,
                             const Scenario& scenario) {
    const auto& g = model.geometry();
    if (previous_morph.size() != state.morph.size() ||
        static_cast<int>(previous.interlayer.size()) != g.layers)
        return build_channels(model, state, scenario);
    const int n_elem = g.elements();
    std::vector<bool> moved(static_cast<std::size_t>(g.layers));
    for (int layer = 0; layer < g.layers; ++layer)
        moved[static_cast<std::size_t>(layer)] =
            state.morph.segment(layer * n_elem, n_elem) != previous_morph.segment(layer * n_elem, n_elem);
    ChannelStack stack;
    stack.interlayer.reserve(static_cast<std::size_t>(g.layers));
    for (int layer = 1; layer <= g.layers; ++layer) {
        const bool stale = moved[static_cast<std::size_t>(layer - 1)] ||
                           (layer > 1 && moved[static_cast<std::size_t>(layer - 2)]);
        stack.interlayer.push_back(stale ? model.interlayer(state.morph, layer)
                                         : previous.interlayer[static_cast<std::size_t>(layer - 1)]);
    }
    if (moved.back()) {
        for (const auto& user : scenario) stack.user_channels.push_back(model.user_channel(user, state.morph));
    } else {
        stack.user_channels = previous.user_channels;
    }
    stack.cascaded = build_cascade(g, state.phases, stack.user_channels, stack.interlayer);
    return stack;
}

void write_complex_csv(const std::string& path, const Eigen::MatrixXcd& values) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.precision(17);
    out << "row,col,re,im\n";
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        for (Eigen::Index c = 0; c < values.cols(); ++c)
            out << r << ',' << c << ',' << values(r, c).real() << ',' << values(r, c).imag() << '\n';
}

}  // namespace sfim
