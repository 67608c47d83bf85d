#include "sfim/objective.hpp"

#include <cmath>

namespace sfim {

std::string to_string(Constraint c) {
    switch (c) {
        case Constraint::PowerBudget: return "power_budget";
        case Constraint::PowerNonneg: return "power_nonnegative";
        case Constraint::UnitModulus: return "unit_modulus";
        case Constraint::MorphRange: return "morph_range";
    }
    return "unknown";
}

RateReport evaluate_cascade(const std::vector<Eigen::VectorXcd>& cascaded,
                            const Eigen::VectorXd& power, const Scenario& scenario) {
    const auto users = static_cast<Eigen::Index>(cascaded.size());
    if (power.size() != users || static_cast<Eigen::Index>(scenario.size()) != users)
        throw std::invalid_argument("cascade, power and scenario sizes differ");
    RateReport report;
    report.J.resize(users, users);
    report.sinr.resize(users);
    report.rates.resize(users);
    for (Eigen::Index k = 0; k < users; ++k) {
        if (cascaded[static_cast<std::size_t>(k)].size() != users)
            throw std::invalid_argument("cascaded channel length must equal the antenna count");
        for (Eigen::Index i = 0; i < users; ++i)
            report.J(k, i) = power[i] * power[i] * std::norm(cascaded[static_cast<std::size_t>(k)][i]);
    }
    const double inv_ln2 = 1.0 / std::log(2.0);
    for (Eigen::Index k = 0; k < users; ++k) {
        const double noise = scenario[static_cast<std::size_t>(k)].noise_power;
        double interference = noise;
        for (Eigen::Index i = 0; i < users; ++i)
            if (i != k) interference += report.J(k, i);
        report.sinr[k] = report.J(k, k) / interference;
        // log1p keeps full relative accuracy at low SINR, where the difference
        // of two logarithms would cancel.
        report.rates[k] = std::log1p(report.sinr[k]) * inv_ln2;
    }
    report.sum_rate = report.rates.sum();
    return report;
}

double sum_rate(const std::vector<Eigen::VectorXcd>& cascaded, const Eigen::VectorXd& power,
                const Scenario& scenario) {
    return evaluate_cascade(cascaded, power, scenario).sum_rate;
}

RateReport evaluate(const ChannelModel& model, const DesignState& state, const Scenario& scenario,
                    double max_power) {
    const auto stack = build_channels(model, state, scenario);
    auto report = evaluate_cascade(stack.cascaded, state.power, scenario);
    report.feasible = check_feasibility(model.geometry(), state, max_power).empty();
    return report;
}

Eigen::MatrixXd interference_matrix_diag_form(const std::vector<Eigen::VectorXcd>& cascaded,
                                              const Eigen::VectorXd& power) {
    const auto users = static_cast<Eigen::Index>(cascaded.size());
    Eigen::MatrixXd J(users, users);
    for (Eigen::Index k = 0; k < users; ++k) {
        const Eigen::VectorXcd Gp = cascaded[static_cast<std::size_t>(k)].cwiseProduct(
            power.cast<cd>());
        for (Eigen::Index i = 0; i < users; ++i) {
            // ||G_k p_masked||^2 where only entry i of p is kept
            Eigen::VectorXcd masked = Eigen::VectorXcd::Zero(users);
            masked[i] = Gp[i];
            J(k, i) = masked.squaredNorm();
        }
    }
    return J;
}

std::vector<Constraint> check_feasibility(const SystemGeometry& geometry, const DesignState& state,
                                          double max_power) {
    std::vector<Constraint> violated;
    if (state.power.squaredNorm() > max_power * (1.0 + 1e-12)) violated.push_back(Constraint::PowerBudget);
    if ((state.power.array() < 0.0).any()) violated.push_back(Constraint::PowerNonneg);
    for (Eigen::Index i = 0; i < state.phases.size(); ++i) {
        if (std::abs(std::abs(state.phases[i]) - 1.0) > kUnitModulusTolerance) {
            violated.push_back(Constraint::UnitModulus);
            break;
        }
    }
    if ((state.morph.array().abs() > geometry.morph_limit).any())
        violated.push_back(Constraint::MorphRange);
    return violated;
}

nlohmann::json to_json(const RateReport& report) {
    nlohmann::json j;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index k = 0; k < report.J.rows(); ++k) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index i = 0; i < report.J.cols(); ++i) row.push_back(report.J(k, i));
        rows.push_back(std::move(row));
    }
    j["J"] = std::move(rows);
    j["sinr"] = std::vector<double>(report.sinr.data(), report.sinr.data() + report.sinr.size());
    j["rates"] = std::vector<double>(report.rates.data(), report.rates.data() + report.rates.size());
    j["sum_rate"] = report.sum_rate;
    j["feasible"] = report.feasible;
    return j;
}

}  // namespace sfim
