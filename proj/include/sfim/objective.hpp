#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sfim/channel.hpp"

namespace sfim {

/// Constraints of the sum-rate problem.
enum class Constraint {
    PowerBudget,     // sum_k p_k^2 <= P_max
    PowerNonneg,     // p_k >= 0
    UnitModulus,     // |phi| = 1
    MorphRange,      // |y| <= morph limit
};

std::string to_string(Constraint c);

struct RateReport {
    Eigen::MatrixXd J;  // J(k, i) = |g_k^T p_i|^2
    Eigen::VectorXd sinr;
    Eigen::VectorXd rates;
    double sum_rate = 0.0;
    bool feasible = true;
};

/// Rate report from already-built cascaded channels.
RateReport evaluate_cascade(const std::vector<Eigen::VectorXcd>& cascaded,
                            const Eigen::VectorXd& power, const Scenario& scenario);

/// Builds every channel for `state` and evaluates SINR, rates and sum rate.
/// Infeasible states are evaluated and flagged, not rejected, when
/// `max_power` is given.
RateReport evaluate(const ChannelModel& model, const DesignState& state, const Scenario& scenario,
                    double max_power);

/// Sum rate only; same arithmetic as evaluate_cascade.
double sum_rate(const std::vector<Eigen::VectorXcd>& cascaded, const Eigen::VectorXd& power,
                const Scenario& scenario);

/// Interference terms via the diagonal form ||G_k Itilde_k p||^2, used as a cross-check.
Eigen::MatrixXd interference_matrix_diag_form(const std::vector<Eigen::VectorXcd>& cascaded,
                                              const Eigen::VectorXd& power);

inline constexpr double kUnitModulusTolerance = 1e-9;

std::vector<Constraint> check_feasibility(const SystemGeometry& geometry, const DesignState& state,
                                          double max_power);

nlohmann::json to_json(const RateReport& report);

}  // namespace sfim
