#pragma once

#include <array>
#include <string>
#include <vector>

#include "sfim/gradients.hpp"

namespace sfim {

/// Raised when a gradient or objective becomes non-finite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LineSearch { Off, Backtracking };

/// `Printed` clips to nonnegative, then caps each entry at sqrt(P)/||p||, then
/// rescales radially if the budget is still exceeded. `Exact` is the
/// Euclidean projection onto {p >= 0, ||p||^2 <= P} (clip, then rescale).
enum class PowerProjection { Printed, Exact };

struct OptimizerConfig {
    double step_morph = 0.0;
    double step_power = 0.0;
    double step_phase = 0.1;
    double tolerance = 1e-6;
    int max_iters = 200;
    double max_power = 0.0;
    Mode mode = Mode::SFIM;
    LineSearch line_search = LineSearch::Backtracking;
    double backtrack_factor = 0.5;
    double armijo = 1e-4;
    int max_backtracks = 40;
    bool step_memory = true;  // start each backtracking search near the last accepted step
    PowerProjection power_projection = PowerProjection::Printed;
    std::array<Block, 3> block_order{Block::Morph, Block::Power, Block::Phase};

    void validate() const;

    /// Default steps: 1e-2 lambda (morph), 1e-2 sqrt(P_max) (power), 0.1 (phase).
    static OptimizerConfig defaults(const SystemGeometry& geometry, double max_power, Mode mode);
};

struct TraceRecord {
    int iter = 0;
    double sum_rate = 0.0;
    double step_morph = 0.0;
    double step_power = 0.0;
    double step_phase = 0.0;
    bool feasible = true;
};

struct Trace {
    std::vector<TraceRecord> records;

    /// iter,sum_rate,step_morph_taken,step_power_taken,step_phase_taken,feasible
    std::string to_csv() const;
};

Eigen::VectorXd project_morph(const Eigen::VectorXd& morph, double morph_limit);
Eigen::VectorXd project_power(const Eigen::VectorXd& power, double max_power,
                              PowerProjection variant = PowerProjection::Printed);
Eigen::VectorXcd project_phase(const Eigen::VectorXcd& phases);

/// Zeroes the morph entries the mode keeps rigid.
Eigen::VectorXd mask_morph_gradient(const Eigen::VectorXd& gradient, const SystemGeometry& geometry,
                                    Mode mode);

struct StepOutcome {
    DesignState state;
    double sum_rate = 0.0;
    double step_taken = 0.0;  // 0 when the block was skipped
};

/// One projected-gradient update of `block`. `gradient` must be the block
/// gradient at `state` (real for morph and power, complex for phase).
/// With backtracking the step shrinks until the sum rate rises by at least
/// armijo * <gradient, actual displacement>; the block is skipped if that
/// never happens.
StepOutcome step_block(Block block, const ChannelModel& model, const Scenario& scenario,
                       const DesignState& state, const GradientBundle& gradient,
                       const OptimizerConfig& config);
StepOutcome step_block(Block block, const ChannelModel& model, const Scenario& scenario,
                       const DesignState& state, const GradientBundle& gradient,
                       const OptimizerConfig& config, double current_rate);

struct RunResult {
    DesignState state;       // best feasible iterate
    double sum_rate = 0.0;   // its sum rate
    int best_iter = 0;
    int iterations = 0;
    Trace trace;
};

/// Alternating projected-gradient ascent from `start`.
RunResult run_ao(const ChannelModel& model, const Scenario& scenario, const OptimizerConfig& config,
                 DesignState start);

/// Same, starting from initial_state(geometry, mode, P_max, seed).
RunResult run_ao(const ChannelModel& model, const Scenario& scenario, const OptimizerConfig& config,
                 std::uint64_t seed);

}  // namespace sfim
