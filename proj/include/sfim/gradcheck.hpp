#pragma once

#include <vector>

#include "sfim/config.hpp"

namespace sfim {

struct GradientCheckRow {
    Block block = Block::Morph;
    int instances = 0;
    double threshold = 0.0;
    double worst_error = 0.0;      // largest normwise relative error seen
    std::uint64_t worst_seed = 0;  // instance seed that produced it
    bool pass = false;
};

/// Normwise relative error ||a - b|| / ||b|| (absolute when b vanishes).
double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& reference);

/// Random feasible state strictly inside the morph range with a power
/// vector at a random fraction of the budget.
DesignState random_feasible_state(const SystemGeometry& geometry, double max_power,
                                  std::uint64_t seed);

/// Compares analytic and central-difference gradients over random instances
/// whose dimensions come from `check` and physics from `base`.
std::vector<GradientCheckRow> run_gradient_check(const ConfigFile& base,
                                                 const GradientCheckConfig& check,
                                                 const std::vector<Block>& blocks,
                                                 std::uint64_t seed);

}  // namespace sfim
