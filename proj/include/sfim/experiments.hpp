#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sfim/config.hpp"

namespace sfim {

enum class ExperimentKind { Convergence, MorphSweep, PowerSweep, Heatmap };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::Convergence;
    ConfigFile base;                  // problem config with overrides applied
    std::vector<double> values;       // morph ranges in wavelengths, or budgets in dBm
    std::vector<int> series;          // users (convergence), layers (morph), elements (power)
    std::vector<Mode> modes{Mode::SFIM, Mode::HSIM, Mode::RSIM};
    int trials = 100;
    std::uint64_t seed = 1;
    double target_rate = 7.0;         // bps/Hz, power sweep only
    bool warm_start = false;
    int threads = 0;                  // 0 = hardware concurrency
    std::string output_dir = "out";

    void validate() const;
};

/// Keys of an experiment file. Problem keys are given as `override.<key>`.
ExperimentSpec load_experiment(const ConfigFile& file, const std::string& spec_dir);
ExperimentSpec load_experiment(const std::string& path);

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Pairwise (cascade) sum; the result depends only on the order of `values`.
double pairwise_sum(const std::vector<double>& values);
/// Sample standard deviation over sqrt(n); zero for a single value.
MeanStderr mean_stderr(const std::vector<double>& values);

/// Budget (same unit as `x`) at which the piecewise-linear curve first
/// reaches `target`; NaN when it never does or starts above it.
double interpolate_budget(const std::vector<double>& x, const std::vector<double>& y, double target);

struct SweepPoint {
    double x = 0.0;
    Mode mode = Mode::SFIM;
    double mean = 0.0;
    double stderr_ = 0.0;
    int trials = 0;
};

struct SweepSeries {
    int series = 0;
    std::vector<SweepPoint> points;  // ordered by x, then by mode
};

struct ConvergenceCurve {
    int users = 0;
    Mode mode = Mode::SFIM;
    std::vector<double> mean;  // iterations 1..max_iters
    std::vector<double> stderr_;
    int trials = 0;
};

struct PowerSaving {
    int elements = 0;
    Mode mode = Mode::SFIM;
    double budget_dbm = 0.0;  // NaN if the target is not reached
    double saving_db = 0.0;   // budget of this mode minus that of SFIM
};

struct ExperimentResult {
    std::vector<ConvergenceCurve> curves;
    std::vector<SweepSeries> sweeps;
    std::vector<PowerSaving> savings;
    std::vector<Eigen::MatrixXd> heatmap;
    std::vector<std::string> files;     // result files written, relative to output_dir
    std::vector<std::string> failures;  // one diagnostic per failed point
    int resumed_points = 0;

    bool complete() const { return failures.empty(); }
};

/// Runs the experiment described by `spec`, writing CSVs and manifest.json
/// into spec.output_dir. Points already recorded in a matching manifest are
/// reused instead of recomputed.
ExperimentResult run_experiment(const ExperimentSpec& spec);

ExperimentResult run_convergence(const ExperimentSpec& spec);
ExperimentResult run_morph_sweep(const ExperimentSpec& spec);
ExperimentResult run_power_sweep(const ExperimentSpec& spec);

/// One Nz x Nx grid per layer; cell (r, c) holds element r * Nx + c.
std::vector<Eigen::MatrixXd> export_heatmap(const DesignState& state, const SystemGeometry& geometry);
void write_heatmaps(const std::vector<Eigen::MatrixXd>& grids, const std::string& dir,
                    std::vector<std::string>* written = nullptr);

/// Seeds shared by every mode and sweep point of trial `trial`.
std::uint64_t scenario_seed(std::uint64_t base, int trial);
std::uint64_t init_seed(std::uint64_t base, int trial);

}  // namespace sfim
