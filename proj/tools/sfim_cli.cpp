// Command-line front end: single solves, gradient checks, experiment suites.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfim/experiments.hpp"
#include "sfim/gradcheck.hpp"

#ifndef SFIM_DEFAULT_CONFIG
#define SFIM_DEFAULT_CONFIG "configs/paper_defaults.cfg"
#endif
#ifndef SFIM_VERSION
#define SFIM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sfim;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfigError = 2, kNumerical = 3, kPartial = 4 };

struct Options {
    std::string config = SFIM_DEFAULT_CONFIG;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string out;
    int threads = 0;
    int trials = 0;
    std::vector<std::string> blocks;
    std::optional<double> threshold;
    std::string spec;
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    out << doc.dump(1) << '\n';
    if (!out) throw std::runtime_error("failed to write " + path.string());
}

json state_to_json(const DesignState& s) {
    json j;
    j["morph"] = std::vector<double>(s.morph.data(), s.morph.data() + s.morph.size());
    std::vector<double> re, im;
    for (Eigen::Index i = 0; i < s.phases.size(); ++i) {
        re.push_back(s.phases[i].real());
        im.push_back(s.phases[i].imag());
    }
    j["phase_re"] = re;
    j["phase_im"] = im;
    j["power"] = std::vector<double>(s.power.data(), s.power.data() + s.power.size());
    return j;
}

ConfigFile load_base(const Options& opt) {
    ConfigFile f = ConfigFile::load(opt.config);
    if (!opt.mode.empty()) f.set("mode", opt.mode);
    if (opt.seed) f.set("seed", std::to_string(*opt.seed));
    return f;
}

int cmd_solve(const Options& opt) {
    const ConfigFile file = load_base(opt);
    const ProblemConfig problem = load_problem(file);
    const auto& geo = problem.geometry;
    const fs::path dir = opt.out.empty() ? fs::path("out/solve") : fs::path(opt.out);
    fs::create_directories(dir);

    std::vector<std::string> files = {"trace.csv", "final_state.json", "report.json"};
    for (int l = 1; l <= geo.layers; ++l) files.push_back("layer_" + std::to_string(l) + ".csv");
    json manifest;
    manifest["tool"] = "sfim";
    manifest["version"] = SFIM_VERSION;
    manifest["command"] = "solve";
    manifest["resolved_config"] = file.dump();
    manifest["seeds"] = {{{"trial", 0}, {"scenario", scenario_seed(problem.seed, 0)},
                          {"init", init_seed(problem.seed, 0)}}};
    manifest["started"] = utc_now();
    manifest["status"] = "running";
    manifest["files"] = files;
    write_json(dir / "manifest.json", manifest);

    const ChannelModel model(geo);
    const Scenario scenario = generate_scenario(geo, problem.scenario, scenario_seed(problem.seed, 0));
    const DesignState start = initial_state(geo, problem.optimizer.mode, problem.optimizer.max_power,
                                            init_seed(problem.seed, 0));
    const RunResult run = run_ao(model, scenario, problem.optimizer, start);

    {
        std::ofstream trace(dir / "trace.csv");
        trace << run.trace.to_csv();
    }
    write_json(dir / "final_state.json", state_to_json(run.state));
    json report = to_json(evaluate(model, run.state, scenario, problem.optimizer.max_power));
    report["mode"] = to_string(problem.optimizer.mode);
    report["iterations"] = run.iterations;
    report["best_iter"] = run.best_iter;
    write_json(dir / "report.json", report);
    write_heatmaps(export_heatmap(run.state, geo), dir.string());

    manifest["finished"] = utc_now();
    manifest["status"] = "complete";
    write_json(dir / "manifest.json", manifest);
    std::cout << "mode " << to_string(problem.optimizer.mode) << ": sum rate " << std::setprecision(6)
              << run.sum_rate << " bps/Hz after " << run.iterations << " iterations\n";
    return kOk;
}

int cmd_channels(const Options& opt) {
    const ConfigFile file = load_base(opt);
    const ProblemConfig problem = load_problem(file);
    const auto& geo = problem.geometry;
    const fs::path dir = opt.out.empty() ? fs::path("out/channels") : fs::path(opt.out);
    fs::create_directories(dir);
    const ChannelModel model(geo);
    const Scenario scenario = generate_scenario(geo, problem.scenario, scenario_seed(problem.seed, 0));
    const DesignState state = initial_state(geo, problem.optimizer.mode, problem.optimizer.max_power,
                                            init_seed(problem.seed, 0));
    const ChannelStack stack = build_channels(model, state, scenario);
    for (std::size_t l = 0; l < stack.interlayer.size(); ++l)
        write_complex_csv((dir / ("interlayer_" + std::to_string(l + 1) + ".csv")).string(), stack.interlayer[l]);
    for (std::size_t k = 0; k < stack.user_channels.size(); ++k) {
        write_complex_csv((dir / ("user_" + std::to_string(k + 1) + ".csv")).string(), stack.user_channels[k]);
        write_complex_csv((dir / ("cascaded_" + std::to_string(k + 1) + ".csv")).string(), stack.cascaded[k]);
    }
    std::cout << "wrote " << stack.interlayer.size() << " interlayer and "
              << 2 * stack.user_channels.size() << " user channel files to " << dir.string() << '\n';
    return kOk;
}

int cmd_check_gradients(const Options& opt) {
    const ConfigFile file = load_base(opt);
    GradientCheckConfig check = load_gradient_check(file);
    if (opt.threshold) check.threshold_morph = check.threshold_power = check.threshold_phase = *opt.threshold;
    std::vector<Block> blocks;
    for (const auto& b : opt.blocks) blocks.push_back(parse_block(b));
    if (blocks.empty()) blocks = {Block::Morph, Block::Power, Block::Phase};
    const std::uint64_t seed = static_cast<std::uint64_t>(file.integer_or("seed", 1));
    const auto rows = run_gradient_check(file, check, blocks, seed);

    std::cout << std::left << std::setw(8) << "block" << std::setw(11) << "instances" << std::setw(14)
              << "worst_error" << std::setw(12) << "threshold" << "result\n";
    const GradientCheckRow* worst = nullptr;
    for (const auto& row : rows) {
        std::cout << std::setw(8) << to_string(row.block) << std::setw(11) << row.instances
                  << std::setw(14) << std::setprecision(3) << std::scientific << row.worst_error
                  << std::setw(12) << row.threshold << std::defaultfloat << (row.pass ? "PASS" : "FAIL")
                  << '\n';
        if (!row.pass && (worst == nullptr || row.worst_error / row.threshold > worst->worst_error / worst->threshold))
            worst = &row;
    }
    if (worst != nullptr) {
        std::cout << "worst failure: block=" << to_string(worst->block) << " seed=" << worst->worst_seed
                  << " rel_error=" << std::setprecision(6) << worst->worst_error << '\n';
        return kCheckFailed;
    }
    return kOk;
}

int cmd_experiment(const Options& opt) {
    ExperimentSpec spec = load_experiment(opt.spec);
    if (opt.seed) spec.seed = *opt.seed;
    if (!opt.mode.empty()) spec.modes = {parse_mode(opt.mode)};
    if (!opt.out.empty()) spec.output_dir = opt.out;
    if (opt.threads > 0) spec.threads = opt.threads;
    if (opt.trials > 0) spec.trials = opt.trials;
    const ExperimentResult result = run_experiment(spec);
    if (result.resumed_points > 0)
        std::cout << "reused " << result.resumed_points << " completed points from the manifest\n";
    for (const auto& f : result.files) std::cout << "wrote " << (fs::path(spec.output_dir) / f).string() << '\n';
    if (!result.complete()) {
        for (const auto& e : result.failures) std::cerr << e << '\n';
        return kPartial;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stacked flexible intelligent metasurface sum-rate optimizer"};
    app.set_version_flag("--version", SFIM_VERSION);
    app.require_subcommand(1);
    Options opt;
    std::string seed_text;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "Problem configuration file")->capture_default_str();
        sub->add_option("--seed", seed_text, "Base seed (overrides the config)");
    };

    auto* solve = app.add_subcommand("solve", "Run one alternating optimization");
    add_common(solve);
    solve->add_option("--mode", opt.mode, "sfim, hsim or rsim");
    solve->add_option("--out", opt.out, "Output directory");

    auto* channels = app.add_subcommand("channels", "Dump the channel matrices of the initial state");
    add_common(channels);
    channels->add_option("--mode", opt.mode, "sfim, hsim or rsim");
    channels->add_option("--out", opt.out, "Output directory");

    auto* check = app.add_subcommand("check-gradients", "Compare analytic and finite-difference gradients");
    add_common(check);
    check->add_option("--block", opt.blocks, "morph, power or phase (repeatable)");
    check->add_option("--threshold", opt.threshold, "Relative-error threshold for every block");

    auto* experiment = app.add_subcommand("experiment", "Run an experiment described by a spec file");
    experiment->add_option("spec", opt.spec, "Experiment spec file")->required();
    experiment->add_option("--seed", seed_text, "Base seed (overrides the spec file)");
    experiment->add_option("--mode", opt.mode, "Run a single mode");
    experiment->add_option("--out", opt.out, "Output directory");
    experiment->add_option("--threads", opt.threads, "Worker thread cap (0 = all cores)");
    experiment->add_option("--trials", opt.trials, "Trials per point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (!seed_text.empty()) {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(seed_text, &used);
            if (used != seed_text.size()) throw std::invalid_argument("bad seed");
            opt.seed = v;
        }
        if (!opt.mode.empty()) parse_mode(opt.mode);
        if (*solve) return cmd_solve(opt);
        if (*channels) return cmd_channels(opt);
        if (*check) return cmd_check_gradients(opt);
        if (*experiment) return cmd_experiment(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kOk;
}
