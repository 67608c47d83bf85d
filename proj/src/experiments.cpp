#include "sfim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#ifndef SFIM_VERSION
#define SFIM_VERSION "0.0.0"
#endif

namespace sfim {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Convergence: return "convergence";
        case ExperimentKind::MorphSweep: return "morph_sweep";
        case ExperimentKind::PowerSweep: return "power_sweep";
        case ExperimentKind::Heatmap: return "heatmap";
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
    if (text == "convergence") return ExperimentKind::Convergence;
    if (text == "morph_sweep") return ExperimentKind::MorphSweep;
    if (text == "power_sweep") return ExperimentKind::PowerSweep;
    if (text == "heatmap") return ExperimentKind::Heatmap;
    throw std::invalid_argument("unknown experiment kind '" + text +
                                "' (expected convergence, morph_sweep, power_sweep or heatmap)");
}

namespace {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buffer[64];
    const auto res = std::to_chars(buffer, buffer + sizeof(buffer), v);
    return std::string(buffer, res.ptr);
}

int perfect_square_root(int n) {
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    return r * r == n ? r : -1;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

const std::vector<std::string>& experiment_keys() {
    static const std::vector<std::string> keys = {
        "kind",   "base_config", "output",      "trials",     "seed",   "modes",
        "values", "series",      "target_rate", "warm_start", "threads"};
    return keys;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be at least 1");
    if (modes.empty()) throw std::invalid_argument("at least one mode is required");
    if (std::set<Mode>(modes.begin(), modes.end()).size() != modes.size())
        throw std::invalid_argument("modes must not repeat");
    if (threads < 0) throw std::invalid_argument("threads must be nonnegative");
    const bool sweep = kind == ExperimentKind::MorphSweep || kind == ExperimentKind::PowerSweep;
    if (sweep && values.empty()) throw std::invalid_argument("swept values must not be empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw std::invalid_argument("swept values must be finite");
        if (i > 0 && !(values[i - 1] < values[i]))
            throw std::invalid_argument("swept values must be sorted ascending without repeats");
    }
    if (kind != ExperimentKind::Heatmap && series.empty())
        throw std::invalid_argument("series must not be empty");
    for (int s : series) {
        if (s < 1) throw std::invalid_argument("series values must be positive");
        if (kind == ExperimentKind::PowerSweep && perfect_square_root(s) < 0)
            throw std::invalid_argument("power sweep element counts must be perfect squares");
    }
    if (kind == ExperimentKind::MorphSweep)
        for (double v : values)
            if (v < 0.0) throw std::invalid_argument("morph ranges must be nonnegative");
}

ExperimentSpec load_experiment(const ConfigFile& f, const std::string& spec_dir) {
    for (const auto& key : f.keys()) {
        if (key.rfind("override.", 0) == 0) continue;
        const auto& known = experiment_keys();
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(f.source(), f.line_of(key), "unknown key '" + key + "'");
    }
    auto invalid = [&](const std::string& key, const std::exception& e) {
        return ConfigError(f.source(), f.line_of(key), e.what());
    };

    ExperimentSpec spec;
    try {
        spec.kind = parse_experiment_kind(f.text("kind"));
    } catch (const std::invalid_argument& e) {
        throw invalid("kind", e);
    }
    fs::path base_path = f.text("base_config");
    if (base_path.is_relative()) base_path = fs::path(spec_dir) / base_path;
    spec.base = ConfigFile::load(base_path.string());
    for (const auto& key : f.keys())
        if (key.rfind("override.", 0) == 0) spec.base.set(key.substr(9), f.raw(key));

    spec.output_dir = f.text_or("output", spec.output_dir);
    spec.trials = f.integer_or("trials", spec.trials);
    spec.seed = static_cast<std::uint64_t>(
        f.integer_or("seed", spec.base.integer_or("seed", static_cast<int>(spec.seed))));
    if (f.has("modes")) {
        spec.modes.clear();
        try {
            for (const auto& m : f.texts("modes")) spec.modes.push_back(parse_mode(m));
        } catch (const std::invalid_argument& e) {
            throw invalid("modes", e);
        }
    }
    if (f.has("values")) spec.values = f.numbers("values");
    if (f.has("series")) {
        for (double v : f.numbers("series")) {
            if (v != std::floor(v)) throw ConfigError(f.source(), f.line_of("series"), "series must be integers");
            spec.series.push_back(static_cast<int>(v));
        }
    } else {
        switch (spec.kind) {
            case ExperimentKind::Convergence: spec.series = {2, 6}; break;
            case ExperimentKind::MorphSweep: spec.series = {4, 6}; break;
            case ExperimentKind::PowerSweep: spec.series = {64, 100}; break;
            case ExperimentKind::Heatmap: break;
        }
    }
    spec.target_rate = f.number_or("target_rate", spec.target_rate);
    spec.warm_start = f.boolean_or("warm_start", spec.warm_start);
    spec.threads = f.integer_or("threads", spec.threads);
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(f.source(), 0, e.what());
    }
    // Surface problems in the base configuration before any work starts.
    load_problem(spec.base);
    return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
    const auto file = ConfigFile::load(path);
    return load_experiment(file, fs::path(path).parent_path().string());
}

double pairwise_sum(const std::vector<double>& values) {
    auto rec = [&](auto&& self, std::size_t lo, std::size_t hi) -> double {
        if (hi - lo <= 8) {
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += values[i];
            return s;
        }
        const std::size_t mid = lo + (hi - lo) / 2;
        return self(self, lo, mid) + self(self, mid, hi);
    };
    return rec(rec, 0, values.size());
}

MeanStderr mean_stderr(const std::vector<double>& values) {
    MeanStderr out;
    const std::size_t n = values.size();
    if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    out.mean = pairwise_sum(values) / static_cast<double>(n);
    if (n < 2) return out;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - out.mean) * (values[i] - out.mean);
    const double variance = pairwise_sum(sq) / static_cast<double>(n - 1);
    out.stderr_ = std::sqrt(variance / static_cast<double>(n));
    return out;
}

double interpolate_budget(const std::vector<double>& x, const std::vector<double>& y, double target) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (x.size() != y.size() || x.empty() || y.front() >= target) return nan;
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (y[i] >= target) {
            const double t = (target - y[i - 1]) / (y[i] - y[i - 1]);
            return x[i - 1] + t * (x[i] - x[i - 1]);
        }
    }
    return nan;
}

std::uint64_t scenario_seed(std::uint64_t base, int trial) {
    return derive_seed(base, 1, static_cast<std::uint64_t>(trial));
}

std::uint64_t init_seed(std::uint64_t base, int trial) {
    return derive_seed(base, 2, static_cast<std::uint64_t>(trial));
}

std::vector<Eigen::MatrixXd> export_heatmap(const DesignState& state, const SystemGeometry& geometry) {
    const int n = geometry.elements();
    if (state.morph.size() != geometry.design_size())
        throw std::invalid_argument("morph vector does not match the geometry");
    std::vector<Eigen::MatrixXd> grids;
    for (int layer = 0; layer < geometry.layers; ++layer) {
        Eigen::MatrixXd grid(geometry.elements_z, geometry.elements_x);
        for (int r = 0; r < geometry.elements_z; ++r)
            for (int c = 0; c < geometry.elements_x; ++c)
                grid(r, c) = state.morph[layer * n + r * geometry.elements_x + c];
        grids.push_back(std::move(grid));
    }
    return grids;
}

void write_heatmaps(const std::vector<Eigen::MatrixXd>& grids, const std::string& dir,
                    std::vector<std::string>* written) {
    fs::create_directories(dir);
    for (std::size_t l = 0; l < grids.size(); ++l) {
        const std::string name = "layer_" + std::to_string(l + 1) + ".csv";
        std::ofstream out(fs::path(dir) / name);
        for (Eigen::Index r = 0; r < grids[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < grids[l].cols(); ++c)
                out << (c ? "," : "") << format_number(grids[l](r, c));
            out << '\n';
        }
        if (!out) throw std::runtime_error("failed to write " + name);
        if (written) written->push_back(name);
    }
}

namespace {

// One (series, x, mode) cell: a value vector per trial.
struct Slot {
    std::string key;
    std::size_t series_index = 0;
    std::size_t value_index = 0;
    Mode mode = Mode::SFIM;
    std::optional<ProblemConfig> problem;
    std::vector<std::vector<double>> trial_values;
    std::vector<char> trial_done;
    int remaining = 0;
    bool complete = false;
    std::string error;
};

struct Task {
    std::vector<std::size_t> slots;  // solved in order; warm starts chain along it
    int trial = 0;
};

ConfigFile point_config(const ExperimentSpec& spec, int series, double x, Mode mode) {
    ConfigFile f = spec.base;
    switch (spec.kind) {
        case ExperimentKind::Convergence:
            f.set("num_users", std::to_string(series));
            f.set("num_antennas", std::to_string(series));
            break;
        case ExperimentKind::MorphSweep:
            f.set("layers", std::to_string(series));
            f.erase("morph_limit");
            f.set("morph_limit_wl", format_number(x));
            break;
        case ExperimentKind::PowerSweep: {
            const int side = perfect_square_root(series);
            f.set("elements_x", std::to_string(side));
            f.set("elements_z", std::to_string(side));
            f.erase("max_power");
            f.set("max_power_dbm", format_number(x));
            break;
        }
        case ExperimentKind::Heatmap: break;
    }
    f.set("mode", to_string(mode));
    return f;
}

std::string slot_key(const ExperimentSpec& spec, int series, double x, Mode mode) {
    std::string key = std::to_string(series);
    if (spec.kind != ExperimentKind::Convergence) key += "|" + format_number(x);
    return key + "|" + to_string(mode);
}

std::string series_label(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Convergence: return "K";
        case ExperimentKind::MorphSweep: return "L";
        case ExperimentKind::PowerSweep: return "N";
        case ExperimentKind::Heatmap: return "";
    }
    return "";
}

std::string fingerprint(const ExperimentSpec& spec) {
    std::ostringstream os;
    os << to_string(spec.kind) << '\n' << spec.base.dump() << "trials=" << spec.trials
       << "\nseed=" << spec.seed << "\nwarm=" << spec.warm_start << "\nvalues=";
    for (double v : spec.values) os << format_number(v) << ',';
    os << "\nseries=";
    for (int s : spec.series) os << s << ',';
    os << "\nmodes=";
    for (Mode m : spec.modes) os << to_string(m) << ',';
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
    return hex;
}

class Manifest {
public:
    Manifest(const ExperimentSpec& spec, fs::path path) : path_(std::move(path)) {
        doc_["tool"] = "sfim";
        doc_["version"] = SFIM_VERSION;
        doc_["kind"] = to_string(spec.kind);
        doc_["fingerprint"] = fingerprint(spec);
        doc_["resolved_config"] = spec.base.dump();
        json exp;
        exp["values"] = spec.values;
        exp["series"] = spec.series;
        std::vector<std::string> modes;
        for (Mode m : spec.modes) modes.push_back(to_string(m));
        exp["modes"] = modes;
        exp["trials"] = spec.trials;
        exp["seed"] = spec.seed;
        exp["target_rate"] = spec.target_rate;
        exp["warm_start"] = spec.warm_start;
        doc_["experiment"] = exp;
        json seeds = json::array();
        for (int t = 0; t < spec.trials; ++t)
            seeds.push_back({{"trial", t}, {"scenario", scenario_seed(spec.seed, t)},
                             {"init", init_seed(spec.seed, t)}});
        doc_["seeds"] = seeds;
        doc_["points"] = json::object();
        doc_["failures"] = json::array();
        doc_["files"] = json::array();
    }

    // Points recorded by an earlier run of the same experiment.
    json previous_points() const {
        std::ifstream in(path_);
        if (!in) return json::object();
        try {
            const json old = json::parse(in);
            if (old.value("fingerprint", "") == doc_["fingerprint"] && old.contains("points"))
                return old["points"];
            std::cerr << "manifest " << path_.string()
                      << " belongs to a different experiment; starting fresh\n";
        } catch (const json::exception&) {
            std::cerr << "manifest " << path_.string() << " is unreadable; starting fresh\n";
        }
        return json::object();
    }

    void start(const std::vector<std::string>& planned_files) {
        std::lock_guard lock(mutex_);
        doc_["started"] = utc_timestamp();
        doc_["status"] = "running";
        doc_["files"] = planned_files;
        write_locked();
    }

    void record_point(const Slot& slot) {
        std::lock_guard lock(mutex_);
        doc_["points"][slot.key] = slot.trial_values;
        write_locked();
    }

    void finish(const std::vector<std::string>& files, const std::vector<std::string>& failures) {
        std::lock_guard lock(mutex_);
        doc_["finished"] = utc_timestamp();
        doc_["status"] = failures.empty() ? "complete" : "partial";
        doc_["files"] = files;
        doc_["failures"] = failures;
        write_locked();
    }

private:
    void write_locked() {
        const fs::path tmp = path_.string() + ".tmp";
        {
            std::ofstream out(tmp);
            out << doc_.dump(1) << '\n';
            if (!out) throw std::runtime_error("failed to write " + tmp.string());
        }
        fs::rename(tmp, path_);
    }

    fs::path path_;
    json doc_;
    std::mutex mutex_;
};

std::vector<double> padded_trace(const Trace& trace, int iterations) {
    std::vector<double> out(static_cast<std::size_t>(iterations));
    const int last = static_cast<int>(trace.records.size()) - 1;
    for (int t = 1; t <= iterations; ++t)
        out[static_cast<std::size_t>(t - 1)] = trace.records[static_cast<std::size_t>(std::min(t, last))].sum_rate;
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw std::runtime_error("failed to write " + path.string());
}

ExperimentResult run_heatmap(const ExperimentSpec& spec) {
    ExperimentResult result;
    const fs::path dir = spec.output_dir;
    fs::create_directories(dir);
    const Mode mode = spec.modes.front();
    const ProblemConfig problem = load_problem(point_config(spec, 0, 0.0, mode));
    const auto& geo = problem.geometry;
    std::vector<std::string> planned;
    for (int l = 1; l <= geo.layers; ++l) planned.push_back("layer_" + std::to_string(l) + ".csv");
    Manifest manifest(spec, dir / "manifest.json");
    manifest.start(planned);
    try {
        const ChannelModel model(geo);
        const Scenario scenario = generate_scenario(geo, problem.scenario, scenario_seed(spec.seed, 0));
        const DesignState start = initial_state(geo, mode, problem.optimizer.max_power, init_seed(spec.seed, 0));
        const RunResult run = run_ao(model, scenario, problem.optimizer, start);
        result.heatmap = export_heatmap(run.state, geo);
        write_heatmaps(result.heatmap, dir.string(), &result.files);
    } catch (const NumericalError& e) {
        result.failures.push_back(std::string("heatmap solve: ") + e.what());
    }
    manifest.finish(result.files, result.failures);
    return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.kind == ExperimentKind::Heatmap) return run_heatmap(spec);

    const fs::path dir = spec.output_dir;
    fs::create_directories(dir);
    const bool convergence = spec.kind == ExperimentKind::Convergence;
    const std::vector<double> xs = convergence ? std::vector<double>{0.0} : spec.values;

    std::vector<Slot> slots;
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        for (std::size_t v = 0; v < xs.size(); ++v) {
            for (Mode mode : spec.modes) {
                Slot slot;
                slot.key = slot_key(spec, spec.series[s], xs[v], mode);
                slot.series_index = s;
                slot.value_index = v;
                slot.mode = mode;
                slot.trial_values.resize(static_cast<std::size_t>(spec.trials));
                slot.trial_done.assign(static_cast<std::size_t>(spec.trials), 0);
                slot.remaining = spec.trials;
                try {
                    slot.problem = load_problem(point_config(spec, spec.series[s], xs[v], mode));
                } catch (const ConfigError& e) {
                    std::ostringstream os;
                    os << "point " << series_label(spec.kind) << '=' << spec.series[s];
                    if (!convergence) os << " x=" << format_number(xs[v]);
                    os << " mode=" << to_string(mode) << " rejected: " << e.what();
                    slot.error = os.str();
                }
                slots.push_back(std::move(slot));
            }
        }
    }

    std::vector<std::string> planned;
    if (convergence) {
        planned.push_back("convergence.csv");
    } else {
        const std::string prefix = spec.kind == ExperimentKind::MorphSweep ? "morph_sweep_L" : "power_sweep_N";
        for (int s : spec.series) planned.push_back(prefix + std::to_string(s) + ".csv");
        if (spec.kind == ExperimentKind::PowerSweep) planned.push_back("power_saving.csv");
    }

    Manifest manifest(spec, dir / "manifest.json");
    ExperimentResult result;
    const json previous = manifest.previous_points();
    for (auto& slot : slots) {
        if (!slot.error.empty() || !previous.contains(slot.key)) continue;
        const auto& stored = previous[slot.key];
        if (!stored.is_array() || stored.size() != slot.trial_values.size()) continue;
        slot.trial_values = stored.get<std::vector<std::vector<double>>>();
        slot.trial_done.assign(slot.trial_done.size(), 1);
        slot.remaining = 0;
        slot.complete = true;
        ++result.resumed_points;
    }
    manifest.start(planned);
    for (const auto& slot : slots)
        if (slot.complete) manifest.record_point(slot);

    // Without warm starts every (slot, trial) is independent; with them a task
    // walks one (series, mode) along the sorted swept values.
    std::vector<Task> tasks;
    const std::size_t n_modes = spec.modes.size();
    const std::size_t n_x = xs.size();
    // Slot-major order, so points finish (and reach the manifest) one by one.
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        for (std::size_t m = 0; m < n_modes; ++m) {
            std::vector<std::size_t> chain;
            for (std::size_t v = 0; v < n_x; ++v) chain.push_back((s * n_x + v) * n_modes + m);
            if (spec.warm_start) {
                for (int t = 0; t < spec.trials; ++t) tasks.push_back({chain, t});
            } else {
                for (std::size_t idx : chain)
                    for (int t = 0; t < spec.trials; ++t) tasks.push_back({{idx}, t});
            }
        }
    }
    std::erase_if(tasks, [&](const Task& task) {
        return std::all_of(task.slots.begin(), task.slots.end(), [&](std::size_t i) {
            return slots[i].complete || !slots[i].error.empty();
        });
    });

    std::mutex slot_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < tasks.size(); k = next++) {
            const Task& task = tasks[k];
            std::optional<DesignState> warm;
            for (std::size_t idx : task.slots) {
                Slot& slot = slots[idx];
                {
                    std::lock_guard lock(slot_mutex);
                    if (!slot.error.empty()) {
                        warm.reset();
                        continue;
                    }
                }
                const ProblemConfig& problem = *slot.problem;
                const auto& geo = problem.geometry;
                std::vector<double> values;
                std::string error;
                try {
                    const ChannelModel model(geo);
                    const Scenario scenario =
                        generate_scenario(geo, problem.scenario, scenario_seed(spec.seed, task.trial));
                    DesignState start = warm ? *warm
                                             : initial_state(geo, slot.mode, problem.optimizer.max_power,
                                                             init_seed(spec.seed, task.trial));
                    RunResult run = run_ao(model, scenario, problem.optimizer, std::move(start));
                    values = convergence ? padded_trace(run.trace, problem.optimizer.max_iters)
                                         : std::vector<double>{run.sum_rate};
                    if (spec.warm_start) warm = std::move(run.state);
                } catch (const std::exception& e) {
                    error = e.what();
                    warm.reset();
                }
                std::lock_guard lock(slot_mutex);
                if (slot.complete || !slot.error.empty()) continue;
                if (!error.empty()) {
                    std::ostringstream os;
                    os << "point " << slot.key << " trial " << task.trial << " failed: " << error;
                    slot.error = os.str();
                    std::cerr << slot.error << '\n';
                    continue;
                }
                slot.trial_values[static_cast<std::size_t>(task.trial)] = std::move(values);
                if (!slot.trial_done[static_cast<std::size_t>(task.trial)]) {
                    slot.trial_done[static_cast<std::size_t>(task.trial)] = 1;
                    if (--slot.remaining == 0) {
                        slot.complete = true;
                        manifest.record_point(slot);
                        std::cerr << "completed point " << slot.key << '\n';
                    }
                }
            }
        }
    };
    unsigned n_threads = spec.threads > 0 ? static_cast<unsigned>(spec.threads)
                                          : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(tasks.size(), 1)));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (const auto& slot : slots)
        if (!slot.error.empty()) result.failures.push_back(slot.error);

    // Aggregate in slot order so output never depends on scheduling.
    if (convergence) {
        std::ostringstream csv;
        csv << "iter,mode,K,mean,stderr\n";
        for (const auto& slot : slots) {
            if (!slot.complete) continue;
            ConvergenceCurve curve;
            curve.users = spec.series[slot.series_index];
            curve.mode = slot.mode;
            curve.trials = spec.trials;
            const std::size_t iters = slot.trial_values.front().size();
            for (std::size_t i = 0; i < iters; ++i) {
                std::vector<double> column;
                for (const auto& tv : slot.trial_values) column.push_back(tv[i]);
                const auto ms = mean_stderr(column);
                curve.mean.push_back(ms.mean);
                curve.stderr_.push_back(ms.stderr_);
                csv << i + 1 << ',' << to_string(slot.mode) << ',' << curve.users << ','
                    << format_number(ms.mean) << ',' << format_number(ms.stderr_) << '\n';
            }
            result.curves.push_back(std::move(curve));
        }
        write_text(dir / "convergence.csv", csv.str());
        result.files.push_back("convergence.csv");
    } else {
        for (std::size_t s = 0; s < spec.series.size(); ++s) {
            SweepSeries series;
            series.series = spec.series[s];
            std::ostringstream csv;
            csv << "x,mode,mean,stderr,trials\n";
            for (const auto& slot : slots) {
                if (slot.series_index != s || !slot.complete) continue;
                std::vector<double> finals;
                for (const auto& tv : slot.trial_values) finals.push_back(tv.front());
                const auto ms = mean_stderr(finals);
                SweepPoint point{xs[slot.value_index], slot.mode, ms.mean, ms.stderr_, spec.trials};
                csv << format_number(point.x) << ',' << to_string(point.mode) << ','
                    << format_number(point.mean) << ',' << format_number(point.stderr_) << ','
                    << point.trials << '\n';
                series.points.push_back(point);
            }
            const std::string name = planned[s];
            write_text(dir / name, csv.str());
            result.files.push_back(name);
            result.sweeps.push_back(std::move(series));
        }
        if (spec.kind == ExperimentKind::PowerSweep) {
            std::ostringstream csv;
            csv << "N,target_rate,mode,budget_dbm,saving_db\n";
            for (const auto& series : result.sweeps) {
                std::vector<PowerSaving> rows;
                double reference = std::numeric_limits<double>::quiet_NaN();
                for (Mode mode : spec.modes) {
                    std::vector<double> x, y;
                    for (const auto& p : series.points)
                        if (p.mode == mode) {
                            x.push_back(p.x);
                            y.push_back(p.mean);
                        }
                    PowerSaving row;
                    row.elements = series.series;
                    row.mode = mode;
                    row.budget_dbm = x.size() == n_x ? interpolate_budget(x, y, spec.target_rate)
                                                     : std::numeric_limits<double>::quiet_NaN();
                    if (mode == Mode::SFIM) reference = row.budget_dbm;
                    rows.push_back(row);
                }
                for (auto& row : rows) {
                    row.saving_db = row.budget_dbm - reference;
                    csv << row.elements << ',' << format_number(spec.target_rate) << ','
                        << to_string(row.mode) << ',' << format_number(row.budget_dbm) << ','
                        << format_number(row.saving_db) << '\n';
                    result.savings.push_back(row);
                }
            }
            write_text(dir / "power_saving.csv", csv.str());
            result.files.push_back("power_saving.csv");
        }
    }
    manifest.finish(result.files, result.failures);
    return result;
}

namespace {

ExperimentResult run_kind(const ExperimentSpec& spec, ExperimentKind kind) {
    if (spec.kind != kind)
        throw std::invalid_argument("experiment kind is " + to_string(spec.kind) + ", expected " +
                                    to_string(kind));
    return run_experiment(spec);
}

}  // namespace

ExperimentResult run_convergence(const ExperimentSpec& spec) {
    return run_kind(spec, ExperimentKind::Convergence);
}
ExperimentResult run_morph_sweep(const ExperimentSpec& spec) {
    return run_kind(spec, ExperimentKind::MorphSweep);
}
ExperimentResult run_power_sweep(const ExperimentSpec& spec) {
    return run_kind(spec, ExperimentKind::PowerSweep);
}

}  // namespace sfim
