#include <doctest.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "sfim/experiments.hpp"

using namespace sfim;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("sfim_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// A fast problem: two layers of 2x2 elements, two users, few iterations.
ExperimentSpec tiny_spec(ExperimentKind kind, const fs::path& out, int iters = 8) {
    ExperimentSpec spec;
    spec.kind = kind;
    spec.base = testing::defaults_file();
    spec.base.set("layers", "2");
    spec.base.set("elements_x", "2");
    spec.base.set("elements_z", "2");
    spec.base.set("num_users", "2");
    spec.base.set("num_antennas", "2");
    spec.base.set("max_iters", std::to_string(iters));
    spec.trials = 3;
    spec.threads = 1;
    spec.output_dir = out.string();
    switch (kind) {
        case ExperimentKind::Convergence: spec.series = {2, 3}; break;
        case ExperimentKind::MorphSweep:
            spec.series = {2};
            spec.values = {0.1, 0.25, 0.4};
            break;
        case ExperimentKind::PowerSweep:
            spec.series = {4, 9};
            spec.values = {10, 20, 30};
            break;
        case ExperimentKind::Heatmap: break;
    }
    return spec;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("pairwise sums and sample statistics") {
    CHECK(pairwise_sum({}) == 0.0);
    std::vector<double> v(100);
    for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i + 1;
    CHECK(pairwise_sum(v) == 5050.0);
    const auto s = mean_stderr({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == 2.5);
    // Sample variance 5/3, stderr sqrt(5/3/4).
    CHECK(s.stderr_ == doctest::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-15));
    CHECK(mean_stderr({7.0}).stderr_ == 0.0);
    CHECK(std::isnan(mean_stderr({}).mean));
}

TEST_CASE("budget interpolation") {
    const std::vector<double> x{0, 10, 20};
    const std::vector<double> y{1, 3, 7};
    CHECK(interpolate_budget(x, y, 5.0) == doctest::Approx(15.0));
    CHECK(interpolate_budget(x, y, 3.0) == doctest::Approx(10.0));
    CHECK(std::isnan(interpolate_budget(x, y, 8.0)));
    CHECK(std::isnan(interpolate_budget(x, y, 1.0)));
    CHECK(std::isnan(interpolate_budget(x, {1, 3}, 2.0)));
}

TEST_CASE("heatmap files round-trip the morph vector") {
    const auto g = testing::small_problem(3, 4, 2, 2).geometry;
    const auto state = testing::random_state(g, 4);
    const auto grids = export_heatmap(state, g);
    REQUIRE(grids.size() == 3);
    CHECK(grids[1].rows() == 2);
    CHECK(grids[1].cols() == 4);
    CHECK(grids[2](1, 3) == state.morph[2 * 8 + 1 * 4 + 3]);
    const auto dir = scratch_dir("heatmap");
    std::vector<std::string> written;
    write_heatmaps(grids, dir.string(), &written);
    CHECK(written == std::vector<std::string>{"layer_1.csv", "layer_2.csv", "layer_3.csv"});
    for (int l = 0; l < 3; ++l) {
        const auto rows = read_csv(dir / ("layer_" + std::to_string(l + 1) + ".csv"));
        REQUIRE(rows.size() == 2);
        for (int r = 0; r < 2; ++r) {
            REQUIRE(rows[static_cast<std::size_t>(r)].size() == 4);
            for (int c = 0; c < 4; ++c) {
                const auto& cell = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
                double v = 0.0;
                std::from_chars(cell.data(), cell.data() + cell.size(), v);
                CHECK(v == state.morph[l * 8 + r * 4 + c]);
            }
        }
    }
}

TEST_CASE("rigid heatmaps are all zero") {
    const auto dir = scratch_dir("heatmap_rsim");
    auto spec = tiny_spec(ExperimentKind::Heatmap, dir);
    spec.modes = {Mode::RSIM};
    const auto r = run_experiment(spec);
    REQUIRE(r.heatmap.size() == 2);
    for (const auto& grid : r.heatmap) CHECK(grid.cwiseAbs().maxCoeff() == 0.0);
    CHECK(fs::exists(dir / "layer_2.csv"));
    CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("convergence CSV has one row per iteration, mode and user count") {
    const auto dir = scratch_dir("convergence");
    auto spec = tiny_spec(ExperimentKind::Convergence, dir, 20);
    spec.trials = 2;
    const auto r = run_experiment(spec);
    CHECK(r.complete());
    const auto rows = read_csv(dir / "convergence.csv");
    REQUIRE(!rows.empty());
    CHECK(rows[0] == std::vector<std::string>{"iter", "mode", "K", "mean", "stderr"});
    CHECK(rows.size() == 1 + 20 * 3 * 2);
    REQUIRE(r.curves.size() == 6);
    for (const auto& c : r.curves) CHECK(c.mean.size() == 20);
}

TEST_CASE("a single convergence trial reproduces its trace") {
    const auto dir = scratch_dir("convergence_single");
    auto spec = tiny_spec(ExperimentKind::Convergence, dir, 15);
    spec.trials = 1;
    spec.series = {2};
    spec.modes = {Mode::SFIM};
    const auto r = run_experiment(spec);
    REQUIRE(r.curves.size() == 1);

    auto f = spec.base;
    f.set("mode", "sfim");
    const auto problem = load_problem(f);
    const ChannelModel model(problem.geometry);
    const auto scenario = generate_scenario(problem.geometry, problem.scenario, scenario_seed(spec.seed, 0));
    const auto run = run_ao(model, scenario, problem.optimizer, init_seed(spec.seed, 0));
    const auto& curve = r.curves[0];
    for (int t = 1; t <= 15; ++t) {
        const auto idx = static_cast<std::size_t>(std::min<int>(t, static_cast<int>(run.trace.records.size()) - 1));
        CHECK(curve.mean[static_cast<std::size_t>(t - 1)] == run.trace.records[idx].sum_rate);
        CHECK(curve.stderr_[static_cast<std::size_t>(t - 1)] == 0.0);
    }
}

TEST_CASE("standard error shrinks with the square root of the trial count") {
    std::vector<double> se;
    for (int trials : {10, 40, 160}) {
        const auto dir = scratch_dir("stderr_" + std::to_string(trials));
        auto spec = tiny_spec(ExperimentKind::MorphSweep, dir, 3);
        spec.base.set("layers", "1");
        spec.base.set("elements_x", "1");
        spec.base.set("elements_z", "1");
        spec.series = {1};
        spec.values = {0.25};
        spec.modes = {Mode::RSIM};
        spec.trials = trials;
        const auto r = run_experiment(spec);
        REQUIRE(r.sweeps.size() == 1);
        se.push_back(r.sweeps[0].points[0].stderr_);
    }
    // Ideal ratios are 2; the bounds leave room for sampling noise in the spread.
    CHECK(se[0] / se[1] > 1.3);
    CHECK(se[0] / se[1] < 3.0);
    CHECK(se[1] / se[2] > 1.5);
    CHECK(se[1] / se[2] < 2.6);
}

TEST_CASE("rigid series are flat across morphing ranges") {
    const auto dir = scratch_dir("morph_flat");
    const auto r = run_experiment(tiny_spec(ExperimentKind::MorphSweep, dir));
    REQUIRE(r.sweeps.size() == 1);
    std::vector<double> rigid;
    for (const auto& p : r.sweeps[0].points)
        if (p.mode == Mode::RSIM) rigid.push_back(p.mean);
    REQUIRE(rigid.size() == 3);
    CHECK(rigid[0] == rigid[1]);
    CHECK(rigid[1] == rigid[2]);
    CHECK(fs::exists(dir / "morph_sweep_L2.csv"));
}

TEST_CASE("an infeasible morphing range fails only its own points") {
    const auto dir = scratch_dir("morph_invalid");
    auto spec = tiny_spec(ExperimentKind::MorphSweep, dir);
    spec.values = {0.25, 5.0};
    const auto r = run_experiment(spec);
    CHECK_FALSE(r.complete());
    CHECK(r.failures.size() == 3);
    for (const auto& msg : r.failures) CHECK(msg.find("x=5") != std::string::npos);
    const auto rows = read_csv(dir / "morph_sweep_L2.csv");
    CHECK(rows.size() == 1 + 3);
}

TEST_CASE("power sweep writes each series and the budget savings") {
    const auto dir = scratch_dir("power");
    auto spec = tiny_spec(ExperimentKind::PowerSweep, dir);
    // The tiny array needs a large budget to reach a modest target.
    spec.values = {30, 40, 50, 60};
    spec.target_rate = 0.1;
    const auto r = run_experiment(spec);
    CHECK(r.complete());
    CHECK(fs::exists(dir / "power_sweep_N4.csv"));
    CHECK(fs::exists(dir / "power_sweep_N9.csv"));
    const auto rows = read_csv(dir / "power_saving.csv");
    REQUIRE(!rows.empty());
    CHECK(rows[0] == std::vector<std::string>{"N", "target_rate", "mode", "budget_dbm", "saving_db"});
    CHECK(rows.size() == 1 + 2 * 3);
    for (const auto& s : r.savings) {
        if (s.elements == 4) CHECK(std::isnan(s.budget_dbm));  // never reaches the target
        if (s.elements == 9 && s.mode == Mode::SFIM) CHECK(s.saving_db == 0.0);
        if (s.elements == 9 && s.mode == Mode::RSIM) CHECK(s.saving_db > 0.0);
    }
}

TEST_CASE("one and two threads give byte-identical results") {
    const auto a = scratch_dir("threads_1");
    const auto b = scratch_dir("threads_2");
    auto spec = tiny_spec(ExperimentKind::PowerSweep, a);
    run_experiment(spec);
    spec.output_dir = b.string();
    spec.threads = 2;
    run_experiment(spec);
    for (const char* name : {"power_sweep_N4.csv", "power_sweep_N9.csv", "power_saving.csv"})
        CHECK(slurp(a / name) == slurp(b / name));
}

TEST_CASE("a rerun resumes from the manifest with identical output") {
    const auto dir = scratch_dir("resume");
    auto spec = tiny_spec(ExperimentKind::MorphSweep, dir);
    const auto first = run_experiment(spec);
    CHECK(first.resumed_points == 0);
    const auto csv = slurp(dir / "morph_sweep_L2.csv");
    fs::remove(dir / "morph_sweep_L2.csv");
    const auto second = run_experiment(spec);
    CHECK(second.resumed_points == 9);
    CHECK(slurp(dir / "morph_sweep_L2.csv") == csv);

    // A changed configuration invalidates the stored points.
    spec.trials = 2;
    const auto third = run_experiment(spec);
    CHECK(third.resumed_points == 0);
}

TEST_CASE("experiment specs are validated") {
    auto spec = tiny_spec(ExperimentKind::MorphSweep, scratch_dir("validate"));
    spec.values = {0.3, 0.1};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = tiny_spec(ExperimentKind::PowerSweep, scratch_dir("validate"));
    spec.series = {50};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = tiny_spec(ExperimentKind::Convergence, scratch_dir("validate"));
    spec.trials = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    CHECK_THROWS_AS(parse_experiment_kind("ablation"), std::invalid_argument);
    CHECK(parse_experiment_kind("power_sweep") == ExperimentKind::PowerSweep);
}

TEST_CASE("experiment files resolve base configs and overrides") {
    const auto dir = scratch_dir("spec_file");
    fs::copy_file(testing::defaults_path(), dir / "base.cfg");
    std::ofstream(dir / "run.exp") << "kind = morph_sweep\nbase_config = base.cfg\ntrials = 5\n"
                                      "values = [0.1, 0.2]\nmodes = [sfim, rsim]\noverride.layers = 3\n";
    const auto spec = load_experiment((dir / "run.exp").string());
    CHECK(spec.kind == ExperimentKind::MorphSweep);
    CHECK(spec.trials == 5);
    CHECK(spec.series == std::vector<int>{4, 6});
    CHECK(spec.modes == std::vector<Mode>{Mode::SFIM, Mode::RSIM});
    CHECK(spec.base.integer("layers") == 3);

    std::ofstream(dir / "bad.exp") << "kind = morph_sweep\nbase_config = base.cfg\ntrails = 5\n";
    try {
        load_experiment((dir / "bad.exp").string());
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("shipped experiment files load") {
    const fs::path dir = fs::path(SFIM_SOURCE_DIR) / "experiments";
    int loaded = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".exp") continue;
        const auto spec = load_experiment(entry.path().string());
        CHECK(spec.base.integer("num_users") == 4);
        ++loaded;
    }
    CHECK(loaded == 4);
}
