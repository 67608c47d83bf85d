// Python bindings: problem loading, evaluation, gradients, solves and experiments.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sfim/experiments.hpp"
#include "sfim/gradcheck.hpp"

namespace py = pybind11;
using namespace sfim;

namespace {

// Overrides accept numbers, strings, booleans and sequences of those.
std::string to_raw(const py::handle& value) {
    if (py::isinstance<py::bool_>(value)) return value.cast<bool>() ? "true" : "false";
    if (py::isinstance<py::str>(value)) return value.cast<std::string>();
    if (py::isinstance<py::int_>(value)) return std::to_string(value.cast<long long>());
    if (py::isinstance<py::float_>(value)) return py::repr(value).cast<std::string>();
    if (py::isinstance<py::sequence>(value)) {
        std::string out = "[";
        bool first = true;
        for (const auto& item : value.cast<py::sequence>()) {
            out += (first ? "" : ", ") + to_raw(item);
            first = false;
        }
        return out + "]";
    }
    throw py::type_error("unsupported override value: " + py::repr(value).cast<std::string>());
}

ConfigFile with_overrides(const std::string& path, const py::dict& overrides) {
    ConfigFile f = ConfigFile::load(path);
    for (const auto& [key, value] : overrides) f.set(key.cast<std::string>(), to_raw(value));
    return f;
}

struct Problem {
    ConfigFile file;
    ProblemConfig config;
    ChannelModel model;

    explicit Problem(ConfigFile f) : file(std::move(f)), config(load_problem(file)), model(config.geometry) {}

    DesignState initial(std::uint64_t seed) const {
        return initial_state(config.geometry, config.optimizer.mode, config.optimizer.max_power, seed);
    }
};

py::dict report_dict(const RateReport& r) {
    py::dict d;
    d["sum_rate"] = r.sum_rate;
    d["rates"] = r.rates;
    d["sinr"] = r.sinr;
    d["J"] = r.J;
    d["feasible"] = r.feasible;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stacked flexible intelligent metasurface sum-rate optimizer";
    m.attr("__version__") = SFIM_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<DesignState>(m, "DesignState")
        .def(py::init<>())
        .def_readwrite("morph", &DesignState::morph)
        .def_readwrite("phases", &DesignState::phases)
        .def_readwrite("power", &DesignState::power)
        .def("copy", [](const DesignState& s) { return DesignState(s); });

    py::class_<UserChannelParams>(m, "UserChannel")
        .def_readonly("gains", &UserChannelParams::gains)
        .def_readonly("azimuth", &UserChannelParams::azimuth)
        .def_readonly("elevation", &UserChannelParams::elevation)
        .def_readonly("noise_power", &UserChannelParams::noise_power)
        .def_readonly("distance", &UserChannelParams::distance);

    py::class_<Problem>(m, "Problem")
        .def(py::init([](const std::string& path, const py::dict& overrides) {
                 return Problem(with_overrides(path, overrides));
             }),
             py::arg("path"), py::arg("overrides") = py::dict())
        .def_property_readonly("layers", [](const Problem& p) { return p.config.geometry.layers; })
        .def_property_readonly("elements", [](const Problem& p) { return p.config.geometry.elements(); })
        .def_property_readonly("users", [](const Problem& p) { return p.config.geometry.num_users; })
        .def_property_readonly("wavelength", [](const Problem& p) { return p.config.geometry.wavelength; })
        .def_property_readonly("morph_limit", [](const Problem& p) { return p.config.geometry.morph_limit; })
        .def_property_readonly("max_power", [](const Problem& p) { return p.config.optimizer.max_power; })
        .def_property_readonly("mode", [](const Problem& p) { return to_string(p.config.optimizer.mode); })
        .def_property_readonly("seed", [](const Problem& p) { return p.config.seed; })
        .def("resolved_config", [](const Problem& p) { return p.file.dump(); })
        .def("scenario", [](const Problem& p, std::uint64_t seed) {
                 return generate_scenario(p.config.geometry, p.config.scenario, seed);
             },
             py::arg("seed"))
        .def("initial_state", &Problem::initial, py::arg("seed"))
        .def("random_state", [](const Problem& p, std::uint64_t seed) {
                 return random_feasible_state(p.config.geometry, p.config.optimizer.max_power, seed);
             },
             py::arg("seed"))
        .def("evaluate", [](const Problem& p, const DesignState& s, const Scenario& sc) {
                 return report_dict(evaluate(p.model, s, sc, p.config.optimizer.max_power));
             },
             py::arg("state"), py::arg("scenario"))
        .def("gradients", [](const Problem& p, const DesignState& s, const Scenario& sc) {
                 const auto g = compute_gradients(p.model, s, sc);
                 py::dict d;
                 d["morph"] = g.d_morph;
                 d["power"] = g.d_power;
                 d["phase"] = g.d_phase;
                 return d;
             },
             py::arg("state"), py::arg("scenario"))
        .def("fd_gradient", [](const Problem& p, const std::string& block, const DesignState& s,
                               const Scenario& sc, double step) {
                 return fd_gradient(parse_block(block), p.model, s, sc, step);
             },
             py::arg("block"), py::arg("state"), py::arg("scenario"), py::arg("step"))
        .def("violations", [](const Problem& p, const DesignState& s) {
                 std::vector<std::string> out;
                 for (auto c : check_feasibility(p.config.geometry, s, p.config.optimizer.max_power))
                     out.push_back(to_string(c));
                 return out;
             },
             py::arg("state"))
        .def("solve", [](const Problem& p, std::uint64_t trial) {
                 const auto scenario = generate_scenario(p.config.geometry, p.config.scenario,
                                                         scenario_seed(p.config.seed, static_cast<int>(trial)));
                 RunResult run;
                 {
                     py::gil_scoped_release release;
                     run = run_ao(p.model, scenario, p.config.optimizer, init_seed(p.config.seed, static_cast<int>(trial)));
                 }
                 py::dict d;
                 d["sum_rate"] = run.sum_rate;
                 d["iterations"] = run.iterations;
                 d["best_iter"] = run.best_iter;
                 d["state"] = run.state;
                 d["scenario"] = scenario;
                 std::vector<double> trace;
                 for (const auto& r : run.trace.records) trace.push_back(r.sum_rate);
                 d["trace"] = trace;
                 d["trace_csv"] = run.trace.to_csv();
                 return d;
             },
             py::arg("trial") = 0,
             "Runs the alternating optimization on the seeded scenario of `trial`.");

    m.def("project_morph", &project_morph, py::arg("morph"), py::arg("limit"));
    m.def("project_power", [](const Eigen::VectorXd& p, double max_power, bool exact) {
              return project_power(p, max_power, exact ? PowerProjection::Exact : PowerProjection::Printed);
          },
          py::arg("power"), py::arg("max_power"), py::arg("exact") = false);
    m.def("project_phase", &project_phase, py::arg("phases"));
    m.def("heatmap", [](const Problem& p, const DesignState& s) { return export_heatmap(s, p.config.geometry); },
          py::arg("problem"), py::arg("state"));

    m.def("check_gradients", [](const std::string& path, const py::dict& overrides, std::vector<std::string> blocks) {
              const auto file = with_overrides(path, overrides);
              std::vector<Block> which;
              for (const auto& b : blocks) which.push_back(parse_block(b));
              if (which.empty()) which = {Block::Morph, Block::Power, Block::Phase};
              std::vector<GradientCheckRow> rows;
              {
                  py::gil_scoped_release release;
                  rows = run_gradient_check(file, load_gradient_check(file), which,
                                            static_cast<std::uint64_t>(file.integer_or("seed", 1)));
              }
              py::list out;
              for (const auto& r : rows) {
                  py::dict d;
                  d["block"] = to_string(r.block);
                  d["instances"] = r.instances;
                  d["worst_error"] = r.worst_error;
                  d["threshold"] = r.threshold;
                  d["worst_seed"] = r.worst_seed;
                  d["pass"] = r.pass;
                  out.append(d);
              }
              return out;
          },
          py::arg("path"), py::arg("overrides") = py::dict(), py::arg("blocks") = std::vector<std::string>{});

    m.def("run_experiment", [](const std::string& spec_path, py::object output, py::object trials, py::object threads) {
              auto spec = load_experiment(spec_path);
              if (!output.is_none()) spec.output_dir = output.cast<std::string>();
              if (!trials.is_none()) spec.trials = trials.cast<int>();
              if (!threads.is_none()) spec.threads = threads.cast<int>();
              spec.validate();
              ExperimentResult r;
              {
                  py::gil_scoped_release release;
                  r = run_experiment(spec);
              }
              py::dict d;
              d["files"] = r.files;
              d["failures"] = r.failures;
              d["resumed_points"] = r.resumed_points;
              d["output_dir"] = spec.output_dir;
              return d;
          },
          py::arg("spec"), py::arg("output") = py::none(), py::arg("trials") = py::none(),
          py::arg("threads") = py::none());
}
