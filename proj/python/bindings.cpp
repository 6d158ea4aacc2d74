#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "senskit/bench/experiment.hpp"
#include "senskit/coefficients.hpp"
#include "senskit/errors.hpp"
#include "senskit/estimators.hpp"
#include "senskit/grid.hpp"
#include "senskit/measurement.hpp"
#include "senskit/powerflow.hpp"
#include "senskit/profiles.hpp"

namespace py = pybind11;
using namespace senskit;

namespace {

py::dict cell_dict(const bench::CellReport& c) {
    py::dict d;
    d["method"] = c.method;
    d["it_class"] = c.it_class;
    d["node"] = c.node;
    d["mean_of_rmse"] = c.mean_of_rmse;
    d["rmse"] = c.rmse;
    d["normalized_error_pct"] = c.normalized.percent;
    d["final_mean_of_rmse"] = c.final_mean_of_rmse;
    d["best_epoch"] = c.best_epoch;
    d["read_min"] = c.read_min;
    d["read_max"] = c.read_max;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "senskit native core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<GridModel>(m, "Grid")
        .def_property_readonly("n_buses", &GridModel::n_buses)
        .def_property_readonly("n_pq", &GridModel::n_pq)
        .def_property_readonly("z_base_ohm", &GridModel::z_base_ohm)
        .def_readonly("s_base_va", &GridModel::s_base_va)
        .def("to_json", [](const GridModel& g) { return grid_to_json(g); })
        .def("__repr__", [](const GridModel& g) {
            return "<senskit.Grid " + std::to_string(g.n_buses()) + " buses>";
        });
    m.def("load_grid", &load_grid, py::arg("path"));
    m.def("parse_grid_json", &parse_grid_json, py::arg("text"));

    m.def(
        "solve_loadflow",
        [](const GridModel& g, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
            const auto sol = solve_loadflow(g, PowerInjection{p, q});
            return py::make_tuple(Eigen::VectorXcd(sol.v), sol.iterations);
        },
        py::arg("grid"), py::arg("p"), py::arg("q"), "Per-unit injections at the non-slack buses; returns (v, iterations).");

    m.def(
        "sensitivities",
        [](const GridModel& g, const Eigen::VectorXd& p, const Eigen::VectorXd& q, bool finite_difference) {
            const PowerInjection inj{p, q};
            const auto k = finite_difference ? finite_difference_sensitivities(g, inj)
                                             : analytical_sensitivities(g, solve_loadflow(g, inj));
            return py::make_tuple(Eigen::MatrixXd(k.kp), Eigen::MatrixXd(k.kq));
        },
        py::arg("grid"), py::arg("p"), py::arg("q"), py::arg("finite_difference") = false,
        "Returns (kp, kq), row i / column j for non-slack buses i+1, j+1.");

    py::class_<ProfileSet>(m, "Profiles")
        .def_readonly("p", &ProfileSet::p)
        .def_readonly("q", &ProfileSet::q)
        .def_readonly("pv", &ProfileSet::pv)
        .def_property_readonly("steps", &ProfileSet::steps)
        .def("slice", &ProfileSet::slice, py::arg("begin"), py::arg("end"));
    m.def(
        "generate_profiles",
        [](const GridModel& g, const std::string& config_json, std::uint64_t seed) {
            return generate_profiles(g, config_json.empty() ? ProfileConfig{} : ProfileConfig::from_json(config_json),
                                     seed);
        },
        py::arg("grid"), py::arg("config_json") = "", py::arg("seed") = 0);
    m.def("read_profiles_csv", py::overload_cast<const std::filesystem::path&>(&read_profiles_csv));

    py::class_<MeasurementSeries>(m, "Measurements")
        .def_readonly("t0", &MeasurementSeries::t0)
        .def_readonly("v_mag", &MeasurementSeries::v_mag)
        .def_readonly("p", &MeasurementSeries::p)
        .def_readonly("q", &MeasurementSeries::q)
        .def_property_readonly("steps", &MeasurementSeries::steps)
        .def_property_readonly("it_class", [](const MeasurementSeries& s) { return s.it_class.name; });
    m.def(
        "simulate",
        [](const GridModel& g, const ProfileSet& ps, const std::string& it_class, std::uint64_t seed) {
            py::gil_scoped_release release;
            return simulate_measurements(g, ps, ITClass::by_name(it_class), seed);
        },
        py::arg("grid"), py::arg("profiles"), py::arg("it_class") = "0.5", py::arg("seed") = 0);
    m.def("read_measurements_csv", &read_measurements_csv);

    m.def(
        "ls_estimate",
        [](const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double max_condition) {
            RegressionWindow w;
            w.a = a;
            w.y = y;
            const auto est = ls_estimate(w, LsOptions{max_condition});
            return py::make_tuple(Eigen::VectorXd(est.z), est.rank_deficient);
        },
        py::arg("a"), py::arg("y"), py::arg("max_condition") = 1e8, "Returns (z, rank_deficient).");
    m.def(
        "build_window",
        [](const MeasurementSeries& s, int node, int t, int m_len) {
            const auto w = build_window(s, node, t, m_len);
            return py::make_tuple(Eigen::MatrixXd(w.a), Eigen::VectorXd(w.y));
        },
        py::arg("series"), py::arg("node"), py::arg("t"), py::arg("m"));
    m.def(
        "ls_sliding",
        [](const MeasurementSeries& s, int node, int window, int stride, int t_first, int t_end) {
            const auto r = ls_sliding(s, node, window, stride, t_first, t_end);
            return py::make_tuple(r.t, Eigen::MatrixXd(r.z));
        },
        py::arg("series"), py::arg("node"), py::arg("window"), py::arg("stride"), py::arg("t_first"),
        py::arg("t_end"));
    m.def(
        "true_coefficients",
        [](const GridModel& g, const ProfileSet& ps, int node, const std::vector<int>& ts) {
            py::gil_scoped_release release;
            return Eigen::MatrixXd(true_coefficient_series(g, ps, {node}, ts).at(node).z);
        },
        py::arg("grid"), py::arg("profiles"), py::arg("node"), py::arg("timesteps"));

    m.def(
        "run_comparison",
        [](const std::filesystem::path& config, std::optional<std::filesystem::path> out_dir) {
            auto cfg = bench::load_experiment_config(config);
            if (out_dir) cfg.output_dir = *out_dir;
            bench::MetricsReport r;
            {
                py::gil_scoped_release release;
                r = bench::run_comparison(cfg);
            }
            py::list cells;
            for (const auto& c : r.cells) cells.append(cell_dict(c));
            return py::make_tuple(r.test_begin, r.test_end, cells);
        },
        py::arg("config"), py::arg("out_dir") = py::none(), "Returns (test_begin, test_end, [cell dicts]).");
}
