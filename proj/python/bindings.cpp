#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "structreg/auction.hpp"
#include "structreg/config.hpp"
#include "structreg/entry_exit.hpp"
#include "structreg/regularize.hpp"
#include "structreg/report.hpp"
#include "structreg/runner.hpp"
#include "structreg/stat.hpp"

namespace py = pybind11;
using namespace structreg;

namespace {

py::dict report_dict(const MonteCarloReport& r) {
    py::list summary;
    for (const auto& s : r.summary) {
        py::dict row;
        row["estimator"] = s.estimator;
        row["domain"] = s.domain;
        row["bias"] = s.metrics.bias;
        row["variance"] = s.metrics.variance;
        row["mse"] = s.metrics.mse;
        summary.append(row);
    }
    py::dict d;
    d["experiment"] = r.experiment;
    d["scenario"] = r.scenario;
    d["trials"] = r.trials;
    d["seed"] = r.seed;
    d["summary"] = summary;
    d["summary_csv"] = summary_csv(r);
    d["curves_csv"] = curves_csv(r);
    d["diagnostics"] = r.diagnostics;
    d["notes"] = r.notes;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Structural regularization estimators and Monte Carlo harness";
    m.attr("__version__") = STRUCTREG_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "fit_ols",
        [](const Matrix& x, const Vector& y) {
            const LinearFit f = fit_ols(x, y);
            return py::make_tuple(f.intercept, f.coefficients);
        },
        py::arg("x"), py::arg("y"), "OLS with intercept; returns (intercept, slopes).");
    m.def(
        "fit_2sls",
        [](const Vector& y, const Matrix& x, const Matrix& z) {
            const LinearFit f = fit_2sls(y, x, z);
            return py::make_tuple(f.intercept, f.coefficients);
        },
        py::arg("y"), py::arg("x"), py::arg("z"), "Two-stage least squares with intercept; returns (intercept, slopes).");
    m.def("sre_ridge", &sre_ridge, py::arg("x"), py::arg("y"), py::arg("theta_m"), py::arg("weights"), py::arg("lam"),
          "Ridge shrinkage toward theta_m; returns [intercept, slopes].");
    m.def("sre_gmm", &sre_gmm, py::arg("x"), py::arg("z"), py::arg("y"), py::arg("w"), py::arg("theta_m"),
          py::arg("weights"), py::arg("lam"), "Linear GMM with a quadratic penalty toward theta_m.");

    m.def(
        "equilibrium_bid",
        [](double v, int n, double a, double b) {
            const ValueDistribution f = a > 0 ? ValueDistribution::beta(a, b) : ValueDistribution::uniform();
            return equilibrium_bid(v, n, f);
        },
        py::arg("v"), py::arg("n"), py::arg("a") = 0.0, py::arg("b") = 0.0,
        "First-price bid; uniform values unless Beta shapes a, b are given.");

    m.def(
        "solve_stationary",
        [](double mu, double alpha, double entry_cost, double beta, double r) {
            DdcParams p;
            p.mu = mu;
            p.alpha = alpha;
            p.entry_cost = entry_cost;
            p.beta = beta;
            const StationarySolution s = solve_stationary(p, r);
            return py::make_tuple(s.ccp.enter, s.ccp.stay, s.v0, s.v1);
        },
        py::arg("mu"), py::arg("alpha"), py::arg("entry_cost"), py::arg("beta"), py::arg("r"),
        "Stationary entry/exit model; returns (p_enter, p_stay, v0, v1).");

    m.def(
        "pointwise_metrics",
        [](const std::vector<std::vector<double>>& predictions, const std::vector<double>& truth) {
            const Metrics mt = pointwise_metrics(predictions, truth);
            return py::make_tuple(mt.bias, mt.variance, mt.mse);
        },
        py::arg("predictions"), py::arg("truth"), "Returns (bias, variance, mse).");

    m.def("experiment_names", &experiment_names);
    m.def("canonical_config", [](const std::string& text) { return canonical_json(parse_config(text)); },
          py::arg("config_json"), "Validate a JSON config and return its canonical form.");
    m.def(
        "run",
        [](const std::string& text) {
            const RunConfig c = parse_config(text);
            MonteCarloReport r;
            {
                py::gil_scoped_release release;
                r = run_monte_carlo(c);
            }
            return report_dict(r);
        },
        py::arg("config_json"), "Run a Monte Carlo experiment in memory.");
}
