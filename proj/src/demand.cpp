#include "structreg/demand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace structreg {

namespace {

// Linear-interpolation sample quantile.
double quantile(std::vector<double> v, double prob) {
    std::sort(v.begin(), v.end());
    const double pos = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Matrix column(const Vector& v) {
    Matrix m(v.size(), 1);
    m.col(0) = v;
    return m;
}

}  // namespace

void DemandParams::validate() const {
    const auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(alpha) || !finite(a) || !finite(b)) throw std::invalid_argument("DemandParams: non-finite parameter");
    if (!(beta > 0.0) || !finite(beta)) throw std::invalid_argument("DemandParams: beta must be positive");
    if (!(lambda_markup > 0.0 && lambda_markup <= 1.0)) {
        throw std::invalid_argument("DemandParams: lambda_markup must lie in (0, 1]");
    }
    if (!(z_upper >= z_lower) || !finite(z_lower) || !finite(z_upper)) {
        throw std::invalid_argument("DemandParams: need z_lower <= z_upper");
    }
    if (!(epsilon_sd >= 0.0) || !finite(epsilon_sd)) throw std::invalid_argument("DemandParams: epsilon_sd must be >= 0");
    if (markets < 4) throw std::invalid_argument("DemandParams: need at least four markets");
}

Dataset MarketData::as_dataset() const { return Dataset(column(p), q, column(z)); }

MarketData MarketData::from_dataset(const Dataset& d) {
    if (d.cols() != 1 || !d.instruments() || d.instruments()->cols() < 1) {
        throw std::invalid_argument("MarketData: expected input p and instrument z");
    }
    return {d.inputs().col(0), d.outcome(), d.instruments()->col(0)};
}

void MarketData::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "m,p,q,z\n";
    char buf[128];
    for (Eigen::Index m = 0; m < size(); ++m) {
        std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g\n", static_cast<long>(m + 1), p(m), q(m), z(m));
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

MarketData simulate_markets(const DemandParams& params, SeededRng& rng) {
    params.validate();
    const Eigen::Index m = params.markets;
    MarketData d{Vector(m), Vector(m), Vector(m)};
    const double lam = params.lambda_markup;
    long bad = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double z = params.z_upper > params.z_lower ? rng.uniform(params.z_lower, params.z_upper) : params.z_lower;
        const double eps = params.epsilon_sd > 0.0 ? rng.normal(0.0, params.epsilon_sd) : 0.0;
        const double c = params.a + params.b * z;
        // p = c + (lam / beta)(alpha - beta p + eps), solved for p
        const double p = (c + lam * (params.alpha + eps) / params.beta) / (1.0 + lam);
        const double q = params.alpha - params.beta * p + eps;
        if (!(p > 0.0) || !(q > 0.0)) ++bad;
        d.p(i) = p;
        d.q(i) = q;
        d.z(i) = z;
    }
    if (static_cast<double>(bad) > 1e-3 * static_cast<double>(m)) {
        throw std::runtime_error("simulate_markets: " + std::to_string(bad) + " of " + std::to_string(m) +
                                 " markets have nonpositive price or quantity; change alpha, cost or noise parameters");
    }
    return d;
}

DemandStructural structural_estimate_demand(const MarketData& data) {
    if (data.size() < 4) throw std::invalid_argument("structural_estimate_demand: need at least four markets");
    Matrix x(data.size(), 2);
    x << data.z, data.q;
    LinearFit ls;
    try {
        ls = fit_ols(x, data.p);
    } catch (const std::exception&) {
        throw std::runtime_error("structural_estimate_demand: design [1, z, q] is rank deficient");
    }
    const double inv_beta = ls.coefficients(1);
    if (!(inv_beta != 0.0)) throw std::runtime_error("structural_estimate_demand: zero coefficient on q");
    DemandStructural s;
    s.a = ls.intercept;
    s.b = ls.coefficients(0);
    s.beta = 1.0 / inv_beta;
    s.alpha = (data.q + s.beta * data.p).mean();
    const Vector resid = data.q.array() - (s.alpha - s.beta * data.p.array());
    s.residual_sd = std::sqrt((resid.array() - resid.mean()).square().mean());
    return s;
}

const char* to_string(DemandForm f) { return f == DemandForm::Linear ? "linear" : "loglog"; }

LinearFit rf_demand(const MarketData& data, DemandForm form, double min_first_stage_f) {
    Vector x = data.p;
    Vector y = data.q;
    if (form == DemandForm::LogLog) {
        if (!(data.p.minCoeff() > 0.0) || !(data.q.minCoeff() > 0.0)) {
            throw std::invalid_argument("rf_demand: log-log form needs positive prices and quantities");
        }
        x = data.p.array().log();
        y = data.q.array().log();
    }
    const Matrix z = column(data.z);
    if (min_first_stage_f > 0.0) {
        const double f = first_stage_f(x, z);
        if (!(f >= min_first_stage_f)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "rf_demand: weak instrument (first-stage F = %.4g)", f);
            throw std::runtime_error(buf);
        }
    }
    LinearFit fit = fit_2sls(y, column(x), z);
    fit.labels = {form == DemandForm::Linear ? "p" : "log_p"};
    return fit;
}

double rf_predict(const LinearFit& fit, DemandForm form, double p) {
    if (form == DemandForm::Linear) return fit.intercept + fit.coefficients(0) * p;
    return std::exp(fit.intercept + fit.coefficients(0) * std::log(p));
}

StructuralBenchmark demand_benchmark(const DemandStructural& fit) {
    if (!(fit.beta > 0.0)) throw std::runtime_error("demand_benchmark: fitted beta must be positive");
    StructuralBenchmark bench;
    bench.id = "linear-demand-monopoly";
    bench.parameters = {{"alpha", fit.alpha}, {"beta", fit.beta}, {"a", fit.a}, {"b", fit.b},
                        {"residual_sd", fit.residual_sd}};
    bench.implied_mean = [fit](const Matrix& x) -> Vector {
        return (fit.alpha - fit.beta * x.col(0).array()).matrix();
    };
    bench.simulate = [fit](const DomainSpec& domain, std::size_t size, SeededRng& rng) {
        const auto n = static_cast<Eigen::Index>(size);
        Matrix p(n, 1);
        Vector q(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i, 0) = rng.uniform(domain[0].lower, domain[0].upper);
            q(i) = fit.demand(p(i, 0)) + (fit.residual_sd > 0.0 ? rng.normal(0.0, fit.residual_sd) : 0.0);
        }
        return Dataset(p, q);
    };
    return bench;
}

BenchmarkFamily demand_family() {
    return [](const Dataset& d) { return demand_benchmark(structural_estimate_demand(MarketData::from_dataset(d))); };
}

Matrix demand_instruments(const Vector& z, int degree) {
    if (degree < 1) throw std::invalid_argument("demand_instruments: degree must be >= 1");
    const double mean = z.mean();
    const double sd = std::sqrt((z.array() - mean).square().mean());
    if (!(sd > 0.0)) throw std::runtime_error("demand_instruments: cost shifter has no variation");
    // Rescaling z spans the same instrument space as raw powers; only conditioning changes.
    const Vector u = (z.array() - mean) / sd;
    Matrix out(z.size(), degree);
    Vector pw = Vector::Ones(z.size());
    for (int k = 0; k < degree; ++k) {
        pw = pw.cwiseProduct(u);
        out.col(k) = pw;
    }
    return out;
}

SREFit sre_demand(const MarketData& data, const BenchmarkFamily& family, const PenaltySpec& penalty,
                  const CvPlan& plan, SeededRng& rng, const DemandSreOptions& options) {
    const Dataset d(column(data.p), data.q, demand_instruments(data.z, options.instrument_degree));
    // The structural stage needs z itself; undo the standardization of the first instrument column.
    const double z_mean = data.z.mean();
    const double z_sd = std::sqrt((data.z.array() - z_mean).square().mean());
    const BenchmarkFamily wrapped = [&family, z_mean, z_sd](const Dataset& first) {
        const Vector z = first.instruments()->col(0).array() * z_sd + z_mean;
        return family(Dataset(first.inputs(), first.outcome(), column(z)));
    };
    SreProblem problem;
    problem.features = polynomial_features(options.g_degree, false);
    problem.stage = SecondStage::Gmm;
    return sre_sample_split(d, wrapped, problem, penalty, plan, rng);
}

DemandScenario DemandScenario::preset(int id) {
    switch (id) {
        case 1: return {1, true, DemandForm::Linear};
        case 2: return {2, false, DemandForm::Linear};
        case 3: return {3, true, DemandForm::LogLog};
        case 4: return {4, false, DemandForm::LogLog};
        default: throw std::invalid_argument("demand scenario must be 1..4, got " + std::to_string(id));
    }
}

DemandParams scenario_params(const DemandScenario& scenario, const DemandParams& base, const DemandSettings& settings) {
    DemandParams p = base;
    p.lambda_markup = scenario.optimal_pricing ? 1.0 : settings.nonoptimal_markup;
    p.validate();
    return p;
}

DemandTruth demand_truth(const DemandParams& params, const DemandSettings& settings, SeededRng& rng) {
    if (settings.grid_points < 2) throw std::invalid_argument("demand_truth: need at least two grid points");
    DemandParams pilot = params;
    pilot.markets = settings.pilot_markets;
    const MarketData d = simulate_markets(pilot, rng);
    const std::vector<double> prices(d.p.data(), d.p.data() + d.p.size());
    const double lo = quantile(prices, 0.01);
    const double hi = quantile(prices, 0.99);
    DemandTruth t;
    const Vector grid = Vector::LinSpaced(settings.grid_points, lo, hi);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        t.p.push_back(grid(i));
        t.truth.push_back(params.true_demand(grid(i)));
    }
    return t;
}

DemandTrial demand_trial(const DemandScenario& scenario, const DemandParams& params, const DemandSettings& settings,
                         const DemandTruth& truth, SeededRng& rng) {
    const char* stage = "simulate";
    try {
        SeededRng sim_rng = rng.child(1);
        const MarketData data = simulate_markets(params, sim_rng);
        const Vector grid = Eigen::Map<const Vector>(truth.p.data(), static_cast<Eigen::Index>(truth.p.size()));

        DemandTrial trial;
        const Vector p_rf = scenario.rf_form == DemandForm::Linear ? data.p : Vector(data.p.array().log());
        trial.first_stage_f = first_stage_f(p_rf, column(data.z));

        stage = "reduced_form";
        const LinearFit rf = rf_demand(data, scenario.rf_form, settings.min_first_stage_f);
        trial.estimators.push_back("reduced_form");
        std::vector<double> pr;
        for (double p : truth.p) pr.push_back(rf_predict(rf, scenario.rf_form, p));
        trial.predictions.push_back(std::move(pr));

        stage = "structural";
        trial.structural = structural_estimate_demand(data);
        trial.estimators.push_back("structural");
        std::vector<double> ps;
        for (double p : truth.p) ps.push_back(trial.structural.demand(p));
        trial.predictions.push_back(std::move(ps));

        stage = "sre";
        PenaltySpec penalty;
        penalty.lambda_grid = settings.lambda_grid.empty() ? PenaltySpec::default_grid(data.size() / 2) : settings.lambda_grid;
        penalty.weights = Vector::Ones(settings.sre.g_degree);
        CvPlan plan;
        plan.kind = CvKind::KFold;
        plan.K = settings.sre.folds;
        SeededRng sre_rng = rng.child(2);
        const SREFit sre = sre_demand(data, demand_family(), penalty, plan, sre_rng, settings.sre);
        trial.lambda_star = sre.lambda_star;
        trial.estimators.push_back("sre");
        const Vector pred = sre.predict(column(grid));
        trial.predictions.emplace_back(pred.data(), pred.data() + pred.size());
        return trial;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage ") + stage + ": " + e.what());
    }
}

}  // namespace structreg
