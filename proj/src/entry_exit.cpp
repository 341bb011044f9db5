#include "structreg/entry_exit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "structreg/tuning.hpp"

namespace structreg {

namespace {

constexpr double kGamma = std::numbers::egamma;

double lse(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) {
    return std::log(p) - std::log1p(-p);
}

long half_of(long n) {
    return n / 2;
}

// Initial incumbents when each of the two firm groups starts half incumbent.
long group_incumbents(long firms) {
    return half_of(firms) / 2;
}

}  // namespace

void DdcParams::validate() const {
    if (!std::isfinite(mu) || !std::isfinite(alpha)) throw std::invalid_argument("DdcParams: mu and alpha must be finite");
    if (!(entry_cost >= 0.0) || !std::isfinite(entry_cost)) throw std::invalid_argument("DdcParams: entry_cost must be >= 0");
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("DdcParams: beta must lie in [0, 1)");
    if (firms < 4) throw std::invalid_argument("DdcParams: need at least four firms");
    if (!(t_train > 0 && t_train < t_total)) throw std::invalid_argument("DdcParams: need 0 < t_train < t_total");
}

Vector draw_profit_path(const ProfitLaw& law, int t_total, SeededRng& rng) {
    if (t_total < 1) throw std::invalid_argument("draw_profit_path: t_total must be positive");
    Vector r(t_total);
    double u = 0.0;
    for (int t = 1; t <= t_total; ++t) {
        const double e = rng.normal(0.0, law.sd);
        u = t == 1 ? e : law.ar * u + e;
        r(t - 1) = law.r0 + law.slope * t + u;
    }
    return r;
}

const char* to_string(Regime r) {
    switch (r) {
        case Regime::PerfectForesight: return "perfect-foresight";
        case Regime::Adaptive: return "adaptive";
        case Regime::Myopic: return "myopic";
    }
    return "?";
}

Regime regime_from_string(const std::string& s) {
    if (s == "perfect-foresight" || s == "rational") return Regime::PerfectForesight;
    if (s == "adaptive") return Regime::Adaptive;
    if (s == "myopic") return Regime::Myopic;
    throw std::invalid_argument("unknown regime '" + s + "'");
}

StationarySolution solve_stationary(const DdcParams& params, double r) {
    if (!(params.beta >= 0.0 && params.beta < 1.0)) throw std::invalid_argument("solve_stationary: beta must lie in [0, 1)");
    const double f = params.mu + params.alpha * r;
    const double b = params.beta;
    StationarySolution s;
    double v0 = 0.0;
    double v1 = 0.0;
    for (int it = 1; it <= 1000000; ++it) {
        const double n0 = kGamma + lse(b * v0, f - params.entry_cost + b * v1);
        const double n1 = kGamma + lse(b * v0, f + b * v1);
        const double diff = std::max(std::abs(n0 - v0), std::abs(n1 - v1));
        v0 = n0;
        v1 = n1;
        s.iterations = it;
        if (diff <= 1e-12 * std::max(1.0, std::max(std::abs(v0), std::abs(v1)))) break;
    }
    s.v0 = v0;
    s.v1 = v1;
    s.ccp.enter = logistic(f - params.entry_cost + b * v1 - b * v0);
    s.ccp.stay = logistic(f + b * v1 - b * v0);
    return s;
}

ForesightSolution solve_perfect_foresight(const DdcParams& params, const Vector& r) {
    const Eigen::Index t_total = r.size();
    if (t_total < 1) throw std::invalid_argument("solve_perfect_foresight: empty profit path");
    const StationarySolution tail = solve_stationary(params, r(t_total - 1));
    const double b = params.beta;
    ForesightSolution out;
    out.choice_values.resize(t_total, 4);
    out.v0.resize(t_total);
    out.v1.resize(t_total);
    out.ccp.enter.resize(t_total);
    out.ccp.stay.resize(t_total);
    double next0 = tail.v0;
    double next1 = tail.v1;
    for (Eigen::Index t = t_total - 1; t >= 0; --t) {
        const double f = params.mu + params.alpha * r(t);
        const double c00 = b * next0;
        const double c01 = f - params.entry_cost + b * next1;
        const double c10 = b * next0;
        const double c11 = f + b * next1;
        out.choice_values.row(t) << c00, c01, c10, c11;
        out.ccp.enter(t) = logistic(c01 - c00);
        out.ccp.stay(t) = logistic(c11 - c10);
        out.v0(t) = kGamma + lse(c00, c01);
        out.v1(t) = kGamma + lse(c10, c11);
        next0 = out.v0(t);
        next1 = out.v1(t);
    }
    return out;
}

CcpPair myopic_ccp(const DdcParams& params, double r) {
    const double f = params.mu + params.alpha * r;
    return {logistic(f - params.entry_cost), logistic(f)};
}

Ccps regime_ccps(Regime regime, const DdcParams& params, const Vector& r, double cache_step) {
    switch (regime) {
        case Regime::PerfectForesight:
            return solve_perfect_foresight(params, r).ccp;
        case Regime::Myopic: {
            Ccps c{Vector(r.size()), Vector(r.size())};
            for (Eigen::Index t = 0; t < r.size(); ++t) {
                const CcpPair p = myopic_ccp(params, r(t));
                c.enter(t) = p.enter;
                c.stay(t) = p.stay;
            }
            return c;
        }
        case Regime::Adaptive: {
            if (cache_step < 0.0) throw std::invalid_argument("regime_ccps: cache_step must be >= 0");
            Ccps c{Vector(r.size()), Vector(r.size())};
            std::map<long long, CcpPair> cache;
            for (Eigen::Index t = 0; t < r.size(); ++t) {
                if (cache_step == 0.0) {
                    const CcpPair p = solve_stationary(params, r(t)).ccp;
                    c.enter(t) = p.enter;
                    c.stay(t) = p.stay;
                    continue;
                }
                const auto key = static_cast<long long>(std::llround(r(t) / cache_step));
                auto it = cache.find(key);
                if (it == cache.end()) {
                    it = cache.emplace(key, solve_stationary(params, static_cast<double>(key) * cache_step).ccp).first;
                }
                c.enter(t) = it->second.enter;
                c.stay(t) = it->second.stay;
            }
            return c;
        }
    }
    throw std::invalid_argument("regime_ccps: unknown regime");
}

long MarketPanel::incumbents(int t) const {
    if (t < 0 || t > periods()) throw std::out_of_range("MarketPanel::incumbents: period out of range");
    if (t == 0) return initial_incumbents;
    const auto& c = counts[static_cast<std::size_t>(t - 1)];
    return c[1] + c[3];
}

Vector MarketPanel::occupancy() const {
    Vector x(periods() + 1);
    for (int t = 0; t <= periods(); ++t) x(t) = static_cast<double>(incumbents(t)) / static_cast<double>(firms);
    return x;
}

Ccps MarketPanel::observed_ccps() const {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Ccps c{Vector(periods()), Vector(periods())};
    for (int t = 0; t < periods(); ++t) {
        const auto& k = counts[static_cast<std::size_t>(t)];
        const long out0 = k[0] + k[1];
        const long out1 = k[2] + k[3];
        c.enter(t) = out0 > 0 ? static_cast<double>(k[1]) / static_cast<double>(out0) : nan;
        c.stay(t) = out1 > 0 ? static_cast<double>(k[3]) / static_cast<double>(out1) : nan;
    }
    return c;
}

MarketPanel MarketPanel::combined(const MarketPanel& other) const {
    if (other.periods() != periods()) throw std::invalid_argument("MarketPanel::combined: period count mismatch");
    MarketPanel out = *this;
    out.firms += other.firms;
    out.initial_incumbents += other.initial_incumbents;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        for (std::size_t k = 0; k < 4; ++k) out.counts[t][k] += other.counts[t][k];
    }
    return out;
}

MarketPanel simulate_market(const Ccps& ccp, long firms, long initial_incumbents, SeededRng& rng) {
    if (firms < 1 || initial_incumbents < 0 || initial_incumbents > firms) {
        throw std::invalid_argument("simulate_market: bad firm counts");
    }
    MarketPanel panel;
    panel.firms = firms;
    panel.initial_incumbents = initial_incumbents;
    panel.counts.reserve(static_cast<std::size_t>(ccp.periods()));
    long inc = initial_incumbents;
    for (Eigen::Index t = 0; t < ccp.periods(); ++t) {
        const long stay = rng.binomial(inc, ccp.stay(t));
        const long enter = rng.binomial(firms - inc, ccp.enter(t));
        panel.counts.push_back({firms - inc - enter, enter, inc - stay, stay});
        inc = stay + enter;
    }
    return panel;
}

MarketPanel simulate_market(Regime regime, const DdcParams& params, const Vector& r, SeededRng& rng) {
    return simulate_market(regime_ccps(regime, params, r), params.firms, half_of(params.firms), rng);
}

Vector expected_path(const Ccps& ccp, double initial_share) {
    Vector x(ccp.periods() + 1);
    x(0) = initial_share;
    for (Eigen::Index t = 0; t < ccp.periods(); ++t) x(t + 1) = x(t) * ccp.stay(t) + (1.0 - x(t)) * ccp.enter(t);
    return x;
}

Matrix euler_residuals(const Ccps& ccp, const DdcParams& params, const Vector& r) {
    const Eigen::Index t_total = ccp.periods();
    if (r.size() != t_total) throw std::invalid_argument("euler_residuals: length mismatch");
    const double b = params.beta;
    Matrix e(std::max<Eigen::Index>(t_total - 1, 0), 2);
    for (Eigen::Index t = 0; t + 1 < t_total; ++t) {
        const double f = params.mu + params.alpha * r(t);
        const double lhs01 = logit(ccp.enter(t)) + b * (std::log(ccp.stay(t + 1)) - std::log(ccp.enter(t + 1)));
        const double lhs10 = -logit(ccp.stay(t)) + b * (std::log1p(-ccp.enter(t + 1)) - std::log1p(-ccp.stay(t + 1)));
        e(t, 0) = lhs01 - (f - (1.0 - b) * params.entry_cost);
        e(t, 1) = lhs10 + f;
    }
    return e;
}

namespace {

DdcEstimate euler_least_squares(const Ccps& ccp, const Vector& r, double beta, int periods,
                                const std::vector<bool>& usable) {
    std::vector<std::array<double, 3>> rows;
    std::vector<double> lhs;
    for (int t = 0; t + 1 < periods; ++t) {
        if (!usable[static_cast<std::size_t>(t)] || !usable[static_cast<std::size_t>(t + 1)]) continue;
        const auto tt = static_cast<Eigen::Index>(t);
        rows.push_back({1.0, r(tt), -(1.0 - beta)});
        lhs.push_back(logit(ccp.enter(tt)) + beta * (std::log(ccp.stay(tt + 1)) - std::log(ccp.enter(tt + 1))));
        rows.push_back({-1.0, -r(tt), 0.0});
        lhs.push_back(-logit(ccp.stay(tt)) + beta * (std::log1p(-ccp.enter(tt + 1)) - std::log1p(-ccp.stay(tt + 1))));
    }
    if (rows.size() < 6) throw std::runtime_error("estimate_ccp_euler: insufficient transitions");
    Matrix a(static_cast<Eigen::Index>(rows.size()), 3);
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        a.row(static_cast<Eigen::Index>(i)) << rows[i][0], rows[i][1], rows[i][2];
        y(static_cast<Eigen::Index>(i)) = lhs[i];
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    if (qr.rank() < 3) throw std::runtime_error("estimate_ccp_euler: singular design (beta = 1 or constant R?)");
    const Vector th = qr.solve(y);
    return {th(0), th(1), th(2), rows.size()};
}

int resolve_periods(int periods, Eigen::Index available, Eigen::Index r_size) {
    const int p = periods > 0 ? periods : static_cast<int>(available);
    if (p > available || p > r_size) throw std::invalid_argument("estimate_ccp_euler: not enough periods");
    return p;
}

}  // namespace

DdcEstimate estimate_ccp_euler(const MarketPanel& panel, const Vector& r, double beta, int periods) {
    const int p = resolve_periods(periods, panel.periods(), r.size());
    const double lo = 1.0 / (2.0 * static_cast<double>(panel.firms));
    Ccps ccp = panel.observed_ccps();
    std::vector<bool> usable(static_cast<std::size_t>(panel.periods()));
    for (int t = 0; t < panel.periods(); ++t) {
        usable[static_cast<std::size_t>(t)] = std::isfinite(ccp.enter(t)) && std::isfinite(ccp.stay(t));
        ccp.enter(t) = std::clamp(ccp.enter(t), lo, 1.0 - lo);
        ccp.stay(t) = std::clamp(ccp.stay(t), lo, 1.0 - lo);
    }
    return euler_least_squares(ccp, r, beta, p, usable);
}

DdcEstimate estimate_ccp_euler(const Ccps& ccp, const Vector& r, double beta, int periods) {
    const int p = resolve_periods(periods, ccp.periods(), r.size());
    std::vector<bool> usable(static_cast<std::size_t>(ccp.periods()));
    for (Eigen::Index t = 0; t < ccp.periods(); ++t) {
        const double e = ccp.enter(t);
        const double s = ccp.stay(t);
        usable[static_cast<std::size_t>(t)] = e > 0.0 && e < 1.0 && s > 0.0 && s < 1.0;
    }
    return euler_least_squares(ccp, r, beta, p, usable);
}

Matrix lagged_inputs(const Vector& occupancy, const Vector& r, int lags, int first, int last) {
    if (lags < 0 || first < 1 || first - lags < 0 || first > last || last > r.size() || last > occupancy.size() - 1) {
        throw std::invalid_argument("lagged_inputs: period range out of bounds");
    }
    Matrix x(last - first + 1, lags + 2);
    for (int t = first; t <= last; ++t) {
        const Eigen::Index i = t - first;
        x(i, 0) = r(t - 1);
        for (int l = 1; l <= lags; ++l) x(i, l) = occupancy(t - l);
        x(i, lags + 1) = t;
    }
    return x;
}

StructuralBenchmark ddc_benchmark(const DdcEstimate& fit, double beta, const Vector& r, long synthetic_firms, int lags,
                                  int first) {
    if (!std::isfinite(fit.mu) || !std::isfinite(fit.alpha) || !std::isfinite(fit.entry_cost)) {
        throw std::invalid_argument("ddc_benchmark: fitted parameters must be finite");
    }
    DdcParams p;
    p.mu = fit.mu;
    p.alpha = fit.alpha;
    p.entry_cost = fit.entry_cost;
    p.beta = beta;
    const Ccps ccp = solve_perfect_foresight(p, r).ccp;
    const int t_total = static_cast<int>(r.size());

    StructuralBenchmark b;
    b.id = "ddc-perfect-foresight";
    b.parameters = {{"mu", fit.mu}, {"alpha", fit.alpha}, {"entry_cost", fit.entry_cost}, {"beta", beta}};
    b.implied_mean = [ccp, lags](const Matrix& x) {
        Vector out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const auto t = static_cast<Eigen::Index>(std::llround(x(i, lags + 1)));
            if (t < 1 || t > ccp.periods()) throw std::invalid_argument("ddc_benchmark: period out of range");
            const double prev = x(i, 1);
            out(i) = prev * ccp.stay(t - 1) + (1.0 - prev) * ccp.enter(t - 1);
        }
        return out;
    };
    const auto synthetic = [ccp, r, synthetic_firms, lags, first, t_total](SeededRng& rng) {
        const MarketPanel panel = simulate_market(ccp, synthetic_firms, half_of(synthetic_firms), rng);
        const Vector occ = panel.occupancy();
        return std::make_pair(lagged_inputs(occ, r, lags, first, t_total), Vector(occ.segment(first, t_total - first + 1)));
    };
    b.design = [synthetic](const DomainSpec&, std::size_t, SeededRng& rng) { return synthetic(rng).first; };
    b.simulate = [synthetic](const DomainSpec&, std::size_t, SeededRng& rng) {
        auto [x, y] = synthetic(rng);
        return Dataset(std::move(x), std::move(y));
    };
    return b;
}

EntryExitSetup entry_exit_setup(Regime regime, const DdcParams& params, const ProfitLaw& law,
                                const EntryExitSettings& settings, SeededRng& rng) {
    params.validate();
    EntryExitSetup s;
    s.regime = regime;
    s.params = params;
    s.r = draw_profit_path(law, params.t_total, rng);
    s.ccp = regime_ccps(regime, params, s.r, settings.cache_step);
    const long initial = group_incumbents(params.firms) + group_incumbents(params.firms - half_of(params.firms));
    s.truth = expected_path(s.ccp, static_cast<double>(initial) / static_cast<double>(params.firms));
    return s;
}

ArxSelection select_arx_aic(const Matrix& inputs, const Vector& outcome, int max_p, int max_q) {
    if (max_p < 1 || max_q < 1) throw std::invalid_argument("select_arx_aic: orders must be >= 1");
    const double n = static_cast<double>(outcome.size());
    ArxSelection best;
    bool have = false;
    for (int p = 1; p <= max_p; ++p) {
        for (int q = 1; q <= max_q; ++q) {
            const FeatureMap fm = arx_map(p, q, inputs.cols());
            const Matrix f = fm.expand(inputs);
            const LinearFit fit = fit_ols(f, outcome, fm.labels);
            const double rss = (outcome - fit.predict(f)).squaredNorm();
            const double aic = n * std::log(std::max(rss, std::numeric_limits<double>::min()) / n) + 2.0 * (p + q + 1);
            if (!have || aic < best.aic) {
                best = {p, q, fit, aic};
                have = true;
            }
        }
    }
    return best;
}

EntryExitTrial entry_exit_trial(const EntryExitSetup& setup, const EntryExitSettings& settings, SeededRng& rng) {
    const char* stage = "simulate";
    try {
        const DdcParams& prm = setup.params;
        const int t_total = prm.t_total;
        const int t_train = prm.t_train;
        const int lags = std::max(settings.max_q, settings.sre_q);
        if (settings.first_period < lags || settings.eval_start < lags || settings.eval_start > t_train) {
            throw std::invalid_argument("entry_exit_trial: first period must leave room for the lags");
        }

        const long half = half_of(prm.firms);
        SeededRng rng1 = rng.child(1);
        SeededRng rng2 = rng.child(2);
        const MarketPanel g1 = simulate_market(setup.ccp, half, group_incumbents(prm.firms), rng1);
        const MarketPanel g2 = simulate_market(setup.ccp, prm.firms - half, group_incumbents(prm.firms - half), rng2);
        const MarketPanel full = g1.combined(g2);
        const Vector x = full.occupancy();
        const Vector x2 = g2.occupancy();

        EntryExitTrial trial;
        for (int t = settings.eval_start; t <= t_train; ++t) trial.t_in.push_back(t);
        for (int t = t_train + 1; t <= t_total; ++t) trial.t_out.push_back(t);
        const auto n_in = static_cast<Eigen::Index>(trial.t_in.size());
        const Matrix eval = lagged_inputs(x, setup.r, lags, settings.eval_start, t_total);
        const auto push = [&](const std::string& name, const Vector& pred) {
            trial.estimators.push_back(name);
            trial.pred_in.emplace_back(pred.data(), pred.data() + n_in);
            trial.pred_out.emplace_back(pred.data() + n_in, pred.data() + pred.size());
        };

        stage = "statistical";
        // Statistical: ARX with AIC-selected orders on the observed market series.
        const Matrix train_rows = lagged_inputs(x, setup.r, lags, settings.first_period, t_train);
        const Vector train_y = x.segment(settings.first_period, t_train - settings.first_period + 1);
        const ArxSelection sel = select_arx_aic(train_rows, train_y, settings.max_p, settings.max_q);
        trial.arx_p = sel.p;
        trial.arx_q = sel.q;
        push("statistical", sel.fit.predict(arx_map(sel.p, sel.q, eval.cols()).expand(eval)));

        stage = "structural";
        // Structural: Euler-equation estimate, then one-step-ahead prediction under perfect foresight.
        trial.structural = estimate_ccp_euler(full, setup.r, prm.beta, t_train);
        DdcParams fitted = prm;
        fitted.mu = trial.structural.mu;
        fitted.alpha = trial.structural.alpha;
        fitted.entry_cost = trial.structural.entry_cost;
        const Ccps sccp = solve_perfect_foresight(fitted, setup.r).ccp;
        Vector spred(eval.rows());
        for (Eigen::Index i = 0; i < eval.rows(); ++i) {
            const auto t = static_cast<Eigen::Index>(eval(i, lags + 1));
            spred(i) = eval(i, 1) * sccp.stay(t - 1) + (1.0 - eval(i, 1)) * sccp.enter(t - 1);
        }
        push("structural", spred);

        stage = "sre";
        // SRE: benchmark estimated on firm group 1, ARX(p, q) regularized on group 2's series.
        DdcEstimate first_stage;
        try {
            first_stage = estimate_ccp_euler(g1, setup.r, prm.beta, t_train);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("structural stage: ") + e.what());
        }
        const StructuralBenchmark bench =
            ddc_benchmark(first_stage, prm.beta, setup.r, settings.synthetic_firms, lags, settings.first_period);
        std::vector<long> times;
        for (int t = settings.first_period; t <= t_train; ++t) times.push_back(t);
        const Dataset second(lagged_inputs(x2, setup.r, lags, settings.first_period, t_train),
                             x2.segment(settings.first_period, t_train - settings.first_period + 1), std::nullopt, times);
        SreProblem problem;
        problem.features = arx_features(settings.sre_p, settings.sre_q);
        problem.stage = SecondStage::Ridge;
        PenaltySpec penalty;
        penalty.lambda_grid = settings.lambda_grid.empty() ? PenaltySpec::default_grid(second.rows()) : settings.lambda_grid;
        penalty.weights = Vector::Ones(settings.sre_p + settings.sre_q);
        CvPlan plan;
        plan.kind = CvKind::Rolling;
        plan.window_length = settings.window_length;
        plan.horizon = settings.horizon;
        SeededRng sre_rng = rng.child(3);
        SREFit sre = structural_regularization(bench, second, problem, penalty, plan, sre_rng);
        sre.method = SreMethod::SampleSplit;
        trial.lambda_star = sre.lambda_star;
        push("sre", sre.predict(eval));
        return trial;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage ") + stage + ": " + e.what());
    }
}

}  // namespace structreg
