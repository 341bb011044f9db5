#include "structreg/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "structreg/auction.hpp"
#include "structreg/demand.hpp"
#include "structreg/entry_exit.hpp"

namespace structreg {

namespace {

struct Curve {
    std::string estimator;
    std::string domain;
    std::vector<double> prediction;
    std::vector<double> truth;  ///< empty: the domain's shared truth
};

struct TrialOutput {
    std::vector<Curve> curves;
    std::vector<std::pair<std::string, double>> diagnostics;
};

struct Domain {
    std::string name;
    std::vector<double> x;
    std::vector<double> truth;
};

struct Experiment {
    std::vector<Domain> domains;
    std::vector<std::string> notes;
    std::function<TrialOutput(SeededRng&)> trial;
};

std::string fmt(const char* pattern, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

Experiment auction_experiment(const RunConfig& c) {
    AuctionScenario scenario = AuctionScenario::preset(c.scenario);
    scenario.auctions = c.auction.auctions;
    if (scenario.overbid) scenario.overbid->sigma = c.auction.overbid_sigma;
    scenario.validate();
    AuctionSettings settings;
    settings.max_aic_degree = c.auction.max_aic_degree;
    settings.sre_degree = c.auction.sre_degree;
    settings.degree_weights = c.auction.degree_weights;
    settings.forward_k = c.cv.folds;
    settings.forward_fraction = c.cv.forward_fraction;
    settings.lambda_grid = c.lambda_grid;

    const AuctionTruth truth = auction_truth(scenario);
    Experiment e;
    e.domains = {{"in", truth.n_in, truth.truth_in}, {"out", truth.n_out, truth.truth_out}};
    e.notes.push_back("values: " + scenario.values.describe());
    if (scenario.overbid) {
        e.notes.push_back(fmt("bids scaled by N(0, sigma^2) truncated to (0, inf), sigma = %.17g", scenario.overbid->sigma));
    }
    e.trial = [scenario, settings, truth](SeededRng& rng) {
        const AuctionTrial t = auction_trial(scenario, settings, truth, rng);
        TrialOutput out;
        for (std::size_t k = 0; k < t.estimators.size(); ++k) {
            out.curves.push_back({t.estimators[k], "in", t.pred_in[k], {}});
            out.curves.push_back({t.estimators[k], "out", t.pred_out[k], {}});
        }
        out.diagnostics = {{"aic_degree", t.aic_degree}, {"lambda_star", t.lambda_star}};
        return out;
    };
    return e;
}

Experiment entry_exit_experiment(const RunConfig& c) {
    static const Regime regimes[] = {Regime::PerfectForesight, Regime::Adaptive, Regime::Myopic};
    const Regime regime = regimes[c.scenario - 1];
    EntryExitSettings settings = c.entry_exit;
    settings.window_length = c.cv.window_length;
    settings.horizon = c.cv.horizon;
    settings.lambda_grid = c.lambda_grid;

    Experiment e;
    Domain in{"in", {}, {}};
    Domain out{"out", {}, {}};
    for (int t = settings.eval_start; t <= c.ddc.t_total; ++t) (t <= c.ddc.t_train ? in : out).x.push_back(t);
    e.domains = {in, out};
    e.notes.push_back(std::string("regime: ") + to_string(regime));
    e.notes.push_back("each trial draws its own profit path; truth is that path's expected occupancy");
    e.notes.push_back("model and profit-law parameters are implementation defaults, not published values");
    const DdcParams params = c.ddc;
    const ProfitLaw law = c.profit;
    e.trial = [regime, params, law, settings](SeededRng& rng) {
        SeededRng path_rng = rng.child(4);
        EntryExitSetup setup;
        try {
            setup = entry_exit_setup(regime, params, law, settings, path_rng);
        } catch (const std::exception& ex) {
            throw std::runtime_error(std::string("stage setup: ") + ex.what());
        }
        const EntryExitTrial t = entry_exit_trial(setup, settings, rng);
        std::vector<double> truth_in;
        std::vector<double> truth_out;
        for (double x : t.t_in) truth_in.push_back(setup.truth(static_cast<Eigen::Index>(x)));
        for (double x : t.t_out) truth_out.push_back(setup.truth(static_cast<Eigen::Index>(x)));
        TrialOutput o;
        for (std::size_t k = 0; k < t.estimators.size(); ++k) {
            o.curves.push_back({t.estimators[k], "in", t.pred_in[k], truth_in});
            o.curves.push_back({t.estimators[k], "out", t.pred_out[k], truth_out});
        }
        o.diagnostics = {{"arx_p", t.arx_p},
                         {"arx_q", t.arx_q},
                         {"lambda_star", t.lambda_star},
                         {"mu_hat", t.structural.mu},
                         {"alpha_hat", t.structural.alpha},
                         {"entry_cost_hat", t.structural.entry_cost}};
        return o;
    };
    return e;
}

Experiment demand_experiment(const RunConfig& c) {
    const DemandScenario scenario = DemandScenario::preset(c.scenario);
    DemandSettings settings = c.demand_settings;
    settings.sre.folds = c.cv.folds;
    settings.lambda_grid = c.lambda_grid;
    const DemandParams params = scenario_params(scenario, c.demand, settings);

    SeededRng setup_rng(c.base_seed, 0);
    const DemandTruth truth = demand_truth(params, settings, setup_rng);
    Experiment e;
    e.domains = {{"in", truth.p, truth.truth}};
    e.notes.push_back(fmt("markup lambda = %.17g", params.lambda_markup));
    e.notes.push_back(std::string("reduced form: ") + to_string(scenario.rf_form));
    e.notes.push_back("z uniform, eps normal and the markup are implementation defaults, not published values");
    e.trial = [scenario, params, settings, truth](SeededRng& rng) {
        const DemandTrial t = demand_trial(scenario, params, settings, truth, rng);
        TrialOutput o;
        for (std::size_t k = 0; k < t.estimators.size(); ++k) o.curves.push_back({t.estimators[k], "in", t.predictions[k], {}});
        o.diagnostics = {{"lambda_star", t.lambda_star},
                         {"first_stage_f", t.first_stage_f},
                         {"alpha_hat", t.structural.alpha},
                         {"beta_hat", t.structural.beta}};
        return o;
    };
    return e;
}

}  // namespace

std::size_t worker_count(std::size_t trials) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SRE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) n = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(n, trials));
}

MonteCarloReport run_monte_carlo(const RunConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();

    Experiment exp;
    try {
        if (config.experiment == "auction") exp = auction_experiment(config);
        else if (config.experiment == "entry-exit") exp = entry_exit_experiment(config);
        else exp = demand_experiment(config);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("setup: ") + e.what());
    }

    const auto trials = static_cast<std::size_t>(config.trials);
    std::vector<TrialOutput> outputs(trials);
    std::vector<std::string> errors(trials);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    const auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= trials || failed.load()) return;
            try {
                SeededRng rng(config.base_seed, i + 1);
                outputs[i] = exp.trial(rng);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                failed.store(true);
            }
        }
    };
    const std::size_t workers = worker_count(trials);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < trials; ++i) {
        if (!errors[i].empty()) throw std::runtime_error("trial " + std::to_string(i + 1) + ": " + errors[i]);
    }

    MonteCarloReport report;
    report.experiment = config.experiment;
    report.scenario = config.scenario;
    report.trials = config.trials;
    report.seed = config.base_seed;
    report.version = STRUCTREG_VERSION;
    report.config_snapshot = canonical_json(config);
    report.notes.push_back("scenario: " + scenario_label(config.experiment, config.scenario));
    report.notes.insert(report.notes.end(), exp.notes.begin(), exp.notes.end());

    const auto wanted = [&](const std::string& name) {
        return config.estimators.empty() ||
               std::find(config.estimators.begin(), config.estimators.end(), name) != config.estimators.end();
    };
    for (std::size_t i = 0; i < trials; ++i) {
        for (const auto& curve : outputs[i].curves) {
            if (!wanted(curve.estimator)) continue;
            const auto d = std::find_if(exp.domains.begin(), exp.domains.end(),
                                        [&](const Domain& dom) { return dom.name == curve.domain; });
            if (d == exp.domains.end() || d->x.size() != curve.prediction.size() ||
                (curve.truth.empty() ? d->truth.size() : curve.truth.size()) != d->x.size()) {
                throw std::logic_error("trial output does not match the evaluation grid");
            }
            for (std::size_t k = 0; k < d->x.size(); ++k) {
                const double truth = curve.truth.empty() ? d->truth[k] : curve.truth[k];
                report.curves.push_back(
                    {static_cast<int>(i + 1), curve.estimator, curve.domain, d->x[k], truth, curve.prediction[k]});
            }
        }
        for (const auto& [name, value] : outputs[i].diagnostics) report.diagnostics[name].push_back(value);
    }
    report.summary = summarize(report.curves);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

MonteCarloReport run_and_emit(const RunConfig& config) {
    const std::filesystem::path out = config.output_dir;
    const bool existed = std::filesystem::exists(out);
    try {
        MonteCarloReport report = run_monte_carlo(config);
        emit_outputs(report, out);
        return report;
    } catch (...) {
        std::error_code ec;
        if (!existed) std::filesystem::remove_all(out, ec);
        throw;
    }
}

}  // namespace structreg
