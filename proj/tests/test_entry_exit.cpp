#include <cmath>
#include <numbers>

#include "doctest.h"
#include "structreg/entry_exit.hpp"

using namespace structreg;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

DdcParams random_params(SeededRng& rng) {
    DdcParams p;
    p.mu = rng.uniform(-3.0, 1.0);
    p.alpha = rng.uniform(0.1, 2.0);
    p.entry_cost = rng.uniform(0.0, 3.0);
    p.beta = rng.uniform(0.0, 0.97);
    p.t_total = 60;
    p.t_train = 30;
    return p;
}

Vector random_path(int t_total, SeededRng& rng) {
    ProfitLaw law;
    law.slope = 0.02;
    law.sd = 0.5;
    return draw_profit_path(law, t_total, rng);
}

// Finite-horizon backward induction from zero continuation, written independently of the library.
CcpPair brute_force(const DdcParams& p, double r, int horizon) {
    double v0 = 0.0, v1 = 0.0;
    CcpPair c;
    for (int s = 0; s < horizon; ++s) {
        const double f = p.mu + p.alpha * r;
        const double w00 = p.beta * v0, w01 = f - p.entry_cost + p.beta * v1;
        const double w10 = p.beta * v0, w11 = f + p.beta * v1;
        const double m0 = std::max(w00, w01), m1 = std::max(w10, w11);
        const double n0 = std::numbers::egamma + m0 + std::log(std::exp(w00 - m0) + std::exp(w01 - m0));
        const double n1 = std::numbers::egamma + m1 + std::log(std::exp(w10 - m1) + std::exp(w11 - m1));
        c.enter = logistic(w01 - w00);
        c.stay = logistic(w11 - w10);
        v0 = n0;
        v1 = n1;
    }
    return c;
}

}  // namespace

TEST_CASE("zero payoffs give even odds") {
    DdcParams p;
    p.mu = p.alpha = p.entry_cost = 0.0;
    SeededRng rng(1, 0);
    const Vector r = random_path(50, rng);
    const ForesightSolution s = solve_perfect_foresight(p, r);
    CHECK((s.ccp.enter.array() - 0.5).abs().maxCoeff() <= 1e-15);
    CHECK((s.ccp.stay.array() - 0.5).abs().maxCoeff() <= 1e-15);
    const StationarySolution st = solve_stationary(p, 1.0);
    const double v = (std::numbers::egamma + std::log(2.0)) / (1.0 - p.beta);
    CHECK(st.v0 == doctest::Approx(v).epsilon(1e-10));
    CHECK(st.v1 == doctest::Approx(v).epsilon(1e-10));
    CHECK(st.ccp.enter == doctest::Approx(0.5));
}

TEST_CASE("no discounting reduces to myopic choice") {
    SeededRng rng(2, 0);
    DdcParams p = random_params(rng);
    p.beta = 0.0;
    const Vector r = random_path(p.t_total, rng);
    const ForesightSolution s = solve_perfect_foresight(p, r);
    for (Eigen::Index t = 0; t < r.size(); ++t) {
        const CcpPair m = myopic_ccp(p, r(t));
        CHECK(s.ccp.enter(t) == m.enter);
        CHECK(s.ccp.stay(t) == m.stay);
        const StationarySolution st = solve_stationary(p, r(t));
        CHECK(st.ccp.enter == doctest::Approx(m.enter).epsilon(1e-14));
        CHECK(st.iterations <= 2);
    }
}

TEST_CASE("myopic ccp examples") {
    DdcParams p;
    p.mu = -1.0;
    p.alpha = 0.5;
    p.entry_cost = 0.0;
    CHECK(myopic_ccp(p, 2.0).stay == doctest::Approx(0.5));
    CHECK(myopic_ccp(p, 2.0).enter == doctest::Approx(0.5));
    p.entry_cost = 1.5;
    CHECK(myopic_ccp(p, 5.0).enter == doctest::Approx(0.5));
    CHECK(myopic_ccp(p, 200.0).stay == doctest::Approx(1.0));
}

TEST_CASE("stationary solution matches brute-force finite horizon") {
    SeededRng rng(3, 0);
    for (int rep = 0; rep < 5; ++rep) {
        DdcParams p = random_params(rng);
        if (rep == 0) p.entry_cost = 40.0;
        const double r = rng.uniform(-1, 3);
        const StationarySolution st = solve_stationary(p, r);
        const CcpPair bf = brute_force(p, r, 1000);
        CHECK(st.ccp.enter == doctest::Approx(bf.enter).epsilon(1e-10));
        CHECK(st.ccp.stay == doctest::Approx(bf.stay).epsilon(1e-10));
        if (rep == 0) CHECK(st.ccp.enter < 1e-12);
    }
}

TEST_CASE("Euler residuals vanish on exact perfect-foresight CCPs") {
    SeededRng rng(4, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const DdcParams p = random_params(rng);
        const Vector r = random_path(p.t_total, rng);
        const ForesightSolution s = solve_perfect_foresight(p, r);
        CHECK(euler_residuals(s.ccp, p, r).cwiseAbs().maxCoeff() <= 1e-10);
        const DdcEstimate e = estimate_ccp_euler(s.ccp, r, p.beta);
        CHECK(e.mu == doctest::Approx(p.mu).epsilon(1e-8));
        CHECK(e.alpha == doctest::Approx(p.alpha).epsilon(1e-8));
        CHECK(std::abs(e.entry_cost - p.entry_cost) <= 1e-8 * std::max(1.0, p.entry_cost));
    }
}

TEST_CASE("choice values and CCPs agree and stay finite under large payoffs") {
    SeededRng rng(5, 0);
    DdcParams p = random_params(rng);
    p.mu = 400.0;
    const Vector r = random_path(40, rng);
    const ForesightSolution s = solve_perfect_foresight(p, r);
    CHECK(s.choice_values.allFinite());
    CHECK(s.ccp.enter.allFinite());
    for (Eigen::Index t = 0; t < r.size(); ++t) {
        CHECK(s.ccp.enter(t) == doctest::Approx(logistic(s.choice_values(t, 1) - s.choice_values(t, 0))));
        CHECK(s.ccp.stay(t) == doctest::Approx(logistic(s.choice_values(t, 3) - s.choice_values(t, 2))));
        // Shift both values of a state by a constant: the CCP is unchanged.
        const double shift = 1e3;
        CHECK(logistic((s.choice_values(t, 1) + shift) - (s.choice_values(t, 0) + shift)) ==
              doctest::Approx(s.ccp.enter(t)).epsilon(1e-12));
    }
}

TEST_CASE("absorbing CCPs freeze the market") {
    Ccps c{Vector::Zero(30), Vector::Ones(30)};
    SeededRng rng(6, 0);
    const MarketPanel panel = simulate_market(c, 1000, 400, rng);
    for (int t = 0; t <= panel.periods(); ++t) CHECK(panel.incumbents(t) == 400);
}

TEST_CASE("transition counts are conserved") {
    SeededRng rng(7, 0);
    const DdcParams p = random_params(rng);
    const Vector r = random_path(p.t_total, rng);
    for (Regime regime : {Regime::PerfectForesight, Regime::Adaptive, Regime::Myopic}) {
        const MarketPanel panel = simulate_market(regime, p, r, rng);
        CHECK(panel.periods() == p.t_total);
        for (int t = 1; t <= panel.periods(); ++t) {
            const auto& c = panel.counts[static_cast<std::size_t>(t - 1)];
            CHECK(c[0] + c[1] + c[2] + c[3] == p.firms);
            CHECK(c[2] + c[3] == panel.incumbents(t - 1));
            CHECK(c[1] + c[3] == panel.incumbents(t));
        }
    }
}

TEST_CASE("symmetric payoffs give half occupancy") {
    DdcParams p;
    p.mu = p.alpha = p.entry_cost = 0.0;
    p.firms = 20000;
    SeededRng rng(8, 0);
    const Vector r = random_path(100, rng);
    const MarketPanel panel = simulate_market(Regime::PerfectForesight, p, r, rng);
    const double share = panel.occupancy()(100);
    CHECK(std::abs(share - 0.5) <= 4.0 * std::sqrt(0.25 / 20000.0));
}

TEST_CASE("observed CCPs converge to solver CCPs") {
    SeededRng rng(9, 0);
    DdcParams p = random_params(rng);
    p.t_total = 20;
    p.t_train = 10;
    const Vector r = random_path(20, rng);
    const Ccps exact = solve_perfect_foresight(p, r).ccp;
    const long n = 1000000;
    const MarketPanel panel = simulate_market(exact, n, n / 2, rng);
    const Ccps obs = panel.observed_ccps();
    for (int t = 1; t <= 20; ++t) {
        const long out = panel.counts[static_cast<std::size_t>(t - 1)][0] + panel.counts[static_cast<std::size_t>(t - 1)][1];
        const long in = panel.incumbents(t - 1);
        const double pe = exact.enter(t - 1), ps = exact.stay(t - 1);
        CHECK(std::abs(obs.enter(t - 1) - pe) <= 4.0 * std::sqrt(pe * (1 - pe) / out) + 1e-12);
        CHECK(std::abs(obs.stay(t - 1) - ps) <= 4.0 * std::sqrt(ps * (1 - ps) / in) + 1e-12);
    }
}

TEST_CASE("euler estimator on simulated panels tightens with more firms") {
    SeededRng rng(10, 0);
    // Moderate CCPs; with entry or exit odds near 1e-4 the log-odds need far larger panels to settle.
    DdcParams p;
    p.mu = -1.0;
    p.alpha = 0.5;
    p.entry_cost = 1.0;
    p.t_total = 250;
    p.t_train = 125;
    ProfitLaw law;
    law.slope = 0.01;
    law.sd = 0.3;
    const Vector r = draw_profit_path(law, p.t_total, rng);
    const Ccps exact = solve_perfect_foresight(p, r).ccp;
    double err_small = 0.0, err_large = 0.0;
    for (int s = 0; s < 20; ++s) {
        SeededRng a(11, static_cast<std::uint64_t>(s)), b(12, static_cast<std::uint64_t>(s));
        const DdcEstimate small = estimate_ccp_euler(simulate_market(exact, 2500, 1250, a), r, p.beta);
        const DdcEstimate large = estimate_ccp_euler(simulate_market(exact, 40000, 20000, b), r, p.beta);
        err_small += std::abs(small.alpha - p.alpha) + std::abs(small.mu - p.mu) + std::abs(small.entry_cost - p.entry_cost);
        err_large += std::abs(large.alpha - p.alpha) + std::abs(large.mu - p.mu) + std::abs(large.entry_cost - p.entry_cost);
    }
    MESSAGE("mean |error| at N=2500: " << err_small / 20 << ", at N=40000: " << err_large / 20);
    // Four times the SD reduction is expected; ask for two.
    CHECK(err_large < 0.5 * err_small);
}

TEST_CASE("euler estimator needs enough periods") {
    SeededRng rng(13, 0);
    const DdcParams p = random_params(rng);
    const Vector r = random_path(p.t_total, rng);
    const Ccps c = solve_perfect_foresight(p, r).ccp;
    CHECK_THROWS_WITH(estimate_ccp_euler(c, r, p.beta, 3), doctest::Contains("insufficient transitions"));
}

TEST_CASE("ddc benchmark one-step predictions") {
    SeededRng rng(14, 0);
    DdcParams p;
    p.t_total = 120;
    p.t_train = 60;
    const Vector r = random_path(p.t_total, rng);
    const DdcEstimate truth{p.mu, p.alpha, p.entry_cost, 0};
    const StructuralBenchmark b = ddc_benchmark(truth, p.beta, r, 5000, 4, 5);
    const Ccps exact = solve_perfect_foresight(p, r).ccp;

    // Correct specification: realized minus predicted occupancy has mean zero.
    double s = 0.0, s2 = 0.0;
    int count = 0;
    for (int trial = 0; trial < 30; ++trial) {
        SeededRng sim(15, static_cast<std::uint64_t>(trial));
        const Vector occ = simulate_market(exact, 5000, 2500, sim).occupancy();
        const Matrix x = lagged_inputs(occ, r, 4, 5, p.t_total);
        const Vector err = occ.segment(5, p.t_total - 4) - b.implied_mean(x);
        s += err.sum();
        s2 += err.squaredNorm();
        count += static_cast<int>(err.size());
    }
    const double mean = s / count;
    CHECK(std::abs(mean) <= 4.0 * std::sqrt((s2 / count - mean * mean) / count));

    const StructuralBenchmark half = ddc_benchmark(DdcEstimate{0.0, 0.0, 0.0, 0}, 0.9, r, 1000, 1, 1);
    const Matrix x = lagged_inputs(Vector::Constant(p.t_total + 1, 0.3), r, 1, 1, p.t_total);
    CHECK((half.implied_mean(x).array() - 0.5).abs().maxCoeff() <= 1e-12);

    DdcParams myo = p;
    myo.beta = 0.0;
    const StructuralBenchmark m = ddc_benchmark(DdcEstimate{p.mu, p.alpha, p.entry_cost, 0}, 0.0, r, 1000, 1, 1);
    const Vector pred = m.implied_mean(x);
    for (int t = 1; t <= p.t_total; ++t) {
        const CcpPair c = myopic_ccp(myo, r(t - 1));
        CHECK(pred(t - 1) == doctest::Approx(0.3 * c.stay + 0.7 * c.enter));
    }
    CHECK_THROWS(ddc_benchmark(DdcEstimate{std::nan(""), 0.0, 0.0, 0}, 0.9, r, 1000, 1, 1));
}

TEST_CASE("adaptive cache solves at the grid point") {
    DdcParams p;
    Vector r(2);
    r << 1.00001, 0.99999;
    const Ccps c = regime_ccps(Regime::Adaptive, p, r, 1e-3);
    CHECK(c.enter(0) == c.enter(1));
    CHECK(c.enter(0) == solve_stationary(p, 1.0).ccp.enter);
    const Ccps exact = regime_ccps(Regime::Adaptive, p, r, 0.0);
    CHECK(exact.enter(0) == solve_stationary(p, 1.00001).ccp.enter);
}

TEST_CASE("entry-exit trial on a small market") {
    DdcParams p;
    p.firms = 400;
    p.t_total = 120;
    p.t_train = 60;
    EntryExitSettings settings;
    settings.synthetic_firms = 400;
    ProfitLaw law;
    law.slope = 0.06;
    SeededRng setup_rng(16, 0);
    const EntryExitSetup setup = entry_exit_setup(Regime::Myopic, p, law, settings, setup_rng);
    CHECK(setup.truth.size() == p.t_total + 1);
    SeededRng rng(16, 1), again(16, 1);
    const EntryExitTrial t = entry_exit_trial(setup, settings, rng);
    REQUIRE(t.estimators == std::vector<std::string>{"statistical", "structural", "sre"});
    CHECK(t.t_in.front() == settings.eval_start);
    CHECK(t.t_in.back() == p.t_train);
    CHECK(t.t_out.front() == p.t_train + 1);
    CHECK(t.t_out.back() == p.t_total);
    for (const auto& pr : t.pred_out) CHECK(pr.size() == t.t_out.size());
    const EntryExitTrial t2 = entry_exit_trial(setup, settings, again);
    CHECK(t2.pred_in == t.pred_in);
    CHECK(t2.pred_out == t.pred_out);
}

TEST_CASE("parameter validation") {
    DdcParams p;
    p.beta = 1.0;
    CHECK_THROWS(p.validate());
    p = DdcParams{};
    p.t_train = p.t_total;
    CHECK_THROWS(p.validate());
    CHECK(regime_from_string("adaptive") == Regime::Adaptive);
    CHECK_THROWS(regime_from_string("oracle"));
}
