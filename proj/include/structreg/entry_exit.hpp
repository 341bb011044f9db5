#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "structreg/data.hpp"
#include "structreg/regularize.hpp"
#include "structreg/stat.hpp"

namespace structreg {

/// Flow payoff of moving from state j to k: (mu + alpha R_t - entry_cost [j = 0]) [k = 1].
struct DdcParams {
    double mu = -3.0724;
    double alpha = 1.0042;
    double entry_cost = 0.6537;
    double beta = 0.95;
    long firms = 10000;
    int t_total = 500;
    int t_train = 250;

    void validate() const;
};

/// R_t = r0 + slope t + u_t with u_t = ar u_{t-1} + e_t, e_t ~ N(0, sd^2), t = 1..T.
struct ProfitLaw {
    double r0 = 0.0;
    double slope = 0.0092;
    double ar = 0.9;
    double sd = 0.2113;
};

Vector draw_profit_path(const ProfitLaw& law, int t_total, SeededRng& rng);

enum class Regime { PerfectForesight, Adaptive, Myopic };
const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// p(1|0) (entry) and p(1|1) (stay) for one period.
struct CcpPair {
    double enter = 0.5;
    double stay = 0.5;
};

/// Per-period CCPs, index t-1 for period t.
struct Ccps {
    Vector enter;
    Vector stay;

    Eigen::Index periods() const { return enter.size(); }
};

struct StationarySolution {
    double v0 = 0.0;  ///< ex-ante value as an outsider
    double v1 = 0.0;  ///< ex-ante value as an incumbent
    CcpPair ccp;
    int iterations = 0;
};

struct ForesightSolution {
    /// Choice-specific values, columns j0 = (0,0), (0,1), (1,0), (1,1).
    Matrix choice_values;
    /// Ex-ante values at the start of period t for each state.
    Vector v0;
    Vector v1;
    Ccps ccp;
};

/// Value iteration on the stationary environment R to sup-norm 1e-12.
StationarySolution solve_stationary(const DdcParams& params, double r);

/// Backward induction given the full path; the period after the last continues with the stationary solution at R_T.
ForesightSolution solve_perfect_foresight(const DdcParams& params, const Vector& r);

CcpPair myopic_ccp(const DdcParams& params, double r);

/// CCPs for the regime. Adaptive solves the stationary model at each R_t, cached on a grid of step
/// `cache_step` (0 disables the grid and solves at R_t exactly).
Ccps regime_ccps(Regime regime, const DdcParams& params, const Vector& r, double cache_step = 1e-3);

/// Transition counts per period; state at period t is the action taken in t.
struct MarketPanel {
    long firms = 0;
    long initial_incumbents = 0;
    /// counts[t-1] = {0->0, 0->1, 1->0, 1->1} during period t.
    std::vector<std::array<long, 4>> counts;

    int periods() const { return static_cast<int>(counts.size()); }
    long incumbents(int t) const;  ///< after period t; t = 0 gives the initial state
    /// Share of incumbents after each period; element 0 is the initial share.
    Vector occupancy() const;
    /// Observed CCPs, NaN where the origin state is empty.
    Ccps observed_ccps() const;
    MarketPanel combined(const MarketPanel& other) const;
};

MarketPanel simulate_market(const Ccps& ccp, long firms, long initial_incumbents, SeededRng& rng);
/// Half the firms start as incumbents.
MarketPanel simulate_market(Regime regime, const DdcParams& params, const Vector& r, SeededRng& rng);

/// E[n_t / N] propagated from the initial share; element 0 is the initial share.
Vector expected_path(const Ccps& ccp, double initial_share);

/// Residuals of the two Euler equations for t = 1..T-1, columns (0->1, 1->0).
Matrix euler_residuals(const Ccps& ccp, const DdcParams& params, const Vector& r);

struct DdcEstimate {
    double mu = 0.0;
    double alpha = 0.0;
    double entry_cost = 0.0;
    std::size_t equations = 0;
};

/// Stacked Euler-equation least squares on the first `periods` periods (0 uses all).
/// CCPs are clamped to [1/(2N), 1 - 1/(2N)] before taking logs.
DdcEstimate estimate_ccp_euler(const MarketPanel& panel, const Vector& r, double beta, int periods = 0);
/// Same estimator on given CCPs, without clamping.
DdcEstimate estimate_ccp_euler(const Ccps& ccp, const Vector& r, double beta, int periods = 0);

/// Inputs for period t: [R_t, x_{t-1}, ..., x_{t-lags}, t] from an occupancy series x (x_0 initial).
Matrix lagged_inputs(const Vector& occupancy, const Vector& r, int lags, int first, int last);

/// One-step-ahead model under perfect foresight with the fitted parameters. Its design is a synthetic
/// panel of `synthetic_firms` firms over periods [first, T].
StructuralBenchmark ddc_benchmark(const DdcEstimate& fit, double beta, const Vector& r, long synthetic_firms, int lags,
                                  int first);

struct EntryExitSettings {
    int max_p = 3;
    int max_q = 4;
    int sre_p = 2;
    int sre_q = 4;
    int first_period = 5;   ///< first period with a full set of lags
    int eval_start = 11;
    long synthetic_firms = 10000;
    std::size_t window_length = 0;  ///< 0: a fifth of the training rows
    std::size_t horizon = 1;
    std::vector<double> lambda_grid;
    double cache_step = 1e-3;
};

/// One profit path with the regime's CCPs and the true expected occupancy path it implies.
struct EntryExitSetup {
    Regime regime = Regime::PerfectForesight;
    DdcParams params;
    Vector r;
    Ccps ccp;
    Vector truth;  ///< element t is E[n_t / N]
};

EntryExitSetup entry_exit_setup(Regime regime, const DdcParams& params, const ProfitLaw& law,
                                const EntryExitSettings& settings, SeededRng& rng);

struct ArxSelection {
    int p = 1;
    int q = 1;
    LinearFit fit;
    double aic = 0.0;
};

/// AIC over p in 1..max_p, q in 1..max_q on common rows [R_t, lags...].
ArxSelection select_arx_aic(const Matrix& inputs, const Vector& outcome, int max_p, int max_q);

struct EntryExitTrial {
    std::vector<double> t_in;
    std::vector<double> t_out;
    std::vector<std::string> estimators;
    std::vector<std::vector<double>> pred_in;
    std::vector<std::vector<double>> pred_out;
    DdcEstimate structural;
    int arx_p = 0;
    int arx_q = 0;
    double lambda_star = 0.0;
};

EntryExitTrial entry_exit_trial(const EntryExitSetup& setup, const EntryExitSettings& settings, SeededRng& rng);

}  // namespace structreg
