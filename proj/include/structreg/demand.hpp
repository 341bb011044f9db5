#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "structreg/data.hpp"
#include "structreg/regularize.hpp"
#include "structreg/stat.hpp"
#include "structreg/tuning.hpp"

namespace structreg {

/// q = alpha - beta p + eps, c = a + b z, p = c + (lambda_markup / beta) q.
struct DemandParams {
    double alpha = 100.0;
    double beta = 2.0;
    double a = 10.0;
    double b = 1.0;
    double lambda_markup = 1.0;  ///< 1 is the profit-maximizing markup
    double z_lower = 0.0;        ///< z ~ U(z_lower, z_upper)
    double z_upper = 30.0;
    double epsilon_sd = 5.0;     ///< eps ~ N(0, epsilon_sd^2)
    long markets = 1000;

    void validate() const;
    double true_demand(double p) const { return alpha - beta * p; }
};

struct MarketData {
    Vector p;
    Vector q;
    Vector z;

    Eigen::Index size() const { return p.size(); }
    /// Input p, outcome q, instrument z.
    Dataset as_dataset() const;
    static MarketData from_dataset(const Dataset& d);
    void write_csv(const std::filesystem::path& path) const;
};

/// Throws if more than 0.1% of prices or quantities are nonpositive.
MarketData simulate_markets(const DemandParams& params, SeededRng& rng);

struct DemandStructural {
    double alpha = 0.0;
    double beta = 0.0;
    double a = 0.0;
    double b = 0.0;
    double residual_sd = 0.0;  ///< SD of q - (alpha - beta p) on the estimation sample

    double demand(double p) const { return alpha - beta * p; }
};

/// Least squares of p on (1, z, q) gives (a, b, 1/beta); alpha = mean(q + beta p).
DemandStructural structural_estimate_demand(const MarketData& data);

enum class DemandForm { Linear, LogLog };
const char* to_string(DemandForm f);

/// 2SLS of q on p (or ln q on ln p) with instruments (1, z). Throws when the first-stage F of z
/// falls below min_first_stage_f (0 disables the check).
LinearFit rf_demand(const MarketData& data, DemandForm form, double min_first_stage_f = 10.0);
double rf_predict(const LinearFit& fit, DemandForm form, double p);

/// Q^M(p) = alpha - beta p; simulate draws p uniformly over the domain and adds N(0, residual_sd^2).
StructuralBenchmark demand_benchmark(const DemandStructural& fit);
/// Structural estimate on whatever sample it is handed (inputs p, outcome q, instruments z).
BenchmarkFamily demand_family();

struct DemandSreOptions {
    int g_degree = 2;
    int instrument_degree = 5;
    int folds = 5;
};

/// Instruments z, ..., z^degree of the standardized cost shifter (a constant is added by the GMM stage).
Matrix demand_instruments(const Vector& z, int degree);

/// Sample-split SRE with a GMM second stage on (q - g(p)) phi(z) and K-fold CV on the held-out GMM criterion.
SREFit sre_demand(const MarketData& data, const BenchmarkFamily& family, const PenaltySpec& penalty,
                  const CvPlan& plan, SeededRng& rng, const DemandSreOptions& options = {});

struct DemandScenario {
    int id = 1;
    bool optimal_pricing = true;
    DemandForm rf_form = DemandForm::Linear;

    /// 1: optimal, linear; 2: non-optimal, linear; 3: optimal, log-log; 4: non-optimal, log-log.
    static DemandScenario preset(int id);
};

struct DemandSettings {
    double nonoptimal_markup = 0.5;
    DemandSreOptions sre;
    std::vector<double> lambda_grid;  ///< empty: default grid scaled by the second-stage sample size
    double min_first_stage_f = 10.0;
    int grid_points = 100;
    long pilot_markets = 100000;
};

/// Market parameters for a scenario (markup set by the scenario).
DemandParams scenario_params(const DemandScenario& scenario, const DemandParams& base, const DemandSettings& settings);

/// Evaluation grid between the 1st and 99th percentiles of a pilot simulation, with the true demand on it.
struct DemandTruth {
    std::vector<double> p;
    std::vector<double> truth;
};

DemandTruth demand_truth(const DemandParams& params, const DemandSettings& settings, SeededRng& rng);

struct DemandTrial {
    std::vector<std::string> estimators;
    std::vector<std::vector<double>> predictions;
    DemandStructural structural;
    double first_stage_f = 0.0;
    double lambda_star = 0.0;
};

/// Simulate one market sample and fit the reduced-form, structural and SRE demand curves.
DemandTrial demand_trial(const DemandScenario& scenario, const DemandParams& params, const DemandSettings& settings,
                         const DemandTruth& truth, SeededRng& rng);

}  // namespace structreg
