#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "structreg/data.hpp"
#include "structreg/regularize.hpp"
#include "structreg/tuning.hpp"

namespace structreg {

struct ValueDistribution {
    enum class Kind { Uniform, Beta } kind = Kind::Uniform;
    double a = 1.0;  ///< Beta shape parameters; ignored for Uniform(0,1)
    double b = 1.0;

    static ValueDistribution uniform() { return {}; }
    static ValueDistribution beta(double a, double b) { return {Kind::Beta, a, b}; }

    double cdf(double v) const;
    double pdf(double v) const;
    double mean() const;
    double sample(SeededRng& rng) const;
    std::string describe() const;
};

/// Bids multiplied by eta ~ N(0, sigma^2) left-truncated at 0.
struct Overbid {
    double sigma = 0.5;
};

struct AuctionScenario {
    int id = 1;
    ValueDistribution values;
    std::optional<Overbid> overbid;
    int auctions = 100;
    int n_train_lower = 5;
    int n_train_upper = 30;
    int n_test_lower = 31;
    int n_test_upper = 50;

    /// 1: uniform values; 2: Beta(2,5) values; 3: uniform values with overbidding (sigma 0.5).
    static AuctionScenario preset(int id);
    void validate() const;
};

struct Auction {
    int bidders = 0;
    std::vector<double> bids;
    double winning_bid = 0.0;
};

struct AuctionData {
    std::vector<Auction> auctions;

    /// One row per auction: input n_m, outcome b*_m.
    Dataset as_dataset() const;
};

/// Bayesian-Nash bid v - F(v)^-(n-1) int_0^v F^(n-1); (n-1)/n v for uniform values.
double equilibrium_bid(double v, int n, const ValueDistribution& f);

/// Expected payoff (v - b) F(b^-1(b))^(n-1) of bidding b against n-1 rivals on the equilibrium strategy.
double expected_payoff(double v, double bid, int n, const ValueDistribution& f);

AuctionData simulate_auctions(const AuctionScenario& scenario, SeededRng& rng);

/// E[b* | n] under the scenario's true data-generating process, by closed form or quadrature.
double true_expected_winning_bid(const AuctionScenario& scenario, int n);

/// Monte Carlo estimate of E[b* | n] and its standard error.
std::pair<double, double> simulated_expected_winning_bid(const AuctionScenario& scenario, int n, std::size_t draws,
                                                         SeededRng& rng);

/// Rational bidders with U(0,1) values: E[b* | n] = (n-1)/(n+1), nothing to estimate.
StructuralBenchmark uniform_benchmark();
double uniform_benchmark_mean(double n);

struct AuctionSettings {
    int max_aic_degree = 5;
    int sre_degree = 5;
    int forward_k = 5;
    double forward_fraction = 0.0;
    std::vector<double> lambda_grid;  ///< empty: default grid scaled by the second-stage sample size
    /// w_j = j on the j-th power when true, w_j = 1 otherwise.
    bool degree_weights = true;
};

/// Evaluation grids (integers in the train and test ranges) with E[b* | n] on each.
struct AuctionTruth {
    std::vector<double> n_in;
    std::vector<double> n_out;
    std::vector<double> truth_in;
    std::vector<double> truth_out;
};

AuctionTruth auction_truth(const AuctionScenario& scenario);

struct AuctionTrial {
    std::vector<std::string> estimators;
    std::vector<std::vector<double>> pred_in;
    std::vector<std::vector<double>> pred_out;
    int aic_degree = 0;
    double lambda_star = 0.0;
};

/// One Monte Carlo replication: simulate, fit statistical / structural / SRE, predict on both domains.
AuctionTrial auction_trial(const AuctionScenario& scenario, const AuctionSettings& settings, const AuctionTruth& truth,
                           SeededRng& rng);

}  // namespace structreg
