#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "structreg/auction.hpp"
#include "structreg/demand.hpp"
#include "structreg/entry_exit.hpp"

namespace structreg {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CvConfig {
    int folds = 5;                   ///< forward (auction) and k-fold (demand)
    double forward_fraction = 0.0;   ///< 0: 1 / (folds + 1)
    std::size_t window_length = 0;   ///< rolling (entry-exit); 0: a fifth of the rows
    std::size_t horizon = 1;
};

struct AuctionConfig {
    int auctions = 100;
    double overbid_sigma = 0.5;
    int max_aic_degree = 5;
    int sre_degree = 5;
    bool degree_weights = true;
};

struct RunConfig {
    std::string experiment = "auction";
    int scenario = 1;
    int trials = 100;
    std::uint64_t base_seed = 20240601;
    /// Empty: every estimator of the experiment.
    std::vector<std::string> estimators;
    /// Empty: log-spaced default scaled by the second-stage sample size.
    std::vector<double> lambda_grid;
    CvConfig cv;
    AuctionConfig auction;
    DdcParams ddc;
    ProfitLaw profit;
    EntryExitSettings entry_exit;
    DemandParams demand;
    DemandSettings demand_settings;
    std::string output_dir = "results";

    /// Throws ConfigError.
    void validate() const;
};

/// Known experiments in CLI order.
const std::vector<std::string>& experiment_names();
const std::vector<std::string>& estimator_names(const std::string& experiment);
int scenario_count(const std::string& experiment);
std::string scenario_label(const std::string& experiment, int scenario);

/// Strict JSON parse: unknown keys and wrongly typed values raise ConfigError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Every key, sorted, compact; parse_config(canonical_json(c)) reproduces c.
std::string canonical_json(const RunConfig& config);

}  // namespace structreg
