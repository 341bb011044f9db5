#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace structreg {

struct Metrics {
    double bias = 0.0;
    double variance = 0.0;
    double mse = 0.0;

    bool operator==(const Metrics&) const = default;
};

/// predictions[r][i] is trial r at evaluation point i. Pointwise bias is the trial mean of |f - truth|;
/// variance is about the trial mean; all three are averaged over points.
Metrics pointwise_metrics(const std::vector<std::vector<double>>& predictions, const std::vector<double>& truth);
/// Trial-specific truth (e.g. a fresh profit path per trial); variance is then that of the error f - truth,
/// which reduces to the prediction variance when the truth is shared.
Metrics pointwise_metrics(const std::vector<std::vector<double>>& predictions,
                          const std::vector<std::vector<double>>& truths);

struct CurveRecord {
    int trial = 0;
    std::string estimator;
    std::string domain;  ///< "in" or "out"
    double x = 0.0;
    double truth = 0.0;
    double prediction = 0.0;

    bool operator==(const CurveRecord&) const = default;
};

struct SummaryRow {
    std::string estimator;
    std::string domain;
    Metrics metrics;

    bool operator==(const SummaryRow&) const = default;
};

/// Aggregates per (estimator, domain), in order of first appearance. Throws if the cells of a group
/// do not all carry the same set of trials.
std::vector<SummaryRow> summarize(const std::vector<CurveRecord>& curves);

struct MonteCarloReport {
    std::string experiment;
    int scenario = 0;
    int trials = 0;
    std::uint64_t seed = 0;
    std::string version;
    double wall_seconds = 0.0;
    /// Canonical JSON of the run configuration.
    std::string config_snapshot;
    std::vector<SummaryRow> summary;
    std::vector<CurveRecord> curves;
    /// Per-trial scalars such as lambda* or selected orders, keyed by name.
    std::map<std::string, std::vector<double>> diagnostics;
    /// Defaults that are implementation choices rather than given values.
    std::vector<std::string> notes;

    const SummaryRow* find(const std::string& estimator, const std::string& domain) const;
    bool operator==(const MonteCarloReport&) const = default;
};

std::string summary_csv(const MonteCarloReport& report);
std::string curves_csv(const MonteCarloReport& report);
std::string report_json(const MonteCarloReport& report);
MonteCarloReport parse_report_json(const std::string& text);

/// summary.csv, curves.csv, config.snapshot, report.json. Files already written are removed on failure.
void emit_outputs(const MonteCarloReport& report, const std::filesystem::path& out_dir);

/// "%.17g".
std::string format_number(double x);

}  // namespace structreg
