#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "structreg/data.hpp"
#include "structreg/regularize.hpp"

namespace structreg {

struct CvPlan {
    CvKind kind = CvKind::KFold;
    int K = 5;
    std::optional<DomainSpec> target;  ///< forward
    double fraction = 0.0;             ///< forward; 0 means 1/(K+1)
    std::size_t window_length = 0;     ///< rolling; 0 means T/5
    std::size_t horizon = 1;           ///< rolling

    void validate() const;
};

struct CvTrace {
    CvKind kind = CvKind::KFold;
    std::vector<double> lambdas;
    std::vector<double> mean_error;
    double lambda_star = 0.0;
    std::size_t best_index = 0;
    /// Validation row sets, one per fold or window.
    std::vector<std::vector<std::size_t>> validation_rows;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

using Predictor = std::function<Vector(const Matrix& inputs)>;
using Fitter = std::function<Predictor(const Dataset& train, double lambda)>;
/// Validation loss of a predictor trained on `train`.
using Scorer = std::function<double(const Dataset& train, const Predictor& model, const Dataset& validation)>;

/// Mean squared prediction error.
Scorer squared_error_scorer();

/// Held-out GMM criterion: moments averaged on the validation fold with W = (Z'Z / n)^-1 from the training fold,
/// instruments taken with a constant added.
Scorer gmm_scorer();

CvTrace kfold_cv(const Fitter& fitter, const Scorer& scorer, const Dataset& data, const std::vector<double>& grid,
                 int k, SeededRng& rng);

/// S2 = the fraction of rows nearest the target; S1 split into K folds; validation = fold ∪ S2.
CvTrace forward_cv(const Fitter& fitter, const Scorer& scorer, const Dataset& data, const std::vector<double>& grid,
                   int k, const DomainSpec& target, double fraction, SeededRng& rng);

/// Rows are taken in time_index order. Train on [t0, t0 + window), score the next `horizon` rows.
CvTrace rolling_cv(const Fitter& fitter, const Scorer& scorer, const Dataset& data, const std::vector<double>& grid,
                   std::size_t window_length, std::size_t horizon);

CvTrace run_cv(const CvPlan& plan, const Fitter& fitter, const Scorer& scorer, const Dataset& data,
               const std::vector<double>& grid, SeededRng& rng);

/// Everything the second stage needs besides the benchmark and the data.
struct SreProblem {
    FeatureSpec features;
    SecondStage stage = SecondStage::Ridge;
    /// Domain over which the benchmark's implied mean is projected onto g; defaults to the data's bounding box.
    std::optional<DomainSpec> theta_m_domain;
    std::size_t synthetic_size = 0;
    ThetaMSource theta_m_source = ThetaMSource::ImpliedMean;
    /// Defaults to squared error (ridge) or the held-out GMM criterion (gmm).
    Scorer scorer;
};

/// Steps after the structural estimate: theta^M, CV on the second sample, refit at lambda*.
/// `fixed_features` overrides problem.features (used to share one basis across cross-fit halves).
SREFit structural_regularization(const StructuralBenchmark& benchmark, const Dataset& second, const SreProblem& problem,
                                 const PenaltySpec& penalty, const CvPlan& plan, SeededRng& rng,
                                 const std::optional<FeatureMap>& fixed_features = std::nullopt);

SREFit sre_sample_split(const Dataset& data, const BenchmarkFamily& family, const SreProblem& problem,
                        const PenaltySpec& penalty, const CvPlan& plan, SeededRng& rng);

/// Both directions, coefficient vectors averaged in the shared raw feature basis and re-expressed on the
/// full-sample transform. lambda_star reports the first direction's choice.
SREFit sre_cross_fit(const Dataset& data, const BenchmarkFamily& family, const SreProblem& problem,
                     const PenaltySpec& penalty, const CvPlan& plan, SeededRng& rng);

}  // namespace structreg
