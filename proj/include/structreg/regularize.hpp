#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "structreg/data.hpp"
#include "structreg/optimize.hpp"
#include "structreg/stat.hpp"

namespace structreg {

enum class PenaltyDistance { SquaredL2 };

struct PenaltySpec {
    std::vector<double> lambda_grid;
    /// Per slope coordinate; 0 leaves a coordinate unpenalized. The intercept is never penalized.
    Vector weights;
    PenaltyDistance distance = PenaltyDistance::SquaredL2;

    /// Grid nonempty, nonnegative, strictly increasing; weights finite and nonnegative.
    void validate() const;
    void validate(Eigen::Index coordinates) const;

    /// `points` values log-spaced over [lower, upper], multiplied by `n`.
    static std::vector<double> default_grid(std::size_t n, std::size_t points = 25, double lower = 1e-4,
                                            double upper = 1e4);
};

/// Feature expansion g(x) = intercept + features(x)' coefficients, fixed once built.
struct FeatureMap {
    std::string name;
    Eigen::Index input_dim = 1;
    Eigen::Index dim = 1;
    std::function<Matrix(const Matrix&)> expand;
    /// d feature_j / d x_coord for every row; N x dim.
    std::function<Matrix(const Matrix&, Eigen::Index)> jacobian;
    std::vector<std::string> labels;
    /// false: second-stage columns are centered but not rescaled, so penalty weights act on the
    /// coefficients of the features as defined here.
    bool scale_columns = true;
};

/// Builds a FeatureMap from the sample it will be fitted on (e.g. to fix a polynomial's centering).
using FeatureSpec = std::function<FeatureMap(const Matrix& stage_inputs)>;

/// Powers z, ..., z^degree of z = (x - center) / scale for a scalar input.
FeatureMap polynomial_map(int degree, double center, double scale, bool scale_columns = false);
/// center and scale are the mean and population SD of the stage sample.
FeatureSpec polynomial_features(int degree, bool scale_columns = false);
/// Inputs [R_t, n_{t-1}, ..., n_{t-L}] with L >= q; features [R_t, ..., R_t^p, n_{t-1}, ..., n_{t-q}].
FeatureMap arx_map(int p, int q, Eigen::Index input_dim);
FeatureSpec arx_features(int p, int q);
FeatureSpec linear_features();

/// Estimated structural model seen through the data it implies.
struct StructuralBenchmark {
    std::string id;
    std::vector<std::pair<std::string, double>> parameters;
    /// Synthetic (x, y) draws with x inside the domain.
    std::function<Dataset(const DomainSpec&, std::size_t, SeededRng&)> simulate;
    /// E^M[y | x] for each input row.
    std::function<Vector(const Matrix&)> implied_mean;
    /// Optional input design for projecting the implied mean; a grid / uniform design over the domain otherwise.
    std::function<Matrix(const DomainSpec&, std::size_t, SeededRng&)> design;
};

/// Estimates a structural model on the first-stage sample.
using BenchmarkFamily = std::function<StructuralBenchmark(const Dataset&)>;

enum class ThetaMSource {
    ImpliedMean,  ///< fit g to (x, f^M(x)) on a design; no simulation noise
    Draws,        ///< fit g to synthetic draws from simulate
};

/// M = 0 picks max(1000, 50 * dim). Returns the projection in the feature map's own (raw) basis.
LinearFit fit_theta_m(const FeatureMap& features, const StructuralBenchmark& benchmark, const DomainSpec& domain,
                      std::size_t m, SeededRng& rng, ThetaMSource source = ThetaMSource::ImpliedMean);

/// Evenly spaced points for a 1-D domain, uniform draws otherwise.
Matrix default_design(const DomainSpec& domain, std::size_t m, SeededRng& rng);

/// argmin ||y - a - X b||^2 + lambda sum_j w_j (b_j - b^M_j)^2 with a unpenalized.
/// Returns [a, b]; a equals mean(y) when X is centered.
Vector sre_ridge(const Matrix& x, const Vector& y, const Vector& theta_m, const Vector& weights, double lambda);
double ridge_objective(const Matrix& x, const Vector& y, const Vector& theta, const Vector& theta_m,
                       const Vector& weights, double lambda);

/// argmin (Z'(y - X t))' W (Z'(y - X t)) + lambda sum_j w_j (t_j - t^M_j)^2.
/// X carries any intercept column explicitly; constant columns must have weight 0.
Vector sre_gmm(const Matrix& x, const Matrix& z, const Vector& y, const Matrix& w, const Vector& theta_m,
               const Vector& weights, double lambda);
double gmm_objective(const Matrix& x, const Matrix& z, const Vector& y, const Matrix& w, const Vector& theta,
                     const Vector& theta_m, const Vector& weights, double lambda);

/// Local minimizer of objective(t) + lambda sum_j w_j (t_j - t^M_j)^2, searched from theta_init and from theta_m.
OptimizeResult sre_extremum(const Objective& objective, const Vector& theta_m, const Vector& weights, double lambda,
                            const Vector& theta_init, const NelderMeadOptions& options = {});

enum class SecondStage { Ridge, Gmm };
enum class SreMethod { SampleSplit, CrossFit, Direct };
enum class CvKind { KFold, Forward, Rolling };

const char* to_string(SreMethod m);
const char* to_string(CvKind k);
const char* to_string(SecondStage s);

struct SREFit {
    /// [intercept in the centered basis, slopes on the standardized features]
    Vector theta;
    /// Feature-column transform of the stage sample.
    StandardizeTransform transform;
    Vector theta_m;
    double lambda_star = 0.0;
    SreMethod method = SreMethod::Direct;
    CvKind cv = CvKind::KFold;
    SecondStage stage = SecondStage::Ridge;
    FeatureMap features;
    std::vector<double> cv_lambdas;
    std::vector<double> cv_errors;

    Vector predict(const Matrix& inputs) const;
    /// Same model as intercept + features(x)' coefficients.
    LinearFit raw() const;
    LinearFit raw_theta_m() const;
};

/// [intercept in the centered basis, standardized slopes] of a raw-basis fit.
Vector to_standardized(const LinearFit& raw, const StandardizeTransform& t);
LinearFit from_standardized(const Vector& theta, const StandardizeTransform& t);

/// Feature transform used by the second stage on this sample.
StandardizeTransform feature_transform(const FeatureMap& features, const Matrix& inputs);

/// Second stage at a fixed lambda. GMM uses the dataset's instruments with a constant added and W = (Z'Z)^-1.
SREFit fit_second_stage(SecondStage stage, const FeatureMap& features, const Dataset& data,
                        const LinearFit& theta_m_raw, const Vector& weights, double lambda);

/// Analytic d E[y | x] / d x_index of the fitted model, in raw units.
std::function<double(const Vector&)> ate_from_fit(const SREFit& fit, Eigen::Index treatment_index);
std::function<double(const Vector&)> ate_from_fit(const PolyFit& fit, Eigen::Index treatment_index);

}  // namespace structreg
