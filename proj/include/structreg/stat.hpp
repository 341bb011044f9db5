#pragma once

#include <span>
#include <string>
#include <vector>

#include "structreg/data.hpp"

namespace structreg {

/// Affine model intercept + x'coefficients in raw units.
struct LinearFit {
    double intercept = 0.0;
    Vector coefficients;
    std::vector<std::string> labels;

    double predict(const Eigen::Ref<const Vector>& x) const { return intercept + x.dot(coefficients); }
    Vector predict(const Matrix& x) const;
};

/// Polynomial of the given degree in z = (x - center) / scale.
struct PolyFit {
    int degree = 1;
    LinearFit fit;  ///< coefficients on z, z^2, ..., z^degree
    double center = 0.0;
    double scale = 1.0;

    double predict(double x) const;
    Vector predict(const Vector& x) const;
    double derivative(double x) const;
    /// Coefficients c_0..c_degree of the same polynomial expanded in powers of raw x.
    Vector raw_coefficients() const;
};

/// n_t = intercept + sum_j exo_j R_t^j + sum_l ar_l n_{t-l}.
struct ARXFit {
    int p = 0;
    int q = 0;
    double intercept = 0.0;
    Vector exo;  ///< length p
    Vector ar;   ///< length q

    /// `lags` holds n_{t-1}, ..., n_{t-q}.
    double predict(double r_t, std::span<const double> lags) const;
};

/// Columns [z, z^2, ..., z^degree] with z = (x - center) / scale.
Matrix power_features(const Vector& x, int degree, double center, double scale);

/// ARX design rows for t = q..T-1 (0-based): [R_t, ..., R_t^p, n_{t-1}, ..., n_{t-q}], no constant column.
Matrix arx_design(std::span<const double> n, std::span<const double> r, int p, int q);

/// Least squares with an unpenalized intercept via a column-pivoted QR of the centered design.
/// Throws std::runtime_error("... singular design ...") if the design is rank deficient or
/// its condition estimate exceeds 1e12.
LinearFit fit_ols(const Matrix& x, const Vector& y, std::vector<std::string> labels = {});

PolyFit fit_polynomial(const Vector& x, const Vector& y, int degree);

/// Gaussian AIC, N ln(RSS/N) + 2 (degree + 1), minimized over 1..max_degree; ties go to the lower degree.
int select_degree_aic(const Vector& x, const Vector& y, int max_degree);
double polynomial_aic(const Vector& x, const Vector& y, int degree);

/// Zero-variance regressors (e.g. a constant series) are dropped and get coefficient 0.
ARXFit fit_arx(std::span<const double> n, std::span<const double> r, int p, int q);

/// Two-stage least squares with a constant added to both the regressors and the instruments.
LinearFit fit_2sls(const Vector& y, const Matrix& x, const Matrix& z);

/// First-stage F statistic of the excluded instruments for a single endogenous regressor.
double first_stage_f(const Vector& endogenous, const Matrix& z);

}  // namespace structreg
