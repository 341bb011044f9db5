#include "structreg/stat.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace structreg {

namespace {

constexpr double kMaxCondition = 1e12;

// Least squares through a column-pivoted QR; no silent pseudo-inverse.
Vector solve_ls(const Matrix& a, const Vector& b, const char* who, const char* what = "singular design") {
    if (a.cols() == 0) return Vector(0);
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    const auto& r = qr.matrixR();
    const Eigen::Index k = a.cols();
    const double top = std::abs(r(0, 0));
    const double bottom = std::abs(r(k - 1, k - 1));
    if (a.rows() < k || !(bottom > 0.0) || top / bottom > kMaxCondition) {
        throw std::runtime_error(std::string(who) + ": " + what);
    }
    return qr.solve(b);
}

double binomial_coefficient(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

}  // namespace

Vector LinearFit::predict(const Matrix& x) const {
    return (x * coefficients).array() + intercept;
}

double PolyFit::predict(double x) const {
    const double z = (x - center) / scale;
    double acc = 0.0;
    for (int j = degree; j >= 1; --j) acc = (acc + fit.coefficients(j - 1)) * z;
    return fit.intercept + acc;
}

Vector PolyFit::predict(const Vector& x) const {
    Vector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = predict(x(i));
    return out;
}

double PolyFit::derivative(double x) const {
    const double z = (x - center) / scale;
    double acc = 0.0;
    for (int j = degree; j >= 1; --j) acc = acc * z + j * fit.coefficients(j - 1);
    return acc / scale;
}

Vector PolyFit::raw_coefficients() const {
    // sum_j b_j ((x - c)/s)^j = sum_j b_j s^-j sum_k C(j,k) x^k (-c)^(j-k)
    Vector out = Vector::Zero(degree + 1);
    out(0) = fit.intercept;
    for (int j = 1; j <= degree; ++j) {
        const double bj = fit.coefficients(j - 1) / std::pow(scale, j);
        for (int k = 0; k <= j; ++k) out(k) += bj * binomial_coefficient(j, k) * std::pow(-center, j - k);
    }
    return out;
}

double ARXFit::predict(double r_t, std::span<const double> lags) const {
    if (lags.size() < static_cast<std::size_t>(q)) throw std::invalid_argument("ARXFit::predict: too few lags");
    double out = intercept;
    double power = 1.0;
    for (int j = 0; j < p; ++j) {
        power *= r_t;
        out += exo(j) * power;
    }
    for (int l = 0; l < q; ++l) out += ar(l) * lags[static_cast<std::size_t>(l)];
    return out;
}

Matrix power_features(const Vector& x, int degree, double center, double scale) {
    Matrix f(x.size(), degree);
    const Vector z = (x.array() - center) / scale;
    Vector power = Vector::Ones(x.size());
    for (int j = 0; j < degree; ++j) {
        power = power.cwiseProduct(z);
        f.col(j) = power;
    }
    return f;
}

Matrix arx_design(std::span<const double> n, std::span<const double> r, int p, int q) {
    if (n.size() != r.size()) throw std::invalid_argument("arx_design: series lengths differ");
    if (p < 0 || q < 0) throw std::invalid_argument("arx_design: negative order");
    const auto t_total = static_cast<Eigen::Index>(n.size());
    const Eigen::Index rows = std::max<Eigen::Index>(0, t_total - q);
    Matrix d(rows, p + q);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto t = static_cast<std::size_t>(i + q);
        double power = 1.0;
        for (int j = 0; j < p; ++j) {
            power *= r[t];
            d(i, j) = power;
        }
        for (int l = 1; l <= q; ++l) d(i, p + l - 1) = n[t - static_cast<std::size_t>(l)];
    }
    return d;
}

LinearFit fit_ols(const Matrix& x, const Vector& y, std::vector<std::string> labels) {
    if (x.rows() != y.size()) throw std::invalid_argument("fit_ols: row count mismatch");
    if (x.rows() <= x.cols()) throw std::invalid_argument("fit_ols: need N > p");
    const Vector mean = x.colwise().mean().transpose();
    const double y_mean = y.mean();
    const Matrix xc = x.rowwise() - mean.transpose();
    LinearFit fit;
    fit.coefficients = solve_ls(xc, y.array() - y_mean, "fit_ols");
    fit.intercept = y_mean - mean.dot(fit.coefficients);
    if (labels.empty()) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) labels.push_back("x" + std::to_string(j + 1));
    }
    fit.labels = std::move(labels);
    if (!fit.coefficients.allFinite() || !std::isfinite(fit.intercept)) {
        throw std::runtime_error("fit_ols: non-finite coefficients");
    }
    return fit;
}

PolyFit fit_polynomial(const Vector& x, const Vector& y, int degree) {
    if (degree < 1) throw std::invalid_argument("fit_polynomial: degree must be at least 1");
    if (x.size() != y.size()) throw std::invalid_argument("fit_polynomial: length mismatch");
    if (x.size() <= degree + 1) throw std::invalid_argument("fit_polynomial: need N > degree + 1");
    PolyFit pf;
    pf.degree = degree;
    pf.center = x.mean();
    const double sd = std::sqrt((x.array() - pf.center).square().mean());
    pf.scale = sd > 0.0 ? sd : 1.0;
    std::vector<std::string> labels;
    for (int j = 1; j <= degree; ++j) labels.push_back("z^" + std::to_string(j));
    pf.fit = fit_ols(power_features(x, degree, pf.center, pf.scale), y, std::move(labels));
    return pf;
}

double polynomial_aic(const Vector& x, const Vector& y, int degree) {
    const PolyFit pf = fit_polynomial(x, y, degree);
    const double n = static_cast<double>(y.size());
    const double rss = (y - pf.predict(x)).squaredNorm();
    const double tss = (y.array() - y.mean()).square().sum();
    // Round-off floor so that exactly-fitting degrees tie instead of racing on noise.
    const double floor = std::max(1e-24 * tss, std::numeric_limits<double>::min());
    return n * std::log(std::max(rss, floor) / n) + 2.0 * (degree + 1);
}

int select_degree_aic(const Vector& x, const Vector& y, int max_degree) {
    if (max_degree < 1) throw std::invalid_argument("select_degree_aic: max_degree must be at least 1");
    if (x.size() <= max_degree + 2) throw std::invalid_argument("select_degree_aic: need N > max_degree + 2");
    int best = 1;
    double best_aic = polynomial_aic(x, y, 1);
    for (int d = 2; d <= max_degree; ++d) {
        const double aic = polynomial_aic(x, y, d);
        if (aic < best_aic) {
            best_aic = aic;
            best = d;
        }
    }
    return best;
}

ARXFit fit_arx(std::span<const double> n, std::span<const double> r, int p, int q) {
    if (n.size() != r.size()) throw std::invalid_argument("fit_arx: series lengths differ");
    if (static_cast<long>(n.size()) <= p + q + 1) throw std::invalid_argument("fit_arx: series too short");
    const Matrix d = arx_design(n, r, p, q);
    Vector y(d.rows());
    for (Eigen::Index i = 0; i < d.rows(); ++i) y(i) = n[static_cast<std::size_t>(i + q)];

    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        const double m = d.col(j).mean();
        const double spread = (d.col(j).array() - m).abs().maxCoeff();
        if (spread > 1e-12 * (1.0 + std::abs(m))) keep.push_back(j);
    }
    Matrix dk(d.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) dk.col(static_cast<Eigen::Index>(k)) = d.col(keep[k]);

    ARXFit fit;
    fit.p = p;
    fit.q = q;
    fit.exo = Vector::Zero(p);
    fit.ar = Vector::Zero(q);
    if (keep.empty()) {
        fit.intercept = y.mean();
        return fit;
    }
    const LinearFit ls = fit_ols(dk, y);
    fit.intercept = ls.intercept;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto j = keep[k];
        if (j < p) fit.exo(j) = ls.coefficients(static_cast<Eigen::Index>(k));
        else fit.ar(j - p) = ls.coefficients(static_cast<Eigen::Index>(k));
    }
    return fit;
}

LinearFit fit_2sls(const Vector& y, const Matrix& x, const Matrix& z) {
    if (x.rows() != y.size() || z.rows() != y.size()) throw std::invalid_argument("fit_2sls: row count mismatch");
    if (z.cols() < x.cols()) throw std::invalid_argument("fit_2sls: need at least as many instruments as regressors");
    const Eigen::Index n = y.size();
    Matrix xa(n, x.cols() + 1);
    xa << Vector::Ones(n), x;
    Matrix za(n, z.cols() + 1);
    za << Vector::Ones(n), z;

    // Projection of the regressors onto the instrument space.
    Eigen::ColPivHouseholderQR<Matrix> zqr(za);
    {
        const auto& r = zqr.matrixR();
        const Eigen::Index k = za.cols();
        if (!(std::abs(r(k - 1, k - 1)) > 0.0) || std::abs(r(0, 0)) / std::abs(r(k - 1, k - 1)) > kMaxCondition) {
            throw std::runtime_error("fit_2sls: rank-deficient instrument matrix");
        }
    }
    const Matrix xhat = za * zqr.solve(xa);
    // beta = (Xhat' X)^-1 Xhat' y, equal to least squares of y on Xhat.
    const Vector beta = solve_ls(xhat, y, "fit_2sls", "rank-deficient projected design");
    LinearFit fit;
    fit.intercept = beta(0);
    fit.coefficients = beta.tail(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) fit.labels.push_back("x" + std::to_string(j + 1));
    return fit;
}

double first_stage_f(const Vector& endogenous, const Matrix& z) {
    const Eigen::Index n = endogenous.size();
    const Eigen::Index l = z.cols();
    const LinearFit fs = fit_ols(z, endogenous);
    const double rss = (endogenous - fs.predict(z)).squaredNorm();
    const double tss = (endogenous.array() - endogenous.mean()).square().sum();
    if (!(rss > 0.0)) return std::numeric_limits<double>::infinity();
    return ((tss - rss) / static_cast<double>(l)) / (rss / static_cast<double>(n - l - 1));
}

}  // namespace structreg
