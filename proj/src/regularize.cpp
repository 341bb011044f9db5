#include "structreg/regularize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace structreg {

namespace {

void check_lambda(double lambda, const char* who) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument(std::string(who) + ": lambda must be finite and >= 0");
    }
}

void check_weights(const Vector& weights, Eigen::Index p, const char* who) {
    if (weights.size() != p) throw std::invalid_argument(std::string(who) + ": weights length mismatch");
    if (!weights.allFinite() || (weights.array() < 0.0).any()) {
        throw std::invalid_argument(std::string(who) + ": weights must be finite and >= 0");
    }
}

// Solves min ||A t - b||^2 + lambda sum_j w_j (t_j - m_j)^2 as one stacked least-squares problem.
Vector penalized_ls(const Matrix& a, const Vector& b, const Vector& m, const Vector& weights, double lambda,
                    const char* who, const char* what) {
    const Eigen::Index p = a.cols();
    const Vector root = (lambda * weights.array()).sqrt().matrix();
    Matrix stacked(a.rows() + p, p);
    stacked << a, Matrix(root.asDiagonal());
    Vector rhs(a.rows() + p);
    rhs << b, root.cwiseProduct(m);
    Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
    if (qr.rank() < p) throw std::runtime_error(std::string(who) + ": " + what);
    Vector t = qr.solve(rhs);
    if (!t.allFinite()) throw std::runtime_error(std::string(who) + ": non-finite solution");
    return t;
}

double penalty_value(const Vector& theta, const Vector& theta_m, const Vector& weights, double lambda) {
    if (lambda == 0.0) return 0.0;
    return lambda * (weights.array() * (theta - theta_m).array().square()).sum();
}

Matrix with_constant(const Matrix& m) {
    Matrix out(m.rows(), m.cols() + 1);
    out << Vector::Ones(m.rows()), m;
    return out;
}

}  // namespace

void PenaltySpec::validate() const {
    if (lambda_grid.empty()) throw std::invalid_argument("PenaltySpec: empty lambda grid");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] >= 0.0) || !std::isfinite(lambda_grid[i])) {
            throw std::invalid_argument("PenaltySpec: lambda values must be finite and >= 0");
        }
        if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) {
            throw std::invalid_argument("PenaltySpec: lambda grid must be strictly increasing");
        }
    }
    if (!weights.allFinite() || (weights.array() < 0.0).any()) {
        throw std::invalid_argument("PenaltySpec: weights must be finite and >= 0");
    }
}

void PenaltySpec::validate(Eigen::Index coordinates) const {
    validate();
    if (weights.size() != coordinates) {
        throw std::invalid_argument("PenaltySpec: expected " + std::to_string(coordinates) + " weights, got " +
                                    std::to_string(weights.size()));
    }
}

std::vector<double> PenaltySpec::default_grid(std::size_t n, std::size_t points, double lower, double upper) {
    if (points == 0 || !(lower > 0.0) || !(upper >= lower)) throw std::invalid_argument("default_grid: bad range");
    std::vector<double> grid(points);
    const double a = std::log10(lower);
    const double b = std::log10(upper);
    for (std::size_t i = 0; i < points; ++i) {
        const double e = points == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
        grid[i] = std::pow(10.0, e) * static_cast<double>(n);
    }
    return grid;
}

FeatureMap polynomial_map(int degree, double center, double scale, bool scale_columns) {
    if (degree < 1) throw std::invalid_argument("polynomial_map: degree must be at least 1");
    if (!(scale > 0.0)) throw std::invalid_argument("polynomial_map: scale must be positive");
    FeatureMap fm;
    fm.name = "poly" + std::to_string(degree);
    fm.input_dim = 1;
    fm.dim = degree;
    fm.scale_columns = scale_columns;
    for (int j = 1; j <= degree; ++j) fm.labels.push_back("z^" + std::to_string(j));
    fm.expand = [=](const Matrix& x) {
        if (x.cols() != 1) throw std::invalid_argument("polynomial_map: expects one input column");
        return power_features(x.col(0), degree, center, scale);
    };
    fm.jacobian = [=](const Matrix& x, Eigen::Index coord) {
        if (coord != 0) throw std::invalid_argument("polynomial_map: treatment index out of range");
        Matrix j(x.rows(), degree);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double z = (x(i, 0) - center) / scale;
            double power = 1.0;
            for (int d = 1; d <= degree; ++d) {
                j(i, d - 1) = d * power / scale;
                power *= z;
            }
        }
        return j;
    };
    return fm;
}

FeatureSpec polynomial_features(int degree, bool scale_columns) {
    return [=](const Matrix& inputs) {
        if (inputs.cols() != 1 || inputs.rows() == 0) throw std::invalid_argument("polynomial_features: expects one input column");
        const double c = inputs.col(0).mean();
        const double sd = std::sqrt((inputs.col(0).array() - c).square().mean());
        return polynomial_map(degree, c, sd > 0.0 ? sd : 1.0, scale_columns);
    };
}

FeatureMap arx_map(int p, int q, Eigen::Index input_dim) {
    if (p < 0 || q < 0 || p + q == 0) throw std::invalid_argument("arx_map: need p + q >= 1");
    if (input_dim < 1 + q) throw std::invalid_argument("arx_map: inputs must hold R_t and q lags");
    FeatureMap fm;
    fm.name = "arx(" + std::to_string(p) + "," + std::to_string(q) + ")";
    fm.input_dim = input_dim;
    fm.dim = p + q;
    for (int j = 1; j <= p; ++j) fm.labels.push_back("R^" + std::to_string(j));
    for (int l = 1; l <= q; ++l) fm.labels.push_back("n_lag" + std::to_string(l));
    fm.expand = [=](const Matrix& x) {
        if (x.cols() != input_dim) throw std::invalid_argument("arx_map: input width mismatch");
        Matrix f(x.rows(), p + q);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double power = 1.0;
            for (int j = 0; j < p; ++j) {
                power *= x(i, 0);
                f(i, j) = power;
            }
            for (int l = 0; l < q; ++l) f(i, p + l) = x(i, 1 + l);
        }
        return f;
    };
    fm.jacobian = [=](const Matrix& x, Eigen::Index coord) {
        if (coord < 0 || coord >= input_dim) throw std::invalid_argument("arx_map: treatment index out of range");
        Matrix j = Matrix::Zero(x.rows(), p + q);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (coord == 0) {
                double power = 1.0;
                for (int d = 1; d <= p; ++d) {
                    j(i, d - 1) = d * power;
                    power *= x(i, 0);
                }
            } else if (coord <= q) {
                j(i, p + coord - 1) = 1.0;
            }
        }
        return j;
    };
    return fm;
}

FeatureSpec arx_features(int p, int q) {
    return [=](const Matrix& inputs) { return arx_map(p, q, inputs.cols()); };
}

FeatureSpec linear_features() {
    return [](const Matrix& inputs) {
        const Eigen::Index d = inputs.cols();
        FeatureMap fm;
        fm.name = "linear";
        fm.input_dim = d;
        fm.dim = d;
        for (Eigen::Index j = 0; j < d; ++j) fm.labels.push_back("x" + std::to_string(j + 1));
        fm.expand = [d](const Matrix& x) {
            if (x.cols() != d) throw std::invalid_argument("linear features: input width mismatch");
            return x;
        };
        fm.jacobian = [d](const Matrix& x, Eigen::Index coord) {
            if (coord < 0 || coord >= d) throw std::invalid_argument("linear features: treatment index out of range");
            Matrix j = Matrix::Zero(x.rows(), d);
            j.col(coord).setOnes();
            return j;
        };
        return fm;
    };
}

Matrix default_design(const DomainSpec& domain, std::size_t m, SeededRng& rng) {
    if (domain.dims() == 0) throw std::invalid_argument("default_design: empty domain");
    if (m == 0) throw std::invalid_argument("default_design: empty design");
    const auto d = static_cast<Eigen::Index>(domain.dims());
    const auto rows = static_cast<Eigen::Index>(m);
    Matrix x(rows, d);
    if (d == 1) {
        const double lo = domain[0].lower;
        const double hi = domain[0].upper;
        for (Eigen::Index i = 0; i < rows; ++i) {
            x(i, 0) = rows == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(rows - 1);
        }
        return x;
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto& b = domain[static_cast<std::size_t>(j)];
            x(i, j) = b.lower == b.upper ? b.lower : rng.uniform(b.lower, b.upper);
        }
    }
    return x;
}

LinearFit fit_theta_m(const FeatureMap& features, const StructuralBenchmark& benchmark, const DomainSpec& domain,
                      std::size_t m, SeededRng& rng, ThetaMSource source) {
    if (m == 0) m = std::max<std::size_t>(1000, 50 * static_cast<std::size_t>(features.dim));
    Matrix inputs;
    Vector target;
    if (source == ThetaMSource::Draws) {
        if (!benchmark.simulate) throw std::invalid_argument("fit_theta_m: benchmark cannot simulate");
        const Dataset draws = benchmark.simulate(domain, m, rng);
        inputs = draws.inputs();
        target = draws.outcome();
    } else {
        if (!benchmark.implied_mean) throw std::invalid_argument("fit_theta_m: benchmark has no implied mean");
        inputs = benchmark.design ? benchmark.design(domain, m, rng) : default_design(domain, m, rng);
        target = benchmark.implied_mean(inputs);
    }
    return fit_ols(features.expand(inputs), target, features.labels);
}

Vector sre_ridge(const Matrix& x, const Vector& y, const Vector& theta_m, const Vector& weights, double lambda) {
    check_lambda(lambda, "sre_ridge");
    if (x.rows() != y.size()) throw std::invalid_argument("sre_ridge: row count mismatch");
    if (theta_m.size() != x.cols()) throw std::invalid_argument("sre_ridge: theta_m length mismatch");
    check_weights(weights, x.cols(), "sre_ridge");
    const Vector mean = x.colwise().mean().transpose();
    const double y_mean = y.mean();
    const Matrix xc = x.rowwise() - mean.transpose();
    const Vector b = penalized_ls(xc, y.array() - y_mean, theta_m, weights, lambda, "sre_ridge", "singular penalized system");
    Vector out(x.cols() + 1);
    out << y_mean - mean.dot(b), b;
    return out;
}

double ridge_objective(const Matrix& x, const Vector& y, const Vector& theta, const Vector& theta_m,
                       const Vector& weights, double lambda) {
    const Vector b = theta.tail(x.cols());
    const double rss = (y - x * b - Vector::Constant(y.size(), theta(0))).squaredNorm();
    return rss + penalty_value(b, theta_m, weights, lambda);
}

Vector sre_gmm(const Matrix& x, const Matrix& z, const Vector& y, const Matrix& w, const Vector& theta_m,
               const Vector& weights, double lambda) {
    check_lambda(lambda, "sre_gmm");
    if (x.rows() != y.size() || z.rows() != y.size()) throw std::invalid_argument("sre_gmm: row count mismatch");
    if (z.cols() < x.cols()) throw std::invalid_argument("sre_gmm: need at least as many moments as parameters");
    if (w.rows() != z.cols() || w.cols() != z.cols()) throw std::invalid_argument("sre_gmm: weight matrix shape mismatch");
    if (theta_m.size() != x.cols()) throw std::invalid_argument("sre_gmm: theta_m length mismatch");
    check_weights(weights, x.cols(), "sre_gmm");
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double spread = x.col(j).maxCoeff() - x.col(j).minCoeff();
        if (spread == 0.0 && weights(j) != 0.0) {
            throw std::invalid_argument("sre_gmm: constant column " + std::to_string(j) + " must be unpenalized");
        }
    }

    const double wscale = w.cwiseAbs().maxCoeff();
    if (!w.allFinite() || (w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(wscale, 1e-300)) {
        throw std::invalid_argument("sre_gmm: weight matrix not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (w + w.transpose()));
    const Vector ev = eig.eigenvalues();
    if (ev.minCoeff() < -1e-10 * std::max(std::abs(ev.maxCoeff()), 1e-300)) {
        throw std::invalid_argument("sre_gmm: weight matrix not positive semi-definite");
    }
    // W = L L' so the GMM criterion is ||L' Z' (y - X t)||^2.
    const Matrix l = eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const Matrix zt = z.transpose();
    const Matrix a = l.transpose() * (zt * x);
    const Vector b = l.transpose() * (zt * y);
    return penalized_ls(a, b, theta_m, weights, lambda, "sre_gmm", "singular bracket");
}

double gmm_objective(const Matrix& x, const Matrix& z, const Vector& y, const Matrix& w, const Vector& theta,
                     const Vector& theta_m, const Vector& weights, double lambda) {
    const Vector g = z.transpose() * (y - x * theta);
    return g.dot(w * g) + penalty_value(theta, theta_m, weights, lambda);
}

OptimizeResult sre_extremum(const Objective& objective, const Vector& theta_m, const Vector& weights, double lambda,
                            const Vector& theta_init, const NelderMeadOptions& options) {
    check_lambda(lambda, "sre_extremum");
    if (theta_m.size() != theta_init.size()) throw std::invalid_argument("sre_extremum: dimension mismatch");
    check_weights(weights, theta_m.size(), "sre_extremum");
    if (!std::isfinite(objective(theta_init))) throw std::invalid_argument("sre_extremum: objective not finite at theta_init");
    const Objective total = [&](const Vector& t) { return objective(t) + penalty_value(t, theta_m, weights, lambda); };
    OptimizeResult best = nelder_mead(total, theta_init, options);
    const OptimizeResult other = nelder_mead(total, theta_m, options);
    if (other.value < best.value) {
        const std::size_t used = best.evaluations;
        best = other;
        best.evaluations += used;
    } else {
        best.evaluations += other.evaluations;
    }
    return best;
}

const char* to_string(SreMethod m) {
    switch (m) {
        case SreMethod::SampleSplit: return "sample-split";
        case SreMethod::CrossFit: return "cross-fit";
        case SreMethod::Direct: return "direct";
    }
    return "?";
}

const char* to_string(CvKind k) {
    switch (k) {
        case CvKind::KFold: return "kfold";
        case CvKind::Forward: return "forward";
        case CvKind::Rolling: return "rolling";
    }
    return "?";
}

const char* to_string(SecondStage s) {
    return s == SecondStage::Ridge ? "ridge" : "gmm";
}

Vector to_standardized(const LinearFit& raw, const StandardizeTransform& t) {
    if (raw.coefficients.size() != t.scale.size()) throw std::invalid_argument("to_standardized: dimension mismatch");
    Vector theta(raw.coefficients.size() + 1);
    theta << raw.intercept + t.mean.dot(raw.coefficients), raw.coefficients.cwiseProduct(t.scale);
    return theta;
}

LinearFit from_standardized(const Vector& theta, const StandardizeTransform& t) {
    if (theta.size() != t.scale.size() + 1) throw std::invalid_argument("from_standardized: dimension mismatch");
    LinearFit out;
    out.coefficients = theta.tail(t.scale.size()).cwiseQuotient(t.scale);
    out.intercept = theta(0) - t.mean.dot(out.coefficients);
    return out;
}

StandardizeTransform feature_transform(const FeatureMap& features, const Matrix& inputs) {
    const Matrix f = features.expand(inputs);
    Dataset d(f, Vector::Zero(f.rows()));
    return features.scale_columns ? standardize(d).second : center(d).second;
}

Vector SREFit::predict(const Matrix& inputs) const {
    const Matrix f = transform.apply(features.expand(inputs));
    return (f * theta.tail(f.cols())).array() + theta(0);
}

LinearFit SREFit::raw() const {
    LinearFit out = from_standardized(theta, transform);
    out.labels = features.labels;
    return out;
}

LinearFit SREFit::raw_theta_m() const {
    LinearFit out = from_standardized(theta_m, transform);
    out.labels = features.labels;
    return out;
}

SREFit fit_second_stage(SecondStage stage, const FeatureMap& features, const Dataset& data,
                        const LinearFit& theta_m_raw, const Vector& weights, double lambda) {
    if (data.rows() < 2) throw std::invalid_argument("fit_second_stage: need at least two observations");
    if (theta_m_raw.coefficients.size() != features.dim) throw std::invalid_argument("fit_second_stage: theta_m length mismatch");
    const Matrix f = features.expand(data.inputs());
    const Dataset fd(f, data.outcome());
    auto [std_data, t] = features.scale_columns ? standardize(fd) : center(fd);

    SREFit fit;
    fit.stage = stage;
    fit.features = features;
    fit.transform = t;
    fit.lambda_star = lambda;
    fit.theta_m = to_standardized(theta_m_raw, t);
    const Matrix& ft = std_data.inputs();
    if (stage == SecondStage::Ridge) {
        fit.theta = sre_ridge(ft, data.outcome(), fit.theta_m.tail(features.dim), weights, lambda);
        return fit;
    }
    if (!data.instruments()) throw std::invalid_argument("fit_second_stage: GMM needs instruments");
    const Matrix x = with_constant(ft);
    const Matrix z = with_constant(*data.instruments());
    Eigen::LDLT<Matrix> zz(z.transpose() * z);
    if (zz.info() != Eigen::Success || !(zz.vectorD().array() > 0.0).all()) {
        throw std::runtime_error("fit_second_stage: singular instrument Gram matrix");
    }
    const Matrix w = zz.solve(Matrix::Identity(z.cols(), z.cols()));
    Vector wfull(weights.size() + 1);
    wfull << 0.0, weights;
    fit.theta = sre_gmm(x, z, data.outcome(), 0.5 * (w + w.transpose()), fit.theta_m, wfull, lambda);
    return fit;
}

std::function<double(const Vector&)> ate_from_fit(const SREFit& fit, Eigen::Index treatment_index) {
    if (treatment_index < 0 || treatment_index >= fit.features.input_dim) {
        throw std::invalid_argument("ate_from_fit: treatment index out of range");
    }
    const Vector slopes = fit.theta.tail(fit.features.dim).cwiseQuotient(fit.transform.scale);
    const auto jac = fit.features.jacobian;
    return [slopes, jac, treatment_index](const Vector& x) {
        const Matrix row = x.transpose();
        return (jac(row, treatment_index) * slopes)(0);
    };
}

std::function<double(const Vector&)> ate_from_fit(const PolyFit& fit, Eigen::Index treatment_index) {
    if (treatment_index != 0) throw std::invalid_argument("ate_from_fit: treatment index out of range");
    return [fit](const Vector& x) { return fit.derivative(x(0)); };
}

}  // namespace structreg
