#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "structreg/tuning.hpp"
#include "test_util.hpp"

using namespace structreg;

namespace {

// Ridge on a linear g toward a fixed target slope vector.
Fitter ridge_toward(const Vector& target) {
    return [target](const Dataset& train, double lambda) -> Predictor {
        const Vector t = sre_ridge(train.inputs(), train.outcome(), target, Vector::Ones(target.size()), lambda);
        return [t](const Matrix& x) { return Vector((x * t.tail(t.size() - 1)).array() + t(0)); };
    };
}

Dataset linear_data(Eigen::Index n, const Vector& beta, double noise, SeededRng& rng) {
    const Matrix x = testutil::random_matrix(n, beta.size(), rng);
    Vector y = x * beta;
    for (Eigen::Index i = 0; i < n; ++i) y(i) += noise * rng.normal();
    return Dataset(x, y);
}

StructuralBenchmark line_benchmark(double a, double b) {
    StructuralBenchmark bm;
    bm.id = "line";
    bm.implied_mean = [a, b](const Matrix& x) { return Vector((a + b * x.col(0).array()).matrix()); };
    return bm;
}

// Time-indexed single-lag dataset: input n_{t-1}, outcome n_t.
Dataset lag_data(const std::vector<double>& n) {
    const auto rows = static_cast<Eigen::Index>(n.size() - 1);
    Matrix x(rows, 1);
    Vector y(rows);
    std::vector<long> time(static_cast<std::size_t>(rows));
    for (Eigen::Index i = 0; i < rows; ++i) {
        x(i, 0) = n[static_cast<std::size_t>(i)];
        y(i) = n[static_cast<std::size_t>(i) + 1];
        time[static_cast<std::size_t>(i)] = i + 1;
    }
    return Dataset(x, y, std::nullopt, time);
}

}  // namespace

TEST_CASE("kfold with a singleton grid") {
    SeededRng rng(1, 0);
    const Dataset d = linear_data(30, Vector::Ones(2), 1.0, rng);
    const CvTrace t = kfold_cv(ridge_toward(Vector::Zero(2)), squared_error_scorer(), d, {0.0}, 5, rng);
    CHECK(t.lambda_star == 0.0);
    CHECK(t.validation_rows.size() == 5);
}

TEST_CASE("kfold picks the largest lambda when the benchmark is the truth") {
    SeededRng rng(2, 0);
    const Vector beta = testutil::random_vector(8, rng);
    // The benchmark is the true conditional mean; with 8 slopes on 24 training rows OLS overfits the noise,
    // so validation error falls as lambda pulls the fit onto the benchmark.
    const Dataset d = linear_data(30, beta, 1.0, rng);
    SeededRng r1(2, 1), r2(2, 1);
    const CvTrace two = kfold_cv(ridge_toward(beta), squared_error_scorer(), d, {0.0, 1e6}, 5, r1);
    CHECK(two.lambda_star == 1e6);
    // Among large lambdas the differences are pure noise, so only the coarse ordering is asserted.
    const std::vector<double> grid = {0.0, 0.1, 1.0, 10.0, 100.0, 1e4};
    const CvTrace t = kfold_cv(ridge_toward(beta), squared_error_scorer(), d, grid, 5, r2);
    CHECK(t.lambda_star >= 10.0);
    CHECK(t.mean_error.back() < t.mean_error.front());
}

TEST_CASE("kfold picks the smallest lambda when the benchmark is noise") {
    SeededRng rng(3, 0);
    Vector beta(3);
    beta << 1.0, -2.0, 0.5;
    const Dataset d = linear_data(2000, beta, 0.5, rng);
    const Vector junk = 5.0 * testutil::random_vector(3, rng);
    const std::vector<double> grid = {0.0, 1.0, 10.0, 100.0, 1e4, 1e8};
    const CvTrace t = kfold_cv(ridge_toward(junk), squared_error_scorer(), d, grid, 5, rng);
    CHECK(t.lambda_star == grid.front());
}

TEST_CASE("cv trace minimizes its own recorded errors and is deterministic") {
    SeededRng rng(4, 0);
    const Dataset d = linear_data(60, Vector::Ones(2), 2.0, rng);
    const std::vector<double> grid = {0.0, 0.5, 5.0, 50.0};
    SeededRng a(9, 9), b(9, 9);
    const CvTrace t1 = kfold_cv(ridge_toward(Vector::Zero(2)), squared_error_scorer(), d, grid, 4, a);
    const CvTrace t2 = kfold_cv(ridge_toward(Vector::Zero(2)), squared_error_scorer(), d, grid, 4, b);
    CHECK(t1.mean_error == t2.mean_error);
    CHECK(t1.validation_rows == t2.validation_rows);
    CHECK(t1.mean_error[t1.best_index] == *std::min_element(t1.mean_error.begin(), t1.mean_error.end()));
    CHECK(t1.lambda_star == grid[t1.best_index]);
}

TEST_CASE("cv ties go to the smallest lambda") {
    SeededRng rng(5, 0);
    const Dataset d = linear_data(20, Vector::Ones(1), 1.0, rng);
    const Fitter constant = [](const Dataset&, double) -> Predictor {
        return [](const Matrix& x) { return Vector::Zero(x.rows()).eval(); };
    };
    const CvTrace t = kfold_cv(constant, squared_error_scorer(), d, {0.1, 1.0, 10.0}, 4, rng);
    CHECK(t.lambda_star == 0.1);
}

TEST_CASE("fitter failures carry the fold id") {
    SeededRng rng(6, 0);
    const Dataset d = linear_data(20, Vector::Ones(1), 1.0, rng);
    const Fitter bad = [](const Dataset&, double) -> Predictor { throw std::runtime_error("boom"); };
    CHECK_THROWS_WITH(kfold_cv(bad, squared_error_scorer(), d, {1.0}, 4, rng), doctest::Contains("fold 0"));
}

TEST_CASE("forward cv keeps the points nearest the target in every validation set") {
    Matrix x(60, 1);
    for (int i = 0; i < 60; ++i) x(i, 0) = i + 1;
    const Vector y = (0.5 * x.col(0)).eval();
    const Dataset d(x, y);
    std::set<double> train_max;
    const Fitter spy = [&](const Dataset& train, double) -> Predictor {
        train_max.insert(train.inputs().maxCoeff());
        return [](const Matrix& in) { return Vector::Zero(in.rows()).eval(); };
    };
    SeededRng rng(7, 0);
    const CvTrace t = forward_cv(spy, squared_error_scorer(), d, {0.0, 1.0}, 5, DomainSpec({{61.0, 100.0}}), 0.0, rng);
    REQUIRE(t.validation_rows.size() == 5);
    for (const auto& v : t.validation_rows) {
        for (std::size_t row = 50; row < 60; ++row) CHECK(std::find(v.begin(), v.end(), row) != v.end());
    }
    CHECK(*train_max.rbegin() <= 50.0);
    CHECK_THROWS_WITH(forward_cv(spy, squared_error_scorer(), d, {0.0}, 5, DomainSpec(), 0.0, rng),
                      doctest::Contains("empty S2"));
}

TEST_CASE("forward cv tends to prefer the benchmark more than kfold does") {
    // Diagnostic only: forward validation emphasises the extrapolation region where a true benchmark helps.
    int forward_at_least = 0;
    const int seeds = 20;
    const std::vector<double> grid = PenaltySpec::default_grid(1, 15);
    for (int s = 0; s < seeds; ++s) {
        SeededRng rng(100 + s, 0);
        Matrix x(60, 1);
        Vector y(60);
        for (Eigen::Index i = 0; i < 60; ++i) {
            x(i, 0) = rng.uniform(0, 10);
            y(i) = 1.0 + 2.0 * x(i, 0) + rng.normal();
        }
        const Dataset d(x, y);
        Vector tm(1);
        tm << 2.0;
        SeededRng r1(s, 1), r2(s, 1);
        const double kf = kfold_cv(ridge_toward(tm), squared_error_scorer(), d, grid, 5, r1).lambda_star;
        const double fw = forward_cv(ridge_toward(tm), squared_error_scorer(), d, grid, 5, DomainSpec({{10.0, 20.0}}), 0.0, r2)
                              .lambda_star;
        if (fw >= kf) ++forward_at_least;
    }
    MESSAGE("forward lambda* >= kfold lambda* in " << forward_at_least << " of " << seeds << " seeds");
    CHECK(forward_at_least >= 0);
}

TEST_CASE("rolling cv on a constant series") {
    const Dataset d = lag_data(std::vector<double>(40, 3.0));
    const Fitter mean_fit = [](const Dataset& train, double) -> Predictor {
        const double m = train.outcome().mean();
        return [m](const Matrix& x) { return Vector::Constant(x.rows(), m).eval(); };
    };
    const CvTrace t = rolling_cv(mean_fit, squared_error_scorer(), d, {0.5, 1.0, 2.0}, 10, 1);
    for (double e : t.mean_error) CHECK(e == 0.0);
    CHECK(t.lambda_star == 0.5);
    CHECK_THROWS_WITH(rolling_cv(mean_fit, squared_error_scorer(), d, {1.0}, 39, 1), doctest::Contains("insufficient"));
}

TEST_CASE("rolling window of all but the last point is a single holdout") {
    const Dataset d = lag_data({1, 2, 3, 4, 5, 6, 7, 8});
    const Fitter mean_fit = [](const Dataset& train, double) -> Predictor {
        const double m = train.outcome().mean();
        return [m](const Matrix& x) { return Vector::Constant(x.rows(), m).eval(); };
    };
    const CvTrace t = rolling_cv(mean_fit, squared_error_scorer(), d, {1.0}, 6, 1);
    REQUIRE(t.validation_rows.size() == 1);
    CHECK(t.validation_rows[0] == std::vector<std::size_t>{6});
    // Mean of outcomes 2..7 is 4.5; the held-out outcome is 8.
    CHECK(t.mean_error[0] == doctest::Approx(3.5 * 3.5));
}

TEST_CASE("rolling cv never trains on the future and favors a true AR(1) benchmark") {
    SeededRng rng(8, 0);
    std::vector<double> n(300);
    n[0] = 0.0;
    for (std::size_t t = 1; t < n.size(); ++t) n[t] = 0.8 * n[t - 1] + rng.normal();
    const Dataset d = lag_data(n);
    Vector rho(1);
    rho << 0.8;
    const Fitter inner = ridge_toward(rho);
    const Scorer scorer = [](const Dataset& train, const Predictor& model, const Dataset& validation) {
        const auto& tt = *train.time_index();
        const auto& tv = *validation.time_index();
        CHECK(*std::max_element(tt.begin(), tt.end()) < *std::min_element(tv.begin(), tv.end()));
        return squared_error_scorer()(train, model, validation);
    };
    const CvTrace t = rolling_cv(inner, scorer, d, {0.0, 1e8}, 30, 1);
    CHECK(t.lambda_star == 1e8);
}

TEST_CASE("sample split with lambda zero is the plain fit on the second half") {
    SeededRng data_rng(9, 0);
    Matrix x(40, 1);
    Vector y(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
        x(i, 0) = data_rng.uniform(0, 5);
        y(i) = std::sin(x(i, 0)) + 0.1 * data_rng.normal();
    }
    const Dataset d(x, y);
    SreProblem problem;
    problem.features = polynomial_features(3);
    const PenaltySpec penalty{{0.0}, Vector::Ones(3)};
    const CvPlan plan{CvKind::KFold, 4};
    const BenchmarkFamily family = [](const Dataset&) { return line_benchmark(0.0, 1.0); };
    SeededRng rng(9, 1);
    const SREFit fit = sre_sample_split(d, family, problem, penalty, plan, rng);
    CHECK(fit.method == SreMethod::SampleSplit);
    CHECK(fit.lambda_star == 0.0);

    SeededRng split(9, 1);
    SeededRng split_rng = split.child(10);
    const auto halves = partition(d, 2, split_rng);
    const FeatureMap g = polynomial_features(3)(halves[1].inputs());
    const LinearFit ols = fit_ols(g.expand(halves[1].inputs()), halves[1].outcome());
    Matrix grid(5, 1);
    grid << 0.5, 1.5, 2.5, 3.5, 4.5;
    CHECK((fit.predict(grid) - ols.predict(g.expand(grid))).cwiseAbs().maxCoeff() <= 1e-9);

    SeededRng again(9, 1);
    const SREFit fit2 = sre_sample_split(d, family, problem, penalty, plan, again);
    CHECK(fit2.theta == fit.theta);
    CHECK(fit2.theta_m == fit.theta_m);
}

TEST_CASE("sample split and cross fit recover a noiseless true benchmark") {
    Matrix x(40, 1);
    for (Eigen::Index i = 0; i < 40; ++i) x(i, 0) = 0.25 * static_cast<double>(i);
    const Vector y = (1.0 + 2.0 * x.col(0).array()).matrix();
    const Dataset d(x, y);
    SreProblem problem;
    problem.features = polynomial_features(2);
    const PenaltySpec penalty{PenaltySpec::default_grid(20, 9), Vector::Ones(2)};
    const CvPlan plan{CvKind::KFold, 4};
    const BenchmarkFamily family = [](const Dataset&) { return line_benchmark(1.0, 2.0); };
    SeededRng r1(10, 0), r2(10, 0);
    const SREFit ss = sre_sample_split(d, family, problem, penalty, plan, r1);
    const SREFit cf = sre_cross_fit(d, family, problem, penalty, plan, r2);
    CHECK(cf.method == SreMethod::CrossFit);
    CHECK((ss.predict(x) - y).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((cf.predict(x) - ss.predict(x)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("cross fit averages the two directions in the raw basis") {
    SeededRng data_rng(11, 0);
    Matrix x(30, 1);
    Vector y(30);
    for (Eigen::Index i = 0; i < 30; ++i) {
        x(i, 0) = data_rng.uniform(-1, 1);
        y(i) = 0.5 + x(i, 0) + data_rng.normal();
    }
    const Dataset d(x, y);
    SreProblem problem;
    problem.features = linear_features();
    const PenaltySpec penalty{{0.0}, Vector::Ones(1)};
    const CvPlan plan{CvKind::KFold, 3};
    const BenchmarkFamily family = [](const Dataset&) { return line_benchmark(0.0, 0.0); };
    SeededRng rng(11, 1);
    const SREFit cf = sre_cross_fit(d, family, problem, penalty, plan, rng);

    SeededRng split = SeededRng(11, 1).child(10);
    const auto halves = partition(d, 2, split);
    const LinearFit a = fit_ols(halves[0].inputs(), halves[0].outcome());
    const LinearFit b = fit_ols(halves[1].inputs(), halves[1].outcome());
    const LinearFit raw = cf.raw();
    CHECK(raw.intercept == doctest::Approx(0.5 * (a.intercept + b.intercept)).epsilon(1e-10));
    CHECK(raw.coefficients(0) == doctest::Approx(0.5 * (a.coefficients(0) + b.coefficients(0))).epsilon(1e-10));
}

TEST_CASE("structural failures are labelled") {
    SeededRng rng(12, 0);
    const Dataset d = linear_data(20, Vector::Ones(1), 1.0, rng);
    SreProblem problem;
    problem.features = linear_features();
    const BenchmarkFamily bad = [](const Dataset&) -> StructuralBenchmark { throw std::runtime_error("no fit"); };
    CHECK_THROWS_WITH(sre_sample_split(d, bad, problem, PenaltySpec{{0.0}, Vector::Ones(1)}, CvPlan{}, rng),
                      doctest::Contains("structural stage"));
}

TEST_CASE("gmm scorer is zero at exact moments") {
    Matrix x(6, 1), z(6, 1);
    x << 1, 2, 3, 4, 5, 6;
    z << 2, 1, 4, 3, 6, 5;
    const Dataset d(x, (2.0 * x.col(0)).eval(), z);
    const Predictor exact = [](const Matrix& in) { return (2.0 * in.col(0)).eval(); };
    CHECK(gmm_scorer()(d, exact, d) == doctest::Approx(0.0));
    const Predictor off = [](const Matrix& in) { return (2.0 * in.col(0)).array() + 1.0; };
    CHECK(gmm_scorer()(d, [&](const Matrix& in) { return Vector(off(in)); }, d) > 0.0);
    CHECK_THROWS(gmm_scorer()(Dataset(x, x.col(0)), exact, d));
}
