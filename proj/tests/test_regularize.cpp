#include <cmath>
#include <numeric>

#include "doctest.h"
#include "structreg/auction.hpp"
#include "structreg/regularize.hpp"
#include "test_util.hpp"

using namespace structreg;

namespace {

Matrix centered(Matrix x) {
    x.rowwise() -= x.colwise().mean();
    return x;
}

StructuralBenchmark line_benchmark(double a, double b) {
    StructuralBenchmark bm;
    bm.id = "line";
    bm.implied_mean = [a, b](const Matrix& x) { return Vector((a + b * x.col(0).array()).matrix()); };
    return bm;
}

}  // namespace

TEST_CASE("PenaltySpec validation") {
    PenaltySpec p{{0.0, 1.0, 10.0}, Vector::Ones(2)};
    CHECK_NOTHROW(p.validate(2));
    CHECK_THROWS(p.validate(3));
    CHECK_THROWS(PenaltySpec{{}, Vector::Ones(1)}.validate());
    CHECK_THROWS(PenaltySpec{{1.0, 1.0}, Vector::Ones(1)}.validate());
    CHECK_THROWS(PenaltySpec{{-1.0, 1.0}, Vector::Ones(1)}.validate());
    Vector bad(1);
    bad << -1.0;
    CHECK_THROWS(PenaltySpec{{1.0}, bad}.validate());
    const auto g = PenaltySpec::default_grid(100);
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(g.front() == doctest::Approx(1e-2));
    CHECK(g.back() == doctest::Approx(1e6));
}

TEST_CASE("ridge at lambda zero is OLS") {
    SeededRng rng(1, 0);
    const Matrix x = testutil::random_matrix(50, 3, rng);
    const Vector y = testutil::random_vector(50, rng);
    const Vector t = sre_ridge(x, y, Vector::Constant(3, 9.0), Vector::Ones(3), 0.0);
    const LinearFit ols = fit_ols(x, y);
    CHECK(t(0) == doctest::Approx(ols.intercept).epsilon(1e-10));
    CHECK(testutil::rel_diff(t.tail(3), ols.coefficients) <= 1e-10);
    CHECK_THROWS(sre_ridge(x, y, Vector::Zero(3), Vector::Ones(3), -1.0));
}

TEST_CASE("ridge at huge lambda returns the benchmark") {
    SeededRng rng(2, 0);
    const Matrix x = centered(testutil::random_matrix(50, 3, rng));
    const Vector y = testutil::random_vector(50, rng);
    Vector tm(3);
    tm << 1.0, -2.0, 3.0;
    const Vector t = sre_ridge(x, y, tm, Vector::Ones(3), 1e12);
    CHECK((t.tail(3) - tm).norm() <= 1e-4 * tm.norm());
    CHECK(t(0) == doctest::Approx(y.mean()));
}

TEST_CASE("ridge on an orthonormal design is a weighted average") {
    SeededRng rng(3, 0);
    const Matrix raw = centered(testutil::random_matrix(40, 4, rng));
    const Matrix q = Eigen::HouseholderQR<Matrix>(raw).householderQ() * Matrix::Identity(40, 4);
    const Vector y = testutil::random_vector(40, rng);
    const Vector tm = testutil::random_vector(4, rng);
    const Vector ols = q.transpose() * (y.array() - y.mean()).matrix();
    for (double lambda : {0.1, 1.0, 7.5}) {
        const Vector t = sre_ridge(q, y, tm, Vector::Ones(4), lambda);
        const Vector expect = ols / (1.0 + lambda) + tm * (lambda / (1.0 + lambda));
        CHECK((t.tail(4) - expect).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("ridge shrinks monotonically toward the benchmark") {
    SeededRng rng(4, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix x = testutil::random_matrix(30, 3, rng);
        const Vector y = testutil::random_vector(30, rng) * 3.0;
        const Vector tm = testutil::random_vector(3, rng);
        double prev = 1e300;
        for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0, 1e4}) {
            const double d = (sre_ridge(x, y, tm, Vector::Ones(3), lambda).tail(3) - tm).norm();
            CHECK(d <= prev + 1e-12);
            prev = d;
        }
    }
}

TEST_CASE("ridge and gmm closed forms are local minima") {
    SeededRng rng(5, 0);
    const Matrix x = testutil::random_matrix(40, 3, rng);
    const Vector y = testutil::random_vector(40, rng);
    const Vector tm = testutil::random_vector(3, rng);
    Vector w(3);
    w << 1.0, 2.0, 3.0;
    const Vector t = sre_ridge(x, y, tm, w, 2.0);
    const double f0 = ridge_objective(x, y, t, tm, w, 2.0);
    for (Eigen::Index j = 0; j < t.size(); ++j) {
        for (double h : {-1e-3, 1e-3}) {
            Vector tp = t;
            tp(j) += h;
            CHECK(ridge_objective(x, y, tp, tm, w, 2.0) >= f0);
        }
    }

    Matrix xa(40, 3), za(40, 4);
    xa << Vector::Ones(40), x.leftCols(2);
    za << Vector::Ones(40), x.leftCols(2), x.col(2);
    const Matrix wm = (za.transpose() * za).inverse();
    Vector gw(3);
    gw << 0.0, 1.0, 1.0;
    const Vector g = sre_gmm(xa, za, y, wm, tm, gw, 0.5);
    const double g0 = gmm_objective(xa, za, y, wm, g, tm, gw, 0.5);
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        for (double h : {-1e-3, 1e-3}) {
            Vector gp = g;
            gp(j) += h;
            CHECK(gmm_objective(xa, za, y, wm, gp, tm, gw, 0.5) >= g0);
        }
    }
}

TEST_CASE("gmm unpenalized just-identified is 2SLS") {
    SeededRng rng(6, 0);
    const Eigen::Index n = 200;
    Matrix zr(n, 1), xr(n, 1);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = rng.normal();
        const double u = rng.normal();
        zr(i, 0) = z;
        xr(i, 0) = z + 0.5 * u;
        y(i) = 1.0 - 2.0 * xr(i, 0) + u;
    }
    Matrix x(n, 2), z(n, 2);
    x << Vector::Ones(n), xr;
    z << Vector::Ones(n), zr;
    Vector w(2);
    w << 0.0, 1.0;
    const Vector g = sre_gmm(x, z, y, (z.transpose() * z).inverse(), Vector::Zero(2), w, 0.0);
    const LinearFit iv = fit_2sls(y, xr, zr);
    CHECK(g(0) == doctest::Approx(iv.intercept).epsilon(1e-9));
    CHECK(g(1) == doctest::Approx(iv.coefficients(0)).epsilon(1e-9));

    Vector tm(2);
    tm << 0.0, 5.0;
    const Vector big = sre_gmm(x, z, y, (z.transpose() * z).inverse(), tm, w, 1e12);
    CHECK(big(1) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("gmm closed form matches a derivative-free minimization") {
    SeededRng rng(7, 0);
    const Eigen::Index n = 60;
    Matrix x(n, 3), z(n, 4);
    const Matrix r = testutil::random_matrix(n, 3, rng);
    x << Vector::Ones(n), r.leftCols(2);
    z << Vector::Ones(n), r.leftCols(2) + 0.3 * testutil::random_matrix(n, 2, rng), r.col(2);
    const Vector y = x * Vector::LinSpaced(3, 1, 3) + testutil::random_vector(n, rng);
    const Matrix w = (z.transpose() * z / static_cast<double>(n)).inverse() / static_cast<double>(n);
    const Vector tm = testutil::random_vector(3, rng);
    Vector pw(3);
    pw << 0.0, 1.0, 1.0;
    const Vector closed = sre_gmm(x, z, y, w, tm, pw, 1.0);
    const Objective obj = [&](const Vector& t) { return gmm_objective(x, z, y, w, t, tm, pw, 1.0); };
    const OptimizeResult num = nelder_mead(obj, Vector::Zero(3));
    CHECK((num.x - closed).norm() <= 1e-6 * closed.norm());
}

TEST_CASE("gmm rejects bad weight matrices and penalized constants") {
    Matrix x(4, 2), z(4, 2);
    x << 1, 1, 1, 2, 1, 3, 1, 5;
    z = x;
    const Vector y = Vector::LinSpaced(4, 0, 3);
    Matrix neg = -Matrix::Identity(2, 2);
    Vector w(2);
    w << 0.0, 1.0;
    CHECK_THROWS_WITH(sre_gmm(x, z, y, neg, Vector::Zero(2), w, 1.0), doctest::Contains("positive semi-definite"));
    CHECK_THROWS(sre_gmm(x, z, y, Matrix::Identity(2, 2), Vector::Zero(2), Vector::Ones(2), 1.0));
    CHECK_THROWS(sre_gmm(x, z, y, Matrix::Identity(2, 2), Vector::Zero(2), w, -1.0));
}

TEST_CASE("extremum estimator") {
    Vector c(2);
    c << 3.0, -1.0;
    const Objective quad = [&](const Vector& t) { return (t - c).squaredNorm(); };
    const OptimizeResult r = sre_extremum(quad, Vector::Zero(2), Vector::Ones(2), 0.0, Vector::Ones(2));
    CHECK((r.x - c).norm() <= 1e-6);

    Vector tm(2);
    tm << -4.0, 2.0;
    const Objective zero = [](const Vector&) { return 0.0; };
    const OptimizeResult z = sre_extremum(zero, tm, Vector::Ones(2), 1.0, Vector::Zero(2));
    CHECK((z.x - tm).norm() <= 1e-6);

    SeededRng rng(8, 0);
    const Matrix x = testutil::random_matrix(30, 2, rng);
    const Vector y = testutil::random_vector(30, rng);
    const Vector ridge = sre_ridge(x, y, tm, Vector::Ones(2), 3.0);
    const Objective ls = [&](const Vector& t) {
        return (y - x * t.tail(2) - Vector::Constant(30, t(0))).squaredNorm();
    };
    Vector tm3(3), w3(3);
    tm3 << 0.0, tm;
    w3 << 0.0, 1.0, 1.0;
    const OptimizeResult e = sre_extremum(ls, tm3, w3, 3.0, Vector::Zero(3));
    CHECK((e.x - ridge).norm() <= 1e-6 * std::max(1.0, ridge.norm()));

    const Objective bad = [](const Vector& t) { return t(0) > 0.1 ? std::nan("") : 0.0; };
    CHECK_THROWS(sre_extremum(bad, Vector::Ones(1), Vector::Ones(1), 1.0, Vector::Zero(1)));
}

TEST_CASE("theta_m of a linear benchmark under a linear g") {
    SeededRng rng(9, 0);
    const DomainSpec dom({{0.0, 10.0}});
    Matrix pts(5, 1);
    pts << 0, 2, 4, 6, 10;
    const FeatureMap lin = linear_features()(pts);
    const LinearFit f = fit_theta_m(lin, line_benchmark(1.5, -0.25), dom, 0, rng);
    CHECK(f.intercept == doctest::Approx(1.5));
    CHECK(f.coefficients(0) == doctest::Approx(-0.25));
    const LinearFit c = fit_theta_m(lin, line_benchmark(4.0, 0.0), dom, 0, rng);
    CHECK(c.intercept == doctest::Approx(4.0));
    CHECK(std::abs(c.coefficients(0)) <= 1e-12);
}

TEST_CASE("theta_m of the auction benchmark on [5,50]") {
    SeededRng rng(10, 0);
    const DomainSpec dom({{5.0, 50.0}});
    const FeatureMap g = polynomial_map(5, 27.5, 12.5);
    const LinearFit f = fit_theta_m(g, uniform_benchmark(), dom, 0, rng);
    // Oracle: normal equations against (n-1)/(n+1) on the same 1000-point grid.
    const Vector grid = Vector::LinSpaced(1000, 5.0, 50.0);
    const Matrix feats = g.expand(grid);
    Matrix a(grid.size(), 6);
    a << Vector::Ones(grid.size()), feats;
    const Vector target = ((grid.array() - 1.0) / (grid.array() + 1.0)).matrix();
    const Vector oracle = (a.transpose() * a).ldlt().solve(a.transpose() * target);
    const Vector fitted = Vector::Constant(grid.size(), f.intercept) + feats * f.coefficients;
    CHECK((fitted - a * oracle).cwiseAbs().maxCoeff() <= 1e-9);
    // A quintic cannot follow the curvature near n = 5 much better than this; the error is largest there.
    const Eigen::Index worst = [&] {
        Eigen::Index k = 0;
        (fitted - target).cwiseAbs().maxCoeff(&k);
        return k;
    }();
    CHECK((fitted - target).cwiseAbs().maxCoeff() <= 0.013);
    CHECK(grid(worst) < 6.0);
    const Vector dense = Vector::LinSpaced(200, 10.0, 50.0);
    const Vector dense_fit = Vector::Constant(200, f.intercept) + g.expand(dense) * f.coefficients;
    CHECK((dense_fit - ((dense.array() - 1.0) / (dense.array() + 1.0)).matrix()).cwiseAbs().maxCoeff() <= 5e-3);
}

TEST_CASE("benchmark simulation agrees with its implied mean") {
    const StructuralBenchmark b = uniform_benchmark();
    SeededRng rng(11, 0);
    for (double n : {5.0, 20.0}) {
        const Dataset d = b.simulate(DomainSpec({{n, n}}), 100000, rng);
        CHECK((d.inputs().array() == n).all());
        const double mean = d.outcome().mean();
        const double se = std::sqrt((d.outcome().array() - mean).square().mean() / 1e5);
        Matrix x(1, 1);
        x << n;
        CHECK(std::abs(mean - b.implied_mean(x)(0)) <= 4.0 * se);
    }
    SeededRng r2(12, 0);
    const Dataset d = b.simulate(DomainSpec({{5.0, 30.0}}), 500, r2);
    CHECK(d.inputs().minCoeff() >= 5.0);
    CHECK(d.inputs().maxCoeff() <= 30.0);
}

TEST_CASE("ate of polynomial fits") {
    const Vector d = Vector::LinSpaced(9, -2, 2);
    const PolyFit lin = fit_polynomial(d, (2.0 + 3.0 * d.array()).matrix(), 1);
    Vector at(1);
    at << 0.7;
    CHECK(ate_from_fit(lin, 0)(at) == doctest::Approx(3.0));
    const PolyFit sq = fit_polynomial(d, d.array().square().matrix(), 2);
    at << 1.0;
    CHECK(ate_from_fit(sq, 0)(at) == doctest::Approx(2.0));
    CHECK_THROWS(ate_from_fit(sq, 1));
}

TEST_CASE("ate of an sre fit matches finite differences") {
    SeededRng rng(13, 0);
    const Eigen::Index n = 80;
    Matrix p(n, 1);
    Vector q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        p(i, 0) = rng.uniform(20, 40);
        q(i) = 100 - 2 * p(i, 0) + 0.01 * p(i, 0) * p(i, 0) + rng.normal();
    }
    const Dataset data(p, q);
    const FeatureMap g = polynomial_features(2)(p);
    LinearFit tm;
    tm.intercept = 90.0;
    tm.coefficients = Vector::Zero(2);
    const SREFit fit = fit_second_stage(SecondStage::Ridge, g, data, tm, Vector::Ones(2), 5.0);
    const auto slope = ate_from_fit(fit, 0);
    for (double x : {22.0, 30.0, 38.0}) {
        const double h = 1e-6;
        Matrix lo(1, 1), hi(1, 1);
        lo << x - h;
        hi << x + h;
        const double fd = (fit.predict(hi)(0) - fit.predict(lo)(0)) / (2 * h);
        Vector at(1);
        at << x;
        CHECK(slope(at) == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK_THROWS(ate_from_fit(fit, 2));
}

TEST_CASE("sre fit keeps standardized and raw views consistent") {
    SeededRng rng(14, 0);
    Matrix x(50, 1);
    Vector y(50);
    for (Eigen::Index i = 0; i < 50; ++i) {
        x(i, 0) = rng.uniform(5, 30);
        y(i) = std::log(x(i, 0)) + 0.1 * rng.normal();
    }
    const FeatureMap g = polynomial_features(3)(x);
    const LinearFit tm = fit_ols(g.expand(x), y);
    const SREFit fit = fit_second_stage(SecondStage::Ridge, g, Dataset(x, y), tm, Vector::Ones(3), 2.0);
    CHECK(fit.theta.size() == fit.theta_m.size());
    const LinearFit raw = fit.raw();
    CHECK((raw.predict(g.expand(x)) - fit.predict(x)).cwiseAbs().maxCoeff() <= 1e-10);
    const Vector back = to_standardized(from_standardized(fit.theta, fit.transform), fit.transform);
    CHECK((back - fit.theta).cwiseAbs().maxCoeff() <= 1e-10);
}
