#include "structreg/auction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/tools/roots.hpp>

#include "structreg/stat.hpp"

namespace structreg {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kRelTol = 1e-12;

double integrate(const std::function<double(double)>& f, double a, double b) {
    if (!(b > a)) return 0.0;
    return gauss_kronrod<double, 61>::integrate(f, a, b, 15, kRelTol);
}

// P(eta * v <= x) for eta half-normal(sigma), v ~ U(0,1): erf(s) + s E1(s^2) / sqrt(pi), s = x / (sigma sqrt 2).
double uniform_overbid_cdf(double x, double sigma) {
    if (x <= 0.0) return 0.0;
    const double s = x / (sigma * std::sqrt(2.0));
    const double s2 = s * s;
    double e1 = 0.0;
    if (s2 < 1e-10) e1 = -std::numbers::egamma - std::log(s2) + s2;  // series, avoids the pole at 0
    else if (s2 < 700.0) e1 = boost::math::expint(1, s2);
    const double tail = s * e1 / std::sqrt(std::numbers::pi);
    return std::min(1.0, boost::math::erf(s) + tail);
}

}  // namespace

double ValueDistribution::cdf(double v) const {
    if (v <= 0.0) return 0.0;
    if (v >= 1.0) return 1.0;
    return kind == Kind::Uniform ? v : boost::math::ibeta(a, b, v);
}

double ValueDistribution::pdf(double v) const {
    if (v < 0.0 || v > 1.0) return 0.0;
    return kind == Kind::Uniform ? 1.0 : boost::math::ibeta_derivative(a, b, v);
}

double ValueDistribution::mean() const {
    return kind == Kind::Uniform ? 0.5 : a / (a + b);
}

double ValueDistribution::sample(SeededRng& rng) const {
    return kind == Kind::Uniform ? rng.uniform() : rng.beta(a, b);
}

std::string ValueDistribution::describe() const {
    if (kind == Kind::Uniform) return "Uniform(0,1)";
    char buf[64];
    std::snprintf(buf, sizeof buf, "Beta(%g,%g)", a, b);
    return buf;
}

AuctionScenario AuctionScenario::preset(int id) {
    AuctionScenario s;
    s.id = id;
    switch (id) {
        case 1: break;
        case 2: s.values = ValueDistribution::beta(2.0, 5.0); break;
        case 3: s.overbid = Overbid{0.5}; break;
        default: throw std::invalid_argument("auction scenario must be 1, 2 or 3, got " + std::to_string(id));
    }
    return s;
}

void AuctionScenario::validate() const {
    if (auctions < 1) throw std::invalid_argument("auction scenario: auctions must be >= 1");
    if (n_train_lower < 2 || n_test_lower < 2) throw std::invalid_argument("auction scenario: bidder counts must be >= 2");
    if (n_train_upper < n_train_lower || n_test_upper < n_test_lower) {
        throw std::invalid_argument("auction scenario: empty bidder range");
    }
    if (values.kind == ValueDistribution::Kind::Beta && !(values.a > 0.0 && values.b > 0.0)) {
        throw std::invalid_argument("auction scenario: Beta shapes must be positive");
    }
    if (overbid && !(overbid->sigma > 0.0)) throw std::invalid_argument("auction scenario: overbid sigma must be positive");
}

Dataset AuctionData::as_dataset() const {
    const auto m = static_cast<Eigen::Index>(auctions.size());
    Matrix n(m, 1);
    Vector b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        n(i, 0) = auctions[static_cast<std::size_t>(i)].bidders;
        b(i) = auctions[static_cast<std::size_t>(i)].winning_bid;
    }
    return Dataset(n, b);
}

double equilibrium_bid(double v, int n, const ValueDistribution& f) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("equilibrium_bid: value outside [0, 1]");
    if (n < 2) throw std::invalid_argument("equilibrium_bid: need at least two bidders");
    if (f.kind == ValueDistribution::Kind::Uniform) return (n - 1.0) / n * v;
    if (v == 0.0) return 0.0;
    const double fv = f.cdf(v);
    if (!(fv > 0.0)) {
        // F(x) ~ x^a near zero.
        return v * (1.0 - 1.0 / (f.a * (n - 1) + 1.0));
    }
    const double shade = integrate([&](double x) { return std::pow(f.cdf(x) / fv, n - 1); }, 0.0, v);
    return v - shade;
}

double expected_payoff(double v, double bid, int n, const ValueDistribution& f) {
    if (bid <= 0.0) return 0.0;
    const double top = equilibrium_bid(1.0, n, f);
    double win = 1.0;
    if (bid < top) {
        // Rival value whose equilibrium bid equals `bid`.
        const auto gap = [&](double x) { return equilibrium_bid(x, n, f) - bid; };
        boost::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(gap, 0.0, 1.0, boost::math::tools::eps_tolerance<double>(50), iters);
        win = std::pow(f.cdf(0.5 * (r.first + r.second)), n - 1);
    }
    return (v - bid) * win;
}

AuctionData simulate_auctions(const AuctionScenario& scenario, SeededRng& rng) {
    scenario.validate();
    AuctionData data;
    data.auctions.reserve(static_cast<std::size_t>(scenario.auctions));
    for (int m = 0; m < scenario.auctions; ++m) {
        Auction a;
        a.bidders = static_cast<int>(rng.uniform_int(scenario.n_train_lower, scenario.n_train_upper));
        a.bids.reserve(static_cast<std::size_t>(a.bidders));
        for (int i = 0; i < a.bidders; ++i) {
            double bid = equilibrium_bid(scenario.values.sample(rng), a.bidders, scenario.values);
            if (scenario.overbid) bid *= std::abs(rng.normal(0.0, scenario.overbid->sigma));
            a.bids.push_back(bid);
        }
        a.winning_bid = *std::max_element(a.bids.begin(), a.bids.end());
        data.auctions.push_back(std::move(a));
    }
    return data;
}

double uniform_benchmark_mean(double n) {
    return (n - 1.0) / (n + 1.0);
}

double true_expected_winning_bid(const AuctionScenario& scenario, int n) {
    if (n < 2) throw std::invalid_argument("true_expected_winning_bid: need at least two bidders");
    const ValueDistribution& f = scenario.values;
    const bool uniform = f.kind == ValueDistribution::Kind::Uniform;
    if (!scenario.overbid) {
        if (uniform) return uniform_benchmark_mean(n);
        // Revenue equivalence: E[b(max v)] is the expected second-highest value,
        // int_0^1 1 - F^n - n F^(n-1) (1 - F) dv after swapping the order of integration.
        return integrate(
            [&](double v) {
                const double c = f.cdf(v);
                return 1.0 - std::pow(c, n) - n * std::pow(c, n - 1) * (1.0 - c);
            },
            0.0, 1.0);
    }
    const double sigma = scenario.overbid->sigma;
    const double upper = 10.0 * sigma * equilibrium_bid(1.0, n, f);
    std::function<double(double)> cdf;
    if (uniform) {
        const double k = (n - 1.0) / n;
        cdf = [=](double y) { return uniform_overbid_cdf(y / k, sigma); };
    } else {
        // P(eta b(v) <= y) = E_v[erf(y / (b(v) sigma sqrt 2))].
        cdf = [&, sigma](double y) {
            if (y <= 0.0) return 0.0;
            return integrate(
                [&](double v) {
                    const double b = equilibrium_bid(v, n, f);
                    return b > 0.0 ? boost::math::erf(y / (b * sigma * std::sqrt(2.0))) * f.pdf(v) : f.pdf(v);
                },
                0.0, 1.0);
        };
    }
    // E[max] = int_0^inf 1 - H(y)^n dy for a nonnegative maximum.
    boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate([&](double y) { return 1.0 - std::pow(cdf(y), n); }, 0.0, upper, 1e-12);
}

std::pair<double, double> simulated_expected_winning_bid(const AuctionScenario& scenario, int n, std::size_t draws,
                                                         SeededRng& rng) {
    if (draws < 2) throw std::invalid_argument("simulated_expected_winning_bid: need at least two draws");
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        double best = 0.0;
        if (!scenario.overbid) {
            double vmax = 0.0;
            for (int i = 0; i < n; ++i) vmax = std::max(vmax, scenario.values.sample(rng));
            best = equilibrium_bid(vmax, n, scenario.values);
        } else {
            for (int i = 0; i < n; ++i) {
                const double bid = equilibrium_bid(scenario.values.sample(rng), n, scenario.values) *
                                   std::abs(rng.normal(0.0, scenario.overbid->sigma));
                best = std::max(best, bid);
            }
        }
        const double delta = best - mean;
        mean += delta / static_cast<double>(d + 1);
        m2 += delta * (best - mean);
    }
    const double var = m2 / static_cast<double>(draws - 1);
    return {mean, std::sqrt(var / static_cast<double>(draws))};
}

StructuralBenchmark uniform_benchmark() {
    StructuralBenchmark b;
    b.id = "uniform-ipv";
    b.implied_mean = [](const Matrix& x) {
        Vector out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = uniform_benchmark_mean(x(i, 0));
        return out;
    };
    b.simulate = [](const DomainSpec& domain, std::size_t size, SeededRng& rng) {
        if (domain.dims() != 1) throw std::invalid_argument("uniform_benchmark: domain must be one-dimensional");
        const long lo = std::max(2L, static_cast<long>(std::ceil(domain[0].lower)));
        const long hi = static_cast<long>(std::floor(domain[0].upper));
        if (hi < lo) throw std::invalid_argument("uniform_benchmark: no integer bidder count in domain");
        const auto rows = static_cast<Eigen::Index>(size);
        Matrix n(rows, 1);
        Vector b(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const long k = rng.uniform_int(lo, hi);
            double vmax = 0.0;
            for (long j = 0; j < k; ++j) vmax = std::max(vmax, rng.uniform());
            n(i, 0) = static_cast<double>(k);
            b(i) = (k - 1.0) / static_cast<double>(k) * vmax;
        }
        return Dataset(n, b);
    };
    return b;
}

AuctionTruth auction_truth(const AuctionScenario& scenario) {
    scenario.validate();
    AuctionTruth t;
    for (int n = scenario.n_train_lower; n <= scenario.n_train_upper; ++n) {
        t.n_in.push_back(n);
        t.truth_in.push_back(true_expected_winning_bid(scenario, n));
    }
    for (int n = scenario.n_test_lower; n <= scenario.n_test_upper; ++n) {
        t.n_out.push_back(n);
        t.truth_out.push_back(true_expected_winning_bid(scenario, n));
    }
    return t;
}

AuctionTrial auction_trial(const AuctionScenario& scenario, const AuctionSettings& settings, const AuctionTruth& truth,
                           SeededRng& rng) {
    const char* stage = "simulate";
    try {
        SeededRng sim_rng = rng.child(1);
        const Dataset data = simulate_auctions(scenario, sim_rng).as_dataset();
        const Vector n = data.inputs().col(0);
        const Vector y = data.outcome();
        const Vector n_in = Eigen::Map<const Vector>(truth.n_in.data(), static_cast<Eigen::Index>(truth.n_in.size()));
        const Vector n_out = Eigen::Map<const Vector>(truth.n_out.data(), static_cast<Eigen::Index>(truth.n_out.size()));
        const auto to_std = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

        AuctionTrial trial;

        stage = "statistical";
        trial.aic_degree = select_degree_aic(n, y, settings.max_aic_degree);
        const PolyFit stat = fit_polynomial(n, y, trial.aic_degree);
        trial.estimators.push_back("statistical");
        trial.pred_in.push_back(to_std(stat.predict(n_in)));
        trial.pred_out.push_back(to_std(stat.predict(n_out)));

        stage = "structural";
        trial.estimators.push_back("structural");
        std::vector<double> s_in;
        std::vector<double> s_out;
        for (double k : truth.n_in) s_in.push_back(uniform_benchmark_mean(k));
        for (double k : truth.n_out) s_out.push_back(uniform_benchmark_mean(k));
        trial.pred_in.push_back(std::move(s_in));
        trial.pred_out.push_back(std::move(s_out));

        stage = "sre";
        SreProblem problem;
        problem.features = polynomial_features(settings.sre_degree, false);
        problem.stage = SecondStage::Ridge;
        problem.theta_m_domain = DomainSpec({{static_cast<double>(scenario.n_train_lower), static_cast<double>(scenario.n_test_upper)}});
        PenaltySpec penalty;
        penalty.lambda_grid = settings.lambda_grid.empty() ? PenaltySpec::default_grid(data.rows() / 2) : settings.lambda_grid;
        penalty.weights = Vector::Ones(settings.sre_degree);
        if (settings.degree_weights) penalty.weights = Vector::LinSpaced(settings.sre_degree, 1.0, settings.sre_degree);
        CvPlan plan;
        plan.kind = CvKind::Forward;
        plan.K = settings.forward_k;
        plan.fraction = settings.forward_fraction;
        plan.target = DomainSpec({{static_cast<double>(scenario.n_test_lower), static_cast<double>(scenario.n_test_upper)}});
        const BenchmarkFamily family = [](const Dataset&) { return uniform_benchmark(); };
        SeededRng sre_rng = rng.child(2);
        const SREFit sre = sre_sample_split(data, family, problem, penalty, plan, sre_rng);
        trial.lambda_star = sre.lambda_star;
        trial.estimators.push_back("sre");
        trial.pred_in.push_back(to_std(sre.predict(n_in)));
        trial.pred_out.push_back(to_std(sre.predict(n_out)));
        return trial;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage ") + stage + ": " + e.what());
    }
}

}  // namespace structreg
