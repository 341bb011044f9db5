#include "structreg/tuning.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace structreg {

namespace {

std::size_t argmin_first(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] < v[best]) best = i;
    }
    return best;
}

void check_grid(const std::vector<double>& grid, const char* who) {
    if (grid.empty()) throw std::invalid_argument(std::string(who) + ": empty lambda grid");
}

// Runs every (split, lambda) pair and fills the per-lambda mean error.
CvTrace evaluate_splits(const char* who, CvKind kind, const Fitter& fitter, const Scorer& scorer, const Dataset& data,
                        const std::vector<double>& grid, const std::vector<std::vector<std::size_t>>& train_rows,
                        const std::vector<std::vector<std::size_t>>& validation_rows) {
    CvTrace trace;
    trace.kind = kind;
    trace.lambdas = grid;
    trace.mean_error.assign(grid.size(), 0.0);
    const double splits = static_cast<double>(train_rows.size());
    for (std::size_t s = 0; s < train_rows.size(); ++s) {
        const Dataset train = data.subset(train_rows[s]);
        const Dataset validation = data.subset(validation_rows[s]);
        for (std::size_t l = 0; l < grid.size(); ++l) {
            try {
                const Predictor model = fitter(train, grid[l]);
                trace.mean_error[l] += scorer(train, model, validation) / splits;
            } catch (const std::exception& e) {
                throw std::runtime_error(std::string(who) + ": fold " + std::to_string(s) + ", lambda " +
                                         std::to_string(grid[l]) + ": " + e.what());
            }
        }
    }
    trace.best_index = argmin_first(trace.mean_error);
    trace.lambda_star = grid[trace.best_index];
    trace.validation_rows = validation_rows;
    return trace;
}

Matrix with_constant(const Matrix& m) {
    Matrix out(m.rows(), m.cols() + 1);
    out << Vector::Ones(m.rows()), m;
    return out;
}

}  // namespace

void CvPlan::validate() const {
    if ((kind == CvKind::KFold || kind == CvKind::Forward) && K < 2) {
        throw std::invalid_argument("CvPlan: K must be at least 2");
    }
    if (kind == CvKind::Forward && !target) throw std::invalid_argument("CvPlan: forward CV needs a target domain");
    if (kind == CvKind::Forward && fraction != 0.0 && !(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("CvPlan: fraction must lie in (0, 1)");
    }
    if (kind == CvKind::Rolling && horizon < 1) throw std::invalid_argument("CvPlan: horizon must be at least 1");
}

Scorer squared_error_scorer() {
    return [](const Dataset&, const Predictor& model, const Dataset& validation) {
        return (validation.outcome() - model(validation.inputs())).squaredNorm() /
               static_cast<double>(validation.rows());
    };
}

Scorer gmm_scorer() {
    return [](const Dataset& train, const Predictor& model, const Dataset& validation) {
        if (!train.instruments() || !validation.instruments()) throw std::invalid_argument("gmm_scorer: instruments required");
        const Matrix zt = with_constant(*train.instruments());
        Eigen::LDLT<Matrix> zz(zt.transpose() * zt / static_cast<double>(zt.rows()));
        if (zz.info() != Eigen::Success) throw std::runtime_error("gmm_scorer: singular instrument Gram matrix");
        const Matrix zv = with_constant(*validation.instruments());
        const Vector e = validation.outcome() - model(validation.inputs());
        const Vector m = zv.transpose() * e / static_cast<double>(zv.rows());
        return m.dot(zz.solve(m));
    };
}

CvTrace kfold_cv(const Fitter& fitter, const Scorer& scorer, const Dataset& data, const std::vector<double>& grid,
                 int k, SeededRng& rng) {
    check_grid(grid, "kfold_cv");
    if (k < 2 || static_cast<std::size_t>(k) > data.rows()) throw std::invalid_argument("kfold_cv: need 2 <= K <= N");
    const std::uint64_t seed = rng.base_seed();
    const std::uint64_t stream = rng.stream_index();
    const auto folds = partition_indices(data.rows(), k, rng);
    std::vector<std::vector<std::size_t>> train(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g != f) train[f].insert(train[f].end(), folds[g].begin(), folds[g].end());
        }
        std::sort(train[f].begin(), train[f].end());
    }
    CvTrace trace = evaluate_splits("kfold_cv", CvKind::KFold, fitter, scorer, data, grid, train, folds);
    trace.seed = seed;
    trace.stream = stream;
    return trace;
}

CvTrace forward_cv(const Fitter& fitter, const Scorer& scorer, const Dataset& data, const std::vector<double>& grid,
                   int k, const DomainSpec& target, double fraction, SeededRng& rng) {
    check_grid(grid, "forward_cv");
    if (k < 2) throw std::invalid_argument("forward_cv: K must be at least 2");
    if (target.dims() == 0) throw std::invalid_argument("forward_cv: empty S2 (degenerate target)");
    if (fraction == 0.0) fraction = 1.0 / (k + 1);
    const ForwardSplit split = forward_split(data, target, fraction);
    if (split.near_rows.empty()) throw std::invalid_argument("forward_cv: empty S2");
    if (split.far_rows.size() < static_cast<std::size_t>(k)) throw std::invalid_argument("forward_cv: S1 smaller than K");

    const std::uint64_t seed = rng.base_seed();
    const std::uint64_t stream = rng.stream_index();
    const auto folds = partition_indices(split.far_rows.size(), k, rng);
    std::vector<std::vector<std::size_t>> train(folds.size());
    std::vector<std::vector<std::size_t>> validation(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (std::size_t g = 0; g < folds.size(); ++g) {
            auto& dst = g == f ? validation[f] : train[f];
            for (std::size_t i : folds[g]) dst.push_back(split.far_rows[i]);
        }
        validation[f].insert(validation[f].end(), split.near_rows.begin(), split.near_rows.end());
        std::sort(train[f].begin(), train[f].end());
        std::sort(validation[f].begin(), validation[f].end());
    }
    CvTrace trace = evaluate_splits("forward_cv", CvKind::Forward, fitter, scorer, data, grid, train, validation);
    trace.seed = seed;
    trace.stream = stream;
    return trace;
}

CvTrace rolling_cv(const Fitter& fitter, const Scorer& scorer, const Dataset& data, const std::vector<double>& grid,
                   std::size_t window_length, std::size_t horizon) {
    check_grid(grid, "rolling_cv");
    if (!data.time_index()) throw std::invalid_argument("rolling_cv: data has no time index");
    if (window_length < 1 || horizon < 1) throw std::invalid_argument("rolling_cv: window and horizon must be positive");
    const std::size_t t_total = data.rows();
    if (t_total < window_length + horizon) throw std::invalid_argument("rolling_cv: insufficient series length");

    const auto& time = *data.time_index();
    std::vector<std::size_t> order(t_total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });

    std::vector<std::vector<std::size_t>> train;
    std::vector<std::vector<std::size_t>> validation;
    for (std::size_t t0 = 0; t0 + window_length + horizon <= t_total; ++t0) {
        train.emplace_back(order.begin() + static_cast<long>(t0), order.begin() + static_cast<long>(t0 + window_length));
        validation.emplace_back(order.begin() + static_cast<long>(t0 + window_length),
                                order.begin() + static_cast<long>(t0 + window_length + horizon));
    }
    return evaluate_splits("rolling_cv", CvKind::Rolling, fitter, scorer, data, grid, train, validation);
}

CvTrace run_cv(const CvPlan& plan, const Fitter& fitter, const Scorer& scorer, const Dataset& data,
               const std::vector<double>& grid, SeededRng& rng) {
    plan.validate();
    switch (plan.kind) {
        case CvKind::KFold:
            return kfold_cv(fitter, scorer, data, grid, plan.K, rng);
        case CvKind::Forward:
            return forward_cv(fitter, scorer, data, grid, plan.K, *plan.target, plan.fraction, rng);
        case CvKind::Rolling: {
            const std::size_t window = plan.window_length ? plan.window_length : std::max<std::size_t>(data.rows() / 5, 1);
            return rolling_cv(fitter, scorer, data, grid, window, plan.horizon);
        }
    }
    throw std::invalid_argument("run_cv: unknown plan");
}

SREFit structural_regularization(const StructuralBenchmark& benchmark, const Dataset& second, const SreProblem& problem,
                                 const PenaltySpec& penalty, const CvPlan& plan, SeededRng& rng,
                                 const std::optional<FeatureMap>& fixed_features) {
    if (second.rows() < 2) throw std::invalid_argument("structural_regularization: second sample too small");
    if (!fixed_features && !problem.features) throw std::invalid_argument("structural_regularization: no feature map");
    const FeatureMap fm = fixed_features ? *fixed_features : problem.features(second.inputs());
    penalty.validate(fm.dim);

    const DomainSpec domain = problem.theta_m_domain ? *problem.theta_m_domain : DomainSpec::bounding_box(second.inputs());
    SeededRng theta_rng = rng.child(1);
    LinearFit theta_m;
    try {
        theta_m = fit_theta_m(fm, benchmark, domain, problem.synthetic_size, theta_rng, problem.theta_m_source);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("theta_m stage: ") + e.what());
    }

    const SecondStage stage = problem.stage;
    const Vector weights = penalty.weights;
    const Fitter fitter = [&fm, &theta_m, stage, weights](const Dataset& train, double lambda) -> Predictor {
        SREFit f = fit_second_stage(stage, fm, train, theta_m, weights, lambda);
        return [f = std::move(f)](const Matrix& x) { return f.predict(x); };
    };
    const Scorer scorer = problem.scorer ? problem.scorer
                                         : (stage == SecondStage::Gmm ? gmm_scorer() : squared_error_scorer());
    SeededRng cv_rng = rng.child(2);
    const CvTrace trace = run_cv(plan, fitter, scorer, second, penalty.lambda_grid, cv_rng);

    SREFit fit = fit_second_stage(stage, fm, second, theta_m, weights, trace.lambda_star);
    fit.cv = plan.kind;
    fit.cv_lambdas = trace.lambdas;
    fit.cv_errors = trace.mean_error;
    return fit;
}

namespace {

StructuralBenchmark estimate_structural(const BenchmarkFamily& family, const Dataset& first) {
    try {
        return family(first);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("structural stage: ") + e.what());
    }
}

}  // namespace

SREFit sre_sample_split(const Dataset& data, const BenchmarkFamily& family, const SreProblem& problem,
                        const PenaltySpec& penalty, const CvPlan& plan, SeededRng& rng) {
    if (data.rows() < 4) throw std::invalid_argument("sre_sample_split: need at least four observations");
    SeededRng split_rng = rng.child(10);
    const auto halves = partition(data, 2, split_rng);
    const StructuralBenchmark benchmark = estimate_structural(family, halves[0]);
    SeededRng stage_rng = rng.child(11);
    SREFit fit = structural_regularization(benchmark, halves[1], problem, penalty, plan, stage_rng);
    fit.method = SreMethod::SampleSplit;
    return fit;
}

SREFit sre_cross_fit(const Dataset& data, const BenchmarkFamily& family, const SreProblem& problem,
                     const PenaltySpec& penalty, const CvPlan& plan, SeededRng& rng) {
    if (data.rows() < 4) throw std::invalid_argument("sre_cross_fit: need at least four observations");
    if (!problem.features) throw std::invalid_argument("sre_cross_fit: no feature map");
    SeededRng split_rng = rng.child(10);
    const auto halves = partition(data, 2, split_rng);
    const FeatureMap fm = problem.features(data.inputs());

    SeededRng rng_a = rng.child(11);
    SeededRng rng_b = rng.child(12);
    SREFit a = structural_regularization(estimate_structural(family, halves[0]), halves[1], problem, penalty, plan, rng_a, fm);
    const SREFit b = structural_regularization(estimate_structural(family, halves[1]), halves[0], problem, penalty, plan, rng_b, fm);

    const auto average = [](const LinearFit& x, const LinearFit& y) {
        LinearFit out;
        out.intercept = 0.5 * (x.intercept + y.intercept);
        out.coefficients = 0.5 * (x.coefficients + y.coefficients);
        return out;
    };
    StandardizeTransform t = feature_transform(fm, data.inputs());
    t.outcome_mean = data.outcome().mean();
    a.theta = to_standardized(average(a.raw(), b.raw()), t);
    a.theta_m = to_standardized(average(a.raw_theta_m(), b.raw_theta_m()), t);
    a.transform = t;
    a.method = SreMethod::CrossFit;
    return a;
}

}  // namespace structreg
