#include "structreg/data.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>

namespace structreg {

namespace {

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string("Dataset: non-finite entry in ") + what);
    }
}

double interval_distance(double x, const Interval& iv) {
    if (x < iv.lower) return iv.lower - x;
    if (x > iv.upper) return x - iv.upper;
    return 0.0;
}

double directed_box(const DomainSpec& a, const DomainSpec& b) {
    // dist(x, b)^2 separates over coordinates, so the sup over the box a is
    // attained coordinate-wise at an endpoint.
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dims(); ++i) {
        const double d = std::max(interval_distance(a[i].lower, b[i]), interval_distance(a[i].upper, b[i]));
        sum += d * d;
    }
    return std::sqrt(sum);
}

double directed_points(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            best = std::min(best, (a.row(i) - b.row(j)).squaredNorm());
        }
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

std::pair<Dataset, StandardizeTransform> standardize_impl(const Dataset& data, bool scale_columns) {
    if (data.empty()) throw std::invalid_argument("standardize: empty dataset");
    if (data.rows() < 2) throw std::invalid_argument("standardize: need at least two rows");

    const Matrix& x = data.inputs();
    const double n = static_cast<double>(data.rows());
    StandardizeTransform t;
    t.mean = x.colwise().mean().transpose();
    t.scale = Vector::Ones(x.cols());
    if (scale_columns) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double sd = std::sqrt((x.col(j).array() - t.mean(j)).square().sum() / n);
            if (sd > 1e-12 * (1.0 + std::abs(t.mean(j)))) t.scale(j) = sd;
        }
    }
    t.outcome_mean = data.outcome().mean();
    Dataset out(t.apply(x), t.apply_outcome(data.outcome()), data.instruments(), data.time_index());
    return {std::move(out), std::move(t)};
}

}  // namespace

Dataset::Dataset(Matrix inputs, Vector outcome, std::optional<Matrix> instruments,
                 std::optional<std::vector<long>> time_index)
    : inputs_(std::move(inputs)),
      outcome_(std::move(outcome)),
      instruments_(std::move(instruments)),
      time_index_(std::move(time_index)) {
    const auto n = outcome_.size();
    if (inputs_.rows() != n) throw std::invalid_argument("Dataset: inputs and outcome row counts differ");
    if (instruments_ && instruments_->rows() != n) {
        throw std::invalid_argument("Dataset: instruments and outcome row counts differ");
    }
    if (time_index_ && static_cast<Eigen::Index>(time_index_->size()) != n) {
        throw std::invalid_argument("Dataset: time index and outcome lengths differ");
    }
    require_finite(inputs_, "inputs");
    require_finite(outcome_, "outcome");
    if (instruments_) require_finite(*instruments_, "instruments");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    const auto m = static_cast<Eigen::Index>(rows.size());
    Matrix x(m, inputs_.cols());
    Vector y(m);
    std::optional<Matrix> z;
    if (instruments_) z = Matrix(m, instruments_->cols());
    std::optional<std::vector<long>> ti;
    if (time_index_) ti = std::vector<long>(rows.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto r = rows[static_cast<std::size_t>(i)];
        if (r >= this->rows()) throw std::out_of_range("Dataset::subset: row index out of range");
        const auto ri = static_cast<Eigen::Index>(r);
        x.row(i) = inputs_.row(ri);
        y(i) = outcome_(ri);
        if (z) z->row(i) = instruments_->row(ri);
        if (ti) (*ti)[static_cast<std::size_t>(i)] = (*time_index_)[r];
    }
    return Dataset(std::move(x), std::move(y), std::move(z), std::move(ti));
}

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), first);
    return subset(idx);
}

Dataset Dataset::with_outcome(Vector outcome) const {
    return Dataset(inputs_, std::move(outcome), instruments_, time_index_);
}

DomainSpec::DomainSpec(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
    for (const auto& iv : bounds_) {
        if (!(iv.lower <= iv.upper)) throw std::invalid_argument("DomainSpec: lower bound exceeds upper bound");
    }
}

DomainSpec DomainSpec::bounding_box(const Matrix& points) {
    if (points.rows() == 0) throw std::invalid_argument("DomainSpec::bounding_box: empty point set");
    std::vector<Interval> b(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        b[static_cast<std::size_t>(j)] = {points.col(j).minCoeff(), points.col(j).maxCoeff()};
    }
    return DomainSpec(std::move(b));
}

bool DomainSpec::contains(const Eigen::Ref<const Vector>& point) const { return distance(point) == 0.0; }

double DomainSpec::distance(const Eigen::Ref<const Vector>& point) const {
    if (static_cast<std::size_t>(point.size()) != dims()) {
        throw std::invalid_argument("DomainSpec::distance: dimension mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < dims(); ++i) {
        const double d = interval_distance(point(static_cast<Eigen::Index>(i)), bounds_[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

Vector DomainSpec::center() const {
    Vector c(static_cast<Eigen::Index>(dims()));
    for (std::size_t i = 0; i < dims(); ++i) c(static_cast<Eigen::Index>(i)) = 0.5 * (bounds_[i].lower + bounds_[i].upper);
    return c;
}

Matrix StandardizeTransform::apply(const Matrix& inputs) const {
    return (inputs.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix StandardizeTransform::invert(const Matrix& standardized) const {
    Matrix out = standardized.array().rowwise() * scale.transpose().array();
    return out.rowwise() + mean.transpose();
}

Vector StandardizeTransform::apply_outcome(const Vector& outcome) const {
    return outcome.array() - outcome_mean;
}

Vector StandardizeTransform::invert_outcome(const Vector& centered) const {
    return centered.array() + outcome_mean;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over a combined word
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t base_seed, std::uint64_t stream_index)
    : base_seed_(base_seed), stream_index_(stream_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                      static_cast<std::uint32_t>(stream_index), static_cast<std::uint32_t>(stream_index >> 32)};
    engine_.seed(seq);
}

SeededRng SeededRng::child(std::uint64_t tag) const {
    return SeededRng(mix_seed(base_seed_, tag), stream_index_);
}

double SeededRng::uniform(double lower, double upper) {
    return std::uniform_real_distribution<double>(lower, upper)(engine_);
}

long SeededRng::uniform_int(long lower, long upper) {
    return std::uniform_int_distribution<long>(lower, upper)(engine_);
}

double SeededRng::normal(double mean, double sd) {
    return std::normal_distribution<double>(mean, sd)(engine_);
}

double SeededRng::beta(double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
    const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
    return x / (x + y);
}

long SeededRng::binomial(long trials, double p) {
    if (trials <= 0) return 0;
    if (p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    return std::binomial_distribution<long>(trials, p)(engine_);
}

std::pair<Dataset, StandardizeTransform> standardize(const Dataset& data) { return standardize_impl(data, true); }

std::pair<Dataset, StandardizeTransform> center(const Dataset& data) { return standardize_impl(data, false); }

Dataset invert(const Dataset& standardized, const StandardizeTransform& transform) {
    return Dataset(transform.invert(standardized.inputs()), transform.invert_outcome(standardized.outcome()),
                   standardized.instruments(), standardized.time_index());
}

std::vector<std::vector<std::size_t>> partition_indices(std::size_t n, int k, SeededRng& rng) {
    if (k < 2) throw std::invalid_argument("partition: K must be at least 2");
    if (static_cast<std::size_t>(k) > n) {
        throw std::invalid_argument("partition: K=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) folds[i % static_cast<std::size_t>(k)].push_back(order[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::vector<Dataset> partition(const Dataset& data, int k, SeededRng& rng) {
    std::vector<Dataset> out;
    for (const auto& fold : partition_indices(data.rows(), k, rng)) out.push_back(data.subset(fold));
    return out;
}

double hausdorff_distance(const DomainSpec& a, const DomainSpec& b) {
    if (a.dims() != b.dims()) throw std::invalid_argument("hausdorff_distance: dimension mismatch");
    if (a.dims() == 0) throw std::invalid_argument("hausdorff_distance: empty domain");
    return std::max(directed_box(a, b), directed_box(b, a));
}

double hausdorff_distance(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("hausdorff_distance: dimension mismatch");
    if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("hausdorff_distance: empty point set");
    return std::max(directed_points(a, b), directed_points(b, a));
}

ForwardSplit forward_split(const Dataset& data, const DomainSpec& target, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("forward_split: fraction must lie in (0,1)");
    if (data.empty()) throw std::invalid_argument("forward_split: empty dataset");
    if (target.dims() != data.cols()) throw std::invalid_argument("forward_split: target dimension mismatch");

    const std::size_t n = data.rows();
    const Vector c = target.center();
    std::vector<std::tuple<double, double, std::size_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector x = data.inputs().row(static_cast<Eigen::Index>(i)).transpose();
        keyed[i] = {target.distance(x), (x - c).norm(), i};
    }
    std::sort(keyed.begin(), keyed.end());

    const auto n_near = std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12)));
    ForwardSplit out;
    for (std::size_t i = 0; i < n; ++i) {
        (i < n_near ? out.near_rows : out.far_rows).push_back(std::get<2>(keyed[i]));
    }
    std::sort(out.near_rows.begin(), out.near_rows.end());
    std::sort(out.far_rows.begin(), out.far_rows.end());
    out.near = data.subset(out.near_rows);
    out.far = data.subset(out.far_rows);
    return out;
}

}  // namespace structreg
