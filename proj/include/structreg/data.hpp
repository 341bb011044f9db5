#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace structreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Observed tuples (inputs, outcome), optionally with instruments and a time index.
/// Immutable after construction; every row count agrees and every entry is finite.
class Dataset {
public:
    Dataset() = default;
    Dataset(Matrix inputs, Vector outcome, std::optional<Matrix> instruments = std::nullopt,
            std::optional<std::vector<long>> time_index = std::nullopt);

    std::size_t rows() const { return static_cast<std::size_t>(outcome_.size()); }
    std::size_t cols() const { return static_cast<std::size_t>(inputs_.cols()); }
    bool empty() const { return rows() == 0; }

    const Matrix& inputs() const { return inputs_; }
    const Vector& outcome() const { return outcome_; }
    const std::optional<Matrix>& instruments() const { return instruments_; }
    const std::optional<std::vector<long>>& time_index() const { return time_index_; }

    /// Rows in the given order (duplicates allowed).
    Dataset subset(std::span<const std::size_t> rows) const;
    /// Rows [first, first + count).
    Dataset slice(std::size_t first, std::size_t count) const;
    /// Same data with the outcome column replaced.
    Dataset with_outcome(Vector outcome) const;

private:
    Matrix inputs_;
    Vector outcome_;
    std::optional<Matrix> instruments_;
    std::optional<std::vector<long>> time_index_;
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Axis-aligned box of closed intervals, one per input dimension.
class DomainSpec {
public:
    DomainSpec() = default;
    explicit DomainSpec(std::vector<Interval> bounds);

    static DomainSpec bounding_box(const Matrix& points);

    std::size_t dims() const { return bounds_.size(); }
    const std::vector<Interval>& bounds() const { return bounds_; }
    const Interval& operator[](std::size_t i) const { return bounds_[i]; }

    bool contains(const Eigen::Ref<const Vector>& point) const;
    /// Euclidean distance from a point to the nearest point of the box (0 inside).
    double distance(const Eigen::Ref<const Vector>& point) const;
    Vector center() const;

private:
    std::vector<Interval> bounds_;
};

/// Column-wise affine standardization of a dataset's inputs plus centering of its outcome.
struct StandardizeTransform {
    Vector mean;
    Vector scale;
    double outcome_mean = 0.0;

    Matrix apply(const Matrix& inputs) const;
    Matrix invert(const Matrix& standardized) const;
    Vector apply_outcome(const Vector& outcome) const;
    Vector invert_outcome(const Vector& centered) const;
};

/// Reproducible random stream identified by (base_seed, stream_index).
/// Instances are not shared across threads; give each worker its own stream.
class SeededRng {
public:
    SeededRng(std::uint64_t base_seed, std::uint64_t stream_index);

    std::uint64_t base_seed() const { return base_seed_; }
    std::uint64_t stream_index() const { return stream_index_; }

    /// Independent stream keyed by a tag, e.g. a per-stage or per-group child.
    SeededRng child(std::uint64_t tag) const;

    double uniform(double lower = 0.0, double upper = 1.0);
    long uniform_int(long lower, long upper);
    double normal(double mean = 0.0, double sd = 1.0);
    double beta(double a, double b);
    long binomial(long trials, double p);

    template <class T>
    void shuffle(std::vector<T>& items) {
        std::shuffle(items.begin(), items.end(), engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t base_seed_;
    std::uint64_t stream_index_;
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Centers every input column and scales it to unit population standard deviation.
/// Zero-variance columns are centered only. The outcome is centered.
std::pair<Dataset, StandardizeTransform> standardize(const Dataset& data);

/// Center-only variant: scales are fixed at 1.
std::pair<Dataset, StandardizeTransform> center(const Dataset& data);

Dataset invert(const Dataset& standardized, const StandardizeTransform& transform);

/// Random assignment of N row indices to K folds whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> partition_indices(std::size_t n, int k, SeededRng& rng);

std::vector<Dataset> partition(const Dataset& data, int k, SeededRng& rng);

double hausdorff_distance(const DomainSpec& a, const DomainSpec& b);
/// Point sets are given one point per row.
double hausdorff_distance(const Matrix& a, const Matrix& b);

struct ForwardSplit {
    Dataset far;   ///< S1: used for training folds
    Dataset near;  ///< S2: always in validation
    std::vector<std::size_t> far_rows;
    std::vector<std::size_t> near_rows;
};

/// Puts the ceil(fraction * N) observations nearest the target box into `near`.
/// Ties in box distance go to the point nearer the box center, then to the lower row index.
ForwardSplit forward_split(const Dataset& data, const DomainSpec& target, double fraction);

}  // namespace structreg
