#include "structreg/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace structreg {

namespace {

class Counted {
public:
    Counted(const Objective& f, std::size_t budget) : f_(f), budget_(budget) {}

    double operator()(const Vector& x) {
        ++count_;
        const double v = f_(x);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "nelder_mead: non-finite objective at theta = [";
            for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
            os << "]";
            throw std::runtime_error(os.str());
        }
        return v;
    }

    bool exhausted() const { return count_ >= budget_; }
    std::size_t count() const { return count_; }

private:
    const Objective& f_;
    std::size_t budget_;
    std::size_t count_ = 0;
};

struct Run {
    Vector x;
    double value;
    bool converged;
};

Run simplex_search(Counted& f, const Vector& start, double start_value, const NelderMeadOptions& opt) {
    const Eigen::Index n = start.size();
    const double dn = static_cast<double>(n);
    // Gao & Han (2012) coefficients; reduce to the classic ones for n = 2.
    const double alpha = 1.0;
    const double gamma = 1.0 + 2.0 / dn;
    const double rho = 0.75 - 1.0 / (2.0 * dn);
    const double sigma = 1.0 - 1.0 / dn;

    std::vector<Vector> pts(static_cast<std::size_t>(n + 1), start);
    std::vector<double> vals(static_cast<std::size_t>(n + 1), start_value);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& p = pts[static_cast<std::size_t>(i + 1)];
        p(i) += opt.initial_step * std::max(std::abs(start(i)), 1.0);
        vals[static_cast<std::size_t>(i + 1)] = f(p);
    }

    std::vector<std::size_t> order(pts.size());
    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];

        double spread = 0.0;
        for (const auto& p : pts) spread = std::max(spread, ((p - pts[best]).array().abs() / (1.0 + pts[best].array().abs())).maxCoeff());
        const double fspread = vals[worst] - vals[best];
        if (spread <= opt.xtol && fspread <= opt.ftol * (1.0 + std::abs(vals[best]))) {
            return {pts[best], vals[best], true};
        }
        if (f.exhausted()) return {pts[best], vals[best], false};

        Vector centroid = Vector::Zero(n);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i != worst) centroid += pts[i];
        }
        centroid /= dn;

        const Vector xr = centroid + alpha * (centroid - pts[worst]);
        const double fr = f(xr);
        if (fr < vals[best]) {
            const Vector xe = centroid + gamma * (xr - centroid);
            const double fe = f(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Vector xc = outside ? Vector(centroid + rho * (xr - centroid)) : Vector(centroid - rho * (centroid - pts[worst]));
        const double fc = f(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + sigma * (pts[i] - pts[best]);
            vals[i] = f(pts[i]);
        }
    }
}

}  // namespace

OptimizeResult nelder_mead(const Objective& objective, const Vector& x0, const NelderMeadOptions& options) {
    if (x0.size() == 0) throw std::invalid_argument("nelder_mead: empty starting point");
    if (!x0.allFinite()) throw std::invalid_argument("nelder_mead: non-finite starting point");
    Counted f(objective, options.max_evaluations);

    Run run = simplex_search(f, x0, f(x0), options);
    NelderMeadOptions again = options;
    for (int r = 0; r < options.restarts && !f.exhausted(); ++r) {
        again.initial_step = std::max(options.initial_step * 1e-2, 1e3 * options.xtol);
        const Run next = simplex_search(f, run.x, run.value, again);
        const bool improved = next.value < run.value;
        const bool moved = ((next.x - run.x).array().abs() / (1.0 + run.x.array().abs())).maxCoeff() > options.xtol;
        if (improved) run = next;
        else run.converged = run.converged && next.converged;
        if (!moved) break;
    }
    return {run.x, run.value, f.count(), run.converged};
}

}  // namespace structreg
