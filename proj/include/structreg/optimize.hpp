#pragma once

#include <cstddef>
#include <functional>

#include "structreg/data.hpp"

namespace structreg {

using Objective = std::function<double(const Vector&)>;

struct NelderMeadOptions {
    /// Edge length of the starting simplex along each axis, relative to max(|x_i|, 1).
    double initial_step = 0.1;
    /// Stop when every vertex lies within xtol * (1 + |x_best|) of the best vertex, per coordinate.
    double xtol = 1e-9;
    /// Also require the objective spread across the simplex to fall below ftol * (1 + |f_best|).
    double ftol = 1e-15;
    std::size_t max_evaluations = 100000;
    /// Fresh simplices built around the incumbent after convergence; stops early once a restart does not improve.
    int restarts = 3;
};

struct OptimizeResult {
    Vector x;
    double value = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Derivative-free simplex search with dimension-adaptive coefficients. Deterministic.
/// Throws std::runtime_error naming the offending point if the objective is non-finite.
OptimizeResult nelder_mead(const Objective& f, const Vector& x0, const NelderMeadOptions& options = {});

}  // namespace structreg
