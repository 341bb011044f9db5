#pragma once

#include <cstddef>
#include <filesystem>

#include "structreg/config.hpp"
#include "structreg/report.hpp"

namespace structreg {

/// Worker count: SRE_THREADS if set and positive, else the hardware concurrency; never more than `trials`.
std::size_t worker_count(std::size_t trials);

/// Dispatches to the experiment; trial r (1-based) draws from stream r of the base seed, shared setup
/// quantities (auction and demand truth) from stream 0. Failures name the trial and stage.
MonteCarloReport run_monte_carlo(const RunConfig& config);

/// run_monte_carlo then emit_outputs into config.output_dir; nothing is left behind on failure.
MonteCarloReport run_and_emit(const RunConfig& config);

}  // namespace structreg
