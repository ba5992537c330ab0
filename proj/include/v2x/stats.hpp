#pragma once

#include "v2x/engine.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace v2x {

struct PlrEstimate {
    double plr = 0.0;
    double halfwidth = 0.0;
    std::size_t runs = 0;
};

/// Mean and Student-t 95% half-width. Needs at least two samples.
PlrEstimate mean_with_halfwidth(std::span<const double> samples);

/// Aggregates per-run PLRs; runs without data are skipped. Throws StatisticsError when
/// fewer than two runs carry data.
PlrEstimate measure_plr(std::span<const RunResult> runs);

/// Runs every seed, spreading the work over up to `jobs` threads. Results follow seed order.
std::vector<RunResult> run_seeds(const ScenarioConfig& cfg, std::span<const std::uint64_t> seeds,
                                 unsigned jobs = 1);

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

struct CapacityProbe {
    double load_pps = 0.0;
    PlrEstimate estimate;
};

struct CapacitySearchOptions {
    double load_lo = 0.0;
    double load_hi = 0.0;
    /// Bisection stops once the bracket is narrower than this (packets/s/UE).
    double tolerance = 0.01;
    /// When positive, bisection is geometric and also stops once hi <= lo * (1 + this).
    double relative_tolerance = 0.0;
    /// Times the bracket may be widened (load_lo halved or load_hi doubled) when an end
    /// does not straddle the target.
    int max_expansions = 0;
    std::vector<std::uint64_t> seeds;
    unsigned jobs = 1;
};

struct CapacityResult {
    double capacity = 0.0;
    /// PLR at load_hi already met the target; the true capacity may be higher.
    bool saturated = false;
    /// Some higher probe measured a lower PLR than a lower probe beyond both CIs.
    bool monotonicity_violation = false;
    std::vector<CapacityProbe> probes;
};

/// Largest per-UE load with PLR <= target, by bisection on a fixed seed set. Throws
/// BracketError when PLR(load_lo) exceeds the target after any allowed widening.
CapacityResult capacity_search(const ScenarioConfig& scenario, double plr_target,
                               const CapacitySearchOptions& opts);

/// Same contract with a caller-supplied PLR measurement, so the bisection can be
/// checked against cheap synthetic curves.
CapacityResult capacity_search(const std::function<PlrEstimate(double)>& measure,
                               double plr_target, double load_lo, double load_hi,
                               double tolerance, double relative_tolerance = 0.0,
                               int max_expansions = 0);

} // namespace v2x
