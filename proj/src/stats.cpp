#include "v2x/stats.hpp"

#include "v2x/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace v2x {

PlrEstimate mean_with_halfwidth(std::span<const double> samples)
{
    const std::size_t n = samples.size();
    if (n < 2) {
        throw StatisticsError("need at least two samples for a confidence interval");
    }
    double mean = 0.0;
    for (double x : samples) {
        mean += x;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const boost::math::students_t dist(static_cast<double>(n - 1));
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    return PlrEstimate{mean, t * sd / std::sqrt(static_cast<double>(n)), n};
}

PlrEstimate measure_plr(std::span<const RunResult> runs)
{
    std::vector<double> plrs;
    for (const auto& r : runs) {
        if (r.has_data) {
            plrs.push_back(r.plr);
        }
    }
    if (plrs.size() < 2) {
        throw StatisticsError("measure_plr: need at least two runs with data, got " +
                              std::to_string(plrs.size()));
    }
    return mean_with_halfwidth(plrs);
}

std::vector<RunResult> run_seeds(const ScenarioConfig& cfg, std::span<const std::uint64_t> seeds,
                                 unsigned jobs)
{
    cfg.validate();
    std::vector<RunResult> results(seeds.size());
    const unsigned workers =
        std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(seeds.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            results[i] = run_simulation(cfg, seeds[i]);
        }
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < seeds.size(); i = next++) {
                try {
                    results[i] = run_simulation(cfg, seeds[i]);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
    return results;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count)
{
    std::vector<std::uint64_t> seeds(count);
    for (std::size_t i = 0; i < count; ++i) {
        seeds[i] = first + i;
    }
    return seeds;
}

CapacityResult capacity_search(const std::function<PlrEstimate(double)>& measure,
                               double plr_target, double load_lo, double load_hi,
                               double tolerance, double relative_tolerance, int max_expansions)
{
    if (load_lo > load_hi) {
        throw BracketError("capacity_search: load_lo exceeds load_hi", 0.0, 0.0);
    }
    if (!(tolerance > 0.0) && !(relative_tolerance > 0.0)) {
        throw UsageError("capacity_search: a positive tolerance is required");
    }
    const bool geometric = relative_tolerance > 0.0;
    if (geometric && !(load_lo > 0.0)) {
        throw UsageError("capacity_search: relative tolerance needs load_lo > 0");
    }
    CapacityResult result;
    if (load_lo == load_hi) {
        result.capacity = load_lo;
        return result;
    }
    auto probe = [&](double load) {
        const auto est = measure(load);
        result.probes.push_back(CapacityProbe{load, est});
        return est;
    };

    double lo = load_lo;
    double hi = load_hi;
    auto lo_est = probe(lo);
    for (int i = 0; i < max_expansions && lo_est.plr > plr_target && lo > 0.0; ++i) {
        hi = lo;
        lo *= 0.5;
        lo_est = probe(lo);
    }
    if (lo_est.plr > plr_target) {
        // Report the PLR at the upper end too, to show how far off the bracket is.
        const double plr_hi = result.probes.size() > 1
                                  ? result.probes[result.probes.size() - 2].estimate.plr
                                  : probe(hi).plr;
        throw BracketError("capacity_search: PLR at load_lo=" + std::to_string(lo) + " is " +
                               std::to_string(lo_est.plr) + " > target " +
                               std::to_string(plr_target),
                           lo_est.plr, plr_hi);
    }
    bool straddles = result.probes.size() > 1;
    for (int i = 0; !straddles; ++i) {
        if (probe(hi).plr > plr_target) {
            straddles = true;
        } else if (i >= max_expansions) {
            break;
        } else {
            lo = hi;
            hi *= 2.0;
        }
    }
    if (!straddles) {
        result.capacity = hi;
        result.saturated = true;
    } else {
        auto converged = [&] {
            return (tolerance > 0.0 && hi - lo < tolerance) ||
                   (geometric && hi <= lo * (1.0 + relative_tolerance));
        };
        auto midpoint = [&] { return geometric ? std::sqrt(lo * hi) : 0.5 * (lo + hi); };
        while (!converged()) {
            const double mid = midpoint();
            if (probe(mid).plr <= plr_target) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        result.capacity = midpoint();
    }

    auto sorted = result.probes;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.load_pps < b.load_pps; });
    for (std::size_t i = 0; i < sorted.size() && !result.monotonicity_violation; ++i) {
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            const auto& a = sorted[i].estimate;
            const auto& b = sorted[j].estimate;
            if (a.plr > b.plr + a.halfwidth + b.halfwidth) {
                result.monotonicity_violation = true;
                break;
            }
        }
    }
    return result;
}

CapacityResult capacity_search(const ScenarioConfig& scenario, double plr_target,
                               const CapacitySearchOptions& opts)
{
    if (opts.seeds.size() < 2) {
        throw StatisticsError("capacity_search: need at least two seeds");
    }
    auto measure = [&](double load) {
        if (load <= 0.0) {
            // No traffic, no losses.
            return PlrEstimate{0.0, 0.0, opts.seeds.size()};
        }
        ScenarioConfig cfg = scenario;
        cfg.traffic.per_ue_rate_pps = load;
        const auto runs = run_seeds(cfg, opts.seeds, opts.jobs);
        return measure_plr(runs);
    };
    return capacity_search(measure, plr_target, opts.load_lo, opts.load_hi, opts.tolerance,
                           opts.relative_tolerance, opts.max_expansions);
}

} // namespace v2x
