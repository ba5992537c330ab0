#pragma once

#include "v2x/channel.hpp"
#include "v2x/grid.hpp"
#include "v2x/phy.hpp"
#include "v2x/selection.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace v2x {

/// A packet injected at a fixed time instead of (or in addition to) Poisson arrivals.
struct ScriptedArrival {
    UeId ue = 0;
    double time_s = 0.0;
};

/// How a UE handles a packet that arrives while an earlier one is still being sent.
/// Concurrent starts selection at once and keeps clear of the UE's own busy slots; Fifo
/// waits for the earlier packet to finish, with the window still ending at the deadline.
enum class ServicePolicy { Concurrent, Fifo };

std::string_view to_string(ServicePolicy p);
std::optional<ServicePolicy> parse_service_policy(std::string_view s);

struct TrafficConfig {
    /// Poisson arrival rate per UE.
    double per_ue_rate_pps = 1.0;
    double warmup_s = 1.0;
    double duration_s = 20.0;
    int packet_size_bytes = 300;
    double delay_budget_s = 10e-3;
    ServicePolicy service = ServicePolicy::Concurrent;
    std::vector<ScriptedArrival> scripted;

    void validate() const;
};

struct TopologyConfig {
    std::size_t num_ues = 200;
    double mean_gap_m = 10.0;
    bool wraparound = false;
    /// When set, positions come from this table rather than being drawn per seed.
    std::optional<Topology> fixed;
};

/// Everything needed to reproduce one simulation run apart from the seed.
struct ScenarioConfig {
    GridConfig grid;
    TopologyConfig topology;
    PropagationConfig radio;
    double relevance_radius_m = 200.0;
    PhyConfig phy;
    SelectionConfig selection;
    TrafficConfig traffic;

    /// Throws ConfigError on the first violated invariant.
    void validate() const;
};

struct RunResult {
    std::uint64_t seed = 0;
    /// Network PLR: mean of per-UE PLR over UEs that sourced at least one measured packet.
    double plr = 0.0;
    bool has_data = false;
    /// Student-t 95% half-width of the per-UE PLR values.
    double plr_confidence_halfwidth = 0.0;
    double mean_first_attempt_delay = 0.0;
    std::uint64_t packets = 0;
    std::uint64_t scheduling_failures = 0;
    std::uint64_t receiver_observations = 0;
    std::uint64_t lost_observations = 0;
    /// Offset of the first attempt from the window start, in slots.
    std::vector<std::uint64_t> first_attempt_histogram;
    std::uint64_t invariant_violations = 0;
    std::string first_violation;
};

/// Per-packet delivery bookkeeping reduced to per-UE and network PLR.
class MetricsAccumulator {
public:
    explicit MetricsAccumulator(std::size_t num_ues);

    void record_packet(UeId source, std::size_t in_range, std::size_t delivered);
    void record_first_attempt(Slot offset);
    void record_scheduling_failure() { ++scheduling_failures_; }

    /// Returns nullopt for UEs with no measured packet or no receivers in range.
    std::optional<double> ue_plr(UeId ue) const;
    void fill(RunResult& result) const;

private:
    std::vector<std::uint64_t> observed_;
    std::vector<std::uint64_t> lost_;
    std::vector<std::uint64_t> packets_;
    std::vector<std::uint64_t> first_attempt_histogram_;
    std::uint64_t scheduling_failures_ = 0;
};

/// Optional callbacks and trace sinks for one run.
struct RunHooks {
    using SlotObserver = std::function<void(Slot, std::span<const SlotTransmission>,
                                            std::span<const SlotReceptionReport>)>;
    SlotObserver on_slot;
    /// Lines `slot receiver source packet outcome pscch_sinr_db pssch_sinr_db`.
    std::ostream* reception_trace = nullptr;
    /// Lines `slot ue packet algorithm blocks escalations`.
    std::ostream* selection_trace = nullptr;
};

/// Runs the slot loop for `cfg` under `seed`. Throws ConfigError before the loop on an
/// infeasible configuration. Bit-reproducible from (cfg, seed).
RunResult run_simulation(const ScenarioConfig& cfg, std::uint64_t seed, const RunHooks& hooks = {});

/// Topology used by `run_simulation` for this seed.
Topology scenario_topology(const ScenarioConfig& cfg, std::uint64_t seed);

/// Mean offset of the first of K uniformly drawn distinct slots from the window start:
/// (T2 - T1 - K + 1) / (K + 1). Throws DomainError when K does not fit the window.
double mean_first_attempt_delay_formula(int k, int t1, int t2);

} // namespace v2x
