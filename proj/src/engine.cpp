#include "v2x/engine.hpp"

#include "v2x/errors.hpp"
#include "v2x/stats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <queue>

namespace v2x {

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();
constexpr Slot kNoSlot = std::numeric_limits<Slot>::max();

// Stream tags keep traffic and selection randomness independent of each other, so that
// changing the algorithm does not perturb the arrival process of a seed.
constexpr std::uint32_t kTrafficStream = 1;
constexpr std::uint32_t kSelectionStream = 2;

Rng make_stream(std::uint64_t seed, std::uint32_t stream, UeId ue)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      stream, static_cast<std::uint32_t>(ue)};
    return Rng(seq);
}

struct ActivePacket {
    Packet packet;
    TransmissionSchedule schedule;
    std::size_t next_attempt = 0;
    std::vector<char> delivered;
    bool measured = false;
};

struct UeState {
    Rng traffic_rng;
    Rng selection_rng;
    double next_arrival_s = kNever;
    std::deque<Packet> queue;
    /// Packets in service, at most one under the Fifo policy.
    std::vector<ActivePacket> active;
    SensingDatabase db;
    std::deque<double> scripted;
};

class Simulator {
public:
    Simulator(const ScenarioConfig& cfg, std::uint64_t seed, const RunHooks& hooks)
        : cfg_(cfg),
          seed_(seed),
          hooks_(hooks),
          channel_(scenario_topology(cfg, seed), cfg.radio, cfg.relevance_radius_m),
          metrics_(channel_.num_ues()),
          receiver_(channel_, cfg.phy, cfg.grid)
    {
        const auto n = channel_.num_ues();
        ues_.reserve(n);
        for (std::size_t u = 0; u < n; ++u) {
            const auto id = static_cast<UeId>(u);
            ues_.push_back(UeState{make_stream(seed, kTrafficStream, id),
                                   make_stream(seed, kSelectionStream, id), kNever, {}, {}, {}, {}});
        }
        std::vector<ScriptedArrival> scripted = cfg.traffic.scripted;
        std::stable_sort(scripted.begin(), scripted.end(),
                         [](const auto& a, const auto& b) { return a.time_s < b.time_s; });
        for (const auto& a : scripted) {
            if (a.ue >= n) {
                throw ConfigError("scripted arrival for unknown UE " + std::to_string(a.ue));
            }
            ues_[a.ue].scripted.push_back(a.time_s);
        }
        for (auto& ue : ues_) {
            draw_next_arrival(ue, 0.0);
        }

        reports_.resize(n);
        wake_.assign(n, kNoSlot);
        full_reports_ = static_cast<bool>(hooks.on_slot) || hooks.reception_trace != nullptr;
    }

    RunResult run()
    {
        for (std::size_t u = 0; u < ues_.size(); ++u) {
            schedule_wake(static_cast<UeId>(u), 0);
        }
        while (!wakeups_.empty()) {
            const Slot slot = wakeups_.top().first;
            woken_.clear();
            while (!wakeups_.empty() && wakeups_.top().first == slot) {
                const UeId u = wakeups_.top().second;
                wakeups_.pop();
                if (wake_[u] == slot && (woken_.empty() || woken_.back() != u)) {
                    woken_.push_back(u);
                }
            }
            if (woken_.empty()) {
                continue;
            }
            std::sort(woken_.begin(), woken_.end());
            woken_.erase(std::unique(woken_.begin(), woken_.end()), woken_.end());
            step(slot);
            for (UeId u : woken_) {
                schedule_wake(u, slot + 1);
            }
        }
        RunResult result;
        result.seed = seed_;
        metrics_.fill(result);
        result.invariant_violations = violations_;
        result.first_violation = first_violation_;
        return result;
    }

private:
    const GridConfig& grid() const { return cfg_.grid; }

    double slot_start(Slot s) const { return static_cast<double>(s) * grid().slot_duration_s; }

    void draw_next_arrival(UeState& ue, double after_s)
    {
        double poisson = kNever;
        if (cfg_.traffic.per_ue_rate_pps > 0.0) {
            std::exponential_distribution<double> gap(cfg_.traffic.per_ue_rate_pps);
            poisson = after_s + gap(ue.traffic_rng);
        }
        ue.next_arrival_s = poisson;
    }

    double next_arrival(const UeState& ue) const
    {
        const double scripted = ue.scripted.empty() ? kNever : ue.scripted.front();
        const double t = std::min(ue.next_arrival_s, scripted);
        return t < cfg_.traffic.duration_s ? t : kNever;
    }

    /// Earliest slot >= `from` in which UE `u` has something to do.
    void schedule_wake(UeId u, Slot from)
    {
        const auto& ue = ues_[u];
        Slot next = kNoSlot;
        for (const auto& a : ue.active) {
            next = std::min(next, a.schedule.attempts[a.next_attempt].slot);
        }
        const bool can_start = cfg_.traffic.service == ServicePolicy::Concurrent || ue.active.empty();
        if (!ue.queue.empty() && can_start) {
            next = std::min(next, from);
        }
        const double t = next_arrival(ue);
        if (t != kNever) {
            next = std::min(next, slot_of(t, grid()));
        }
        if (next == kNoSlot) {
            wake_[u] = kNoSlot;
            return;
        }
        next = std::max(next, from);
        wake_[u] = next;
        wakeups_.emplace(next, u);
    }

    void violation(const std::string& what)
    {
        if (violations_++ == 0) {
            first_violation_ = what;
        }
    }

    void step(Slot slot)
    {
        admit_arrivals(slot);
        start_services(slot);

        auto& txs = txs_;
        txs.clear();
        sending_.clear();
        for (UeId u : woken_) {
            auto& ue = ues_[u];
            for (std::size_t i = 0; i < ue.active.size(); ++i) {
                const auto& a = ue.active[i];
                if (a.schedule.attempts[a.next_attempt].slot != slot) {
                    continue;
                }
                if (!sending_.empty() && sending_.back().first == u) {
                    violation("UE scheduled two transmissions in one slot");
                    continue;
                }
                SlotTransmission tx{u, sci_for_attempt(a.schedule,
                                                       static_cast<int>(a.next_attempt) + 1, u)};
                if (auto bad = check_sci(tx.sci, grid())) {
                    violation(*bad);
                }
                if (slot > last_slot_before(a.packet.deadline_s(), grid())) {
                    violation("attempt transmitted at or after the packet deadline");
                }
                txs.push_back(std::move(tx));
                sending_.emplace_back(u, i);
            }
        }
        if (txs.empty()) {
            return;
        }

        const auto& decodings = receiver_.receive(txs);
        for (const auto& d : decodings) {
            const auto& tx = txs[d.tx_index];
            ingest_sci(ues_[d.receiver].db, tx.sci, channel_.rx_power_dbm(tx.source, d.receiver));
            if (d.pssch_decoded) {
                ues_[tx.source].active[sending_[d.tx_index].second].delivered[d.receiver] = 1;
            }
        }
        if (full_reports_) {
            report_slot(slot, txs, decodings);
        }

        // Indices into `active` stay valid until the erase pass below.
        for (const auto& [u, i] : sending_) {
            auto& a = ues_[u].active[i];
            if (++a.next_attempt == a.schedule.attempts.size()) {
                finish(u, a);
            }
        }
        for (const auto& [u, i] : sending_) {
            std::erase_if(ues_[u].active,
                          [](const ActivePacket& a) { return a.next_attempt == a.schedule.attempts.size(); });
        }
    }

    /// Per-receiver reports for observers and traces, cross-checked against the batch path.
    void report_slot(Slot slot, std::span<const SlotTransmission> txs,
                     std::span<const Decoding> batch)
    {
        std::vector<Decoding> decodings(batch.begin(), batch.end());
        std::sort(decodings.begin(), decodings.end(), [](const auto& a, const auto& b) {
            return a.receiver != b.receiver ? a.receiver < b.receiver : a.tx_index < b.tx_index;
        });
        std::size_t k = 0;
        for (std::size_t r = 0; r < ues_.size(); ++r) {
            auto& report = reports_[r];
            receive_slot_into(report, scratch_, static_cast<UeId>(r), slot, txs, channel_,
                              cfg_.phy);
            check_report(report, txs);
            for (const auto& o : report.outcomes) {
                if (!o.pscch_decoded) {
                    continue;
                }
                if (k >= decodings.size() || decodings[k].receiver != r ||
                    decodings[k].tx_index != o.tx_index ||
                    decodings[k].pssch_decoded != o.pssch_decoded) {
                    violation("batch reception disagrees with per-receiver reception");
                }
                ++k;
            }
            if (hooks_.reception_trace != nullptr) {
                for (const auto& o : report.outcomes) {
                    const auto& tx = txs[o.tx_index];
                    *hooks_.reception_trace
                        << slot << ' ' << r << ' ' << tx.source << ' ' << tx.sci.packet_id << ' '
                        << (o.miss ? to_string(*o.miss) : std::string_view("ok")) << ' '
                        << o.pscch_sinr_db << ' ' << o.pssch_sinr_db << '\n';
                }
            }
        }
        if (k != decodings.size()) {
            violation("batch reception disagrees with per-receiver reception");
        }
        if (hooks_.on_slot) {
            hooks_.on_slot(slot, txs, std::span<const SlotReceptionReport>(reports_));
        }
    }

    void check_report(const SlotReceptionReport& report, std::span<const SlotTransmission> txs)
    {
        const bool transmitting = std::any_of(txs.begin(), txs.end(), [&](const auto& t) {
            return t.source == report.receiver;
        });
        if (transmitting && cfg_.phy.duplex == Duplex::HD && !report.decoded_scis.empty()) {
            violation("half-duplex UE decoded while transmitting");
        }
        for (const auto& sci : report.decoded_scis) {
            if (sci.source_ue == report.receiver) {
                violation("UE decoded its own transmission");
            }
        }
        for (PacketId p : report.decoded_packets) {
            const bool has_sci = std::any_of(report.decoded_scis.begin(), report.decoded_scis.end(),
                                             [p](const SciMessage& s) { return s.packet_id == p; });
            if (!has_sci) {
                violation("PSSCH decoded without its PSCCH");
            }
        }
    }

    void admit_arrivals(Slot slot)
    {
        const double slot_end = slot_start(slot + 1);
        for (UeId u : woken_) {
            auto& ue = ues_[u];
            for (double t = next_arrival(ue); t < slot_end; t = next_arrival(ue)) {
                Packet p;
                p.id = next_packet_id_++;
                p.source_ue = u;
                p.arrival_time_s = t;
                p.size_bytes = cfg_.traffic.packet_size_bytes;
                p.delay_budget_s = cfg_.traffic.delay_budget_s;
                ue.queue.push_back(p);
                if (!ue.scripted.empty() && ue.scripted.front() == t) {
                    ue.scripted.pop_front();
                } else {
                    draw_next_arrival(ue, t);
                }
            }
        }
    }

    bool measured(const Packet& p) const
    {
        return p.arrival_time_s >= cfg_.traffic.warmup_s &&
               p.arrival_time_s < cfg_.traffic.duration_s;
    }

    void start_services(Slot slot)
    {
        for (UeId id : woken_) {
            auto& ue = ues_[id];
            const bool fifo = cfg_.traffic.service == ServicePolicy::Fifo;
            while (!(fifo && !ue.active.empty()) && !ue.queue.empty()) {
                Packet p = ue.queue.front();
                ue.queue.pop_front();
                const auto window = selection_window(slot, cfg_.selection,
                                                     last_slot_before(p.deadline_s(), grid()));
                ue.db.expire_through(slot);
                own_slots_.clear();
                for (const auto& a : ue.active) {
                    for (std::size_t i = a.next_attempt; i < a.schedule.attempts.size(); ++i) {
                        own_slots_.push_back(a.schedule.attempts[i].slot);
                    }
                }
                auto outcome = select_resources(ue.db, window, cfg_.selection, grid(),
                                                ue.selection_rng, p.id, own_slots_);
                trace_selection(slot, id, p, outcome);
                if (!outcome.ok()) {
                    if (measured(p)) {
                        metrics_.record_scheduling_failure();
                        metrics_.record_packet(id, channel_.relevance_set(id).size(), 0);
                    }
                    continue;
                }
                if (auto bad = check_schedule(*outcome.schedule, window.first, window.last, grid())) {
                    violation(*bad);
                }
                ActivePacket a;
                a.packet = p;
                a.schedule = std::move(*outcome.schedule);
                a.delivered.assign(ues_.size(), 0);
                a.measured = measured(p);
                if (a.measured) {
                    metrics_.record_first_attempt(a.schedule.attempts.front().slot - window.first);
                }
                ue.active.push_back(std::move(a));
            }
        }
    }

    void trace_selection(Slot slot, UeId ue, const Packet& p, const SelectionOutcome& outcome)
    {
        if (hooks_.selection_trace == nullptr) {
            return;
        }
        auto& os = *hooks_.selection_trace;
        os << slot << ' ' << ue << ' ' << p.id << ' ' << to_string(cfg_.selection.algorithm) << ' ';
        if (outcome.schedule) {
            const auto& attempts = outcome.schedule->attempts;
            for (std::size_t i = 0; i < attempts.size(); ++i) {
                os << (i ? "," : "") << to_string(attempts[i]);
            }
        } else {
            os << "FAILED";
        }
        os << ' ' << outcome.escalations << '\n';
    }

    void finish(UeId source, const ActivePacket& a)
    {
        if (!a.measured) {
            return;
        }
        const auto in_range = channel_.relevance_set(source);
        std::size_t delivered = 0;
        for (UeId r : in_range) {
            delivered += a.delivered[r] != 0 ? 1 : 0;
        }
        metrics_.record_packet(source, in_range.size(), delivered);
    }

    const ScenarioConfig& cfg_;
    std::uint64_t seed_;
    const RunHooks& hooks_;
    ChannelModel channel_;
    MetricsAccumulator metrics_;
    SlotReceiver receiver_;
    std::vector<UeState> ues_;
    std::vector<SlotTransmission> txs_;
    /// (source, index into its active list) for each entry of `txs_`.
    std::vector<std::pair<UeId, std::size_t>> sending_;
    std::vector<Slot> own_slots_;
    std::vector<Slot> wake_;
    std::priority_queue<std::pair<Slot, UeId>, std::vector<std::pair<Slot, UeId>>,
                        std::greater<>>
        wakeups_;
    std::vector<UeId> woken_;
    std::vector<SlotReceptionReport> reports_;
    ReceptionScratch scratch_;
    bool full_reports_ = false;
    PacketId next_packet_id_ = 0;
    std::uint64_t violations_ = 0;
    std::string first_violation_;
};

} // namespace

std::string_view to_string(ServicePolicy p)
{
    return p == ServicePolicy::Fifo ? "fifo" : "concurrent";
}

std::optional<ServicePolicy> parse_service_policy(std::string_view s)
{
    if (s == "concurrent") return ServicePolicy::Concurrent;
    if (s == "fifo") return ServicePolicy::Fifo;
    return std::nullopt;
}

void TrafficConfig::validate() const
{
    if (!(per_ue_rate_pps >= 0.0)) {
        throw ConfigError("traffic.rate_pps must be >= 0");
    }
    if (!(warmup_s >= 0.0) || !(duration_s > warmup_s)) {
        throw ConfigError("traffic.duration_s must exceed traffic.warmup_s >= 0");
    }
    if (!(delay_budget_s > 0.0)) {
        throw ConfigError("traffic.delay_budget_s must be positive");
    }
    if (packet_size_bytes < 1) {
        throw ConfigError("traffic.packet_size_bytes must be >= 1");
    }
    for (const auto& a : scripted) {
        if (!(a.time_s >= 0.0)) {
            throw ConfigError("scripted arrival with negative time");
        }
    }
}

void ScenarioConfig::validate() const
{
    grid.validate();
    radio.validate();
    phy.validate();
    selection.validate(grid);
    traffic.validate();
    if (topology.fixed) {
        topology.fixed->validate();
    } else if (topology.num_ues < 2) {
        throw ConfigError("topology.num_ues must be >= 2");
    } else if (!(topology.mean_gap_m > 0.0)) {
        throw ConfigError("topology.mean_gap_m must be positive");
    }
    if (!(relevance_radius_m > 0.0)) {
        throw ConfigError("radio.relevance_radius_m must be positive");
    }
}

MetricsAccumulator::MetricsAccumulator(std::size_t num_ues)
    : observed_(num_ues, 0), lost_(num_ues, 0), packets_(num_ues, 0)
{
}

void MetricsAccumulator::record_packet(UeId source, std::size_t in_range, std::size_t delivered)
{
    ++packets_[source];
    observed_[source] += in_range;
    lost_[source] += in_range - delivered;
}

void MetricsAccumulator::record_first_attempt(Slot offset)
{
    const auto i = static_cast<std::size_t>(offset);
    if (first_attempt_histogram_.size() <= i) {
        first_attempt_histogram_.resize(i + 1, 0);
    }
    ++first_attempt_histogram_[i];
}

std::optional<double> MetricsAccumulator::ue_plr(UeId ue) const
{
    if (packets_[ue] == 0 || observed_[ue] == 0) {
        return std::nullopt;
    }
    return static_cast<double>(lost_[ue]) / static_cast<double>(observed_[ue]);
}

void MetricsAccumulator::fill(RunResult& result) const
{
    std::vector<double> per_ue;
    for (std::size_t u = 0; u < packets_.size(); ++u) {
        result.packets += packets_[u];
        result.receiver_observations += observed_[u];
        result.lost_observations += lost_[u];
        if (auto p = ue_plr(static_cast<UeId>(u))) {
            per_ue.push_back(*p);
        }
    }
    result.scheduling_failures = scheduling_failures_;
    result.first_attempt_histogram = first_attempt_histogram_;
    std::uint64_t n = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < first_attempt_histogram_.size(); ++i) {
        n += first_attempt_histogram_[i];
        sum += static_cast<double>(i) * static_cast<double>(first_attempt_histogram_[i]);
    }
    result.mean_first_attempt_delay = n > 0 ? sum / static_cast<double>(n) : 0.0;

    result.has_data = !per_ue.empty();
    if (!result.has_data) {
        result.plr = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    if (per_ue.size() >= 2) {
        const auto est = mean_with_halfwidth(per_ue);
        result.plr = est.plr;
        result.plr_confidence_halfwidth = est.halfwidth;
    } else {
        result.plr = per_ue.front();
    }
}

Topology scenario_topology(const ScenarioConfig& cfg, std::uint64_t seed)
{
    if (cfg.topology.fixed) {
        Topology t = *cfg.topology.fixed;
        t.wraparound = cfg.topology.wraparound;
        return t;
    }
    return generate_topology(cfg.topology.num_ues, cfg.topology.mean_gap_m, seed,
                             cfg.topology.wraparound);
}

RunResult run_simulation(const ScenarioConfig& cfg, std::uint64_t seed, const RunHooks& hooks)
{
    cfg.validate();
    Simulator sim(cfg, seed, hooks);
    return sim.run();
}

double mean_first_attempt_delay_formula(int k, int t1, int t2)
{
    if (k < 1 || t1 > t2 || k > t2 - t1 + 1) {
        throw DomainError("mean_first_attempt_delay_formula: K must lie in [1, T2 - T1 + 1]");
    }
    return static_cast<double>(t2 - t1 - k + 1) / static_cast<double>(k + 1);
}

} // namespace v2x
