#include "v2x/selection.hpp"

#include "v2x/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace v2x {

namespace {

constexpr double kNoEntry = -std::numeric_limits<double>::infinity();

template <typename T>
T uniform_index(Rng& rng, T n)
{
    return std::uniform_int_distribution<T>(0, n - 1)(rng);
}

/// Draws `count` distinct slots uniformly from [from, to]; slots without a free start are
/// discarded and replaced by further draws.
bool draw_attempts(const ExclusionMap& map, Slot from, Slot to, int count, Rng& rng, int width,
                   std::vector<ResourceBlockRef>& out)
{
    std::vector<Slot> pool;
    for (Slot s = from; s <= to; ++s) {
        pool.push_back(s);
    }
    int chosen = 0;
    while (chosen < count) {
        if (pool.empty()) {
            return false;
        }
        const std::size_t pick = uniform_index(rng, pool.size());
        const Slot slot = pool[pick];
        pool[pick] = pool.back();
        pool.pop_back();
        const auto starts = map.free_positions(slot);
        if (starts.empty()) {
            continue;
        }
        const int start = starts[uniform_index(rng, starts.size())];
        out.push_back(ResourceBlockRef{slot, start, width});
        ++chosen;
    }
    return true;
}

SelectionOutcome finish(const ExclusionMap& map, std::vector<ResourceBlockRef> attempts,
                        bool ok, PacketId packet)
{
    SelectionOutcome out;
    out.window = map.window();
    out.escalations = map.escalations;
    out.threshold_dbm = map.threshold_dbm;
    if (!ok) {
        out.failure = "not enough slots with a free starting subchannel";
        return out;
    }
    std::sort(attempts.begin(), attempts.end(),
              [](const ResourceBlockRef& a, const ResourceBlockRef& b) { return a.slot < b.slot; });
    out.schedule = TransmissionSchedule{packet, std::move(attempts)};
    return out;
}

SelectionOutcome infeasible(SelectionWindow window, const SelectionConfig& cfg)
{
    SelectionOutcome out;
    out.window = window;
    out.threshold_dbm = cfg.p_th_dbm;
    out.failure = "window of " + std::to_string(window.size()) + " slots cannot hold K=" +
                  std::to_string(cfg.k) + " attempts";
    return out;
}

SelectionOutcome srs_on_map(const ExclusionMap& map, const SelectionConfig& cfg,
                            const GridConfig& grid, Rng& rng, PacketId packet)
{
    const auto w = map.window();
    std::vector<ResourceBlockRef> attempts;
    const bool ok =
        draw_attempts(map, w.first, w.last, cfg.k, rng, grid.subchannels_per_tx, attempts);
    return finish(map, std::move(attempts), ok, packet);
}

void block_own_slots(ExclusionMap& map, std::span<const Slot> own_slots)
{
    for (Slot s : own_slots) {
        if (map.window().contains(s)) {
            for (int p = 0; p < map.num_positions(); ++p) {
                map.set_free(s, p, false);
            }
        }
    }
}

} // namespace

std::string_view to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::RA:
        return "RA";
    case Algorithm::SRS:
        return "SRS";
    case Algorithm::QFA:
        return "QFA";
    }
    return "?";
}

std::optional<Algorithm> parse_algorithm(std::string_view s)
{
    if (s == "RA") return Algorithm::RA;
    if (s == "SRS") return Algorithm::SRS;
    if (s == "QFA") return Algorithm::QFA;
    return std::nullopt;
}

void SelectionConfig::validate(const GridConfig& grid) const
{
    if (k < 1) {
        throw ConfigError("selection.k must be >= 1");
    }
    if (t1 < 0 || t1 > t2) {
        throw ConfigError("selection.t1 must satisfy 0 <= T1 <= T2");
    }
    if (k > window_size()) {
        throw ConfigError("selection.k=" + std::to_string(k) + " exceeds the selection window of " +
                          std::to_string(window_size()) + " slots [T1=" + std::to_string(t1) +
                          ", T2=" + std::to_string(t2) + "]");
    }
    if (t2 - t1 > grid.reservation_horizon - 1) {
        throw ConfigError("selection window wider than the reservation horizon");
    }
    if (!(free_fraction_target >= 0.0 && free_fraction_target <= 1.0)) {
        throw ConfigError("selection.free_fraction_target must be in [0, 1]");
    }
    if (!(escalation_step_db > 0.0)) {
        throw ConfigError("selection.escalation_step_db must be positive");
    }
}

SelectionWindow selection_window(Slot now, const SelectionConfig& cfg,
                                 std::optional<Slot> last_allowed)
{
    SelectionWindow w{now + cfg.t1, now + cfg.t2};
    if (last_allowed) {
        w.last = std::min(w.last, *last_allowed);
    }
    return w;
}

void SensingDatabase::expire_through(Slot now)
{
    std::erase_if(entries_, [now](const SensingEntry& e) { return e.block.slot <= now; });
}

void ingest_sci(SensingDatabase& db, const SciMessage& sci, double rsrp_dbm)
{
    for (const auto& r : sci.reservations) {
        db.add(SensingEntry{r, rsrp_dbm, sci.source_ue});
    }
}

ExclusionMap::ExclusionMap(SelectionWindow window, int num_positions)
    : window_(window),
      num_positions_(num_positions),
      free_(static_cast<std::size_t>(window.size()) * num_positions, 1)
{
}

std::size_t ExclusionMap::index(Slot slot, int first_subchannel) const
{
    return static_cast<std::size_t>(slot - window_.first) * num_positions_ + first_subchannel;
}

std::size_t ExclusionMap::free_count() const
{
    return static_cast<std::size_t>(std::count(free_.begin(), free_.end(), 1));
}

bool ExclusionMap::is_free(Slot slot, int first_subchannel) const
{
    return free_[index(slot, first_subchannel)] != 0;
}

void ExclusionMap::set_free(Slot slot, int first_subchannel, bool value)
{
    free_[index(slot, first_subchannel)] = value ? 1 : 0;
}

std::vector<int> ExclusionMap::free_positions(Slot slot) const
{
    std::vector<int> out;
    for (int p = 0; p < num_positions_; ++p) {
        if (is_free(slot, p)) {
            out.push_back(p);
        }
    }
    return out;
}

bool ExclusionMap::slot_has_free(Slot slot) const
{
    for (int p = 0; p < num_positions_; ++p) {
        if (is_free(slot, p)) {
            return true;
        }
    }
    return false;
}

ExclusionMap all_free_map(SelectionWindow window, const SelectionConfig& cfg,
                          const GridConfig& grid)
{
    ExclusionMap map(window, grid.num_subchannels - grid.subchannels_per_tx + 1);
    map.threshold_dbm = cfg.p_th_dbm;
    return map;
}

ExclusionMap build_exclusion_map(const SensingDatabase& db, SelectionWindow window,
                                 const SelectionConfig& cfg, const GridConfig& grid)
{
    ExclusionMap map = all_free_map(window, cfg, grid);
    const auto slots = static_cast<std::size_t>(window.size());
    const auto subs = static_cast<std::size_t>(grid.num_subchannels);
    if (slots == 0) {
        return map;
    }

    // Strongest reservation per (slot, subchannel); duplicates collapse to their maximum.
    std::vector<double> strongest(slots * subs, kNoEntry);
    double max_rsrp = kNoEntry;
    for (const auto& e : db.entries()) {
        if (!window.contains(e.block.slot)) {
            continue;
        }
        const auto row = static_cast<std::size_t>(e.block.slot - window.first) * subs;
        for (int c = std::max(0, e.block.first_subchannel);
             c < std::min(grid.num_subchannels, e.block.end_subchannel()); ++c) {
            strongest[row + c] = std::max(strongest[row + c], e.rsrp_dbm);
        }
        max_rsrp = std::max(max_rsrp, e.rsrp_dbm);
    }

    const int positions = map.num_positions();
    // Per-position maximum over the subchannels a transmission starting there would occupy.
    std::vector<double> position_rsrp(slots * positions, kNoEntry);
    for (std::size_t s = 0; s < slots; ++s) {
        for (int p = 0; p < positions; ++p) {
            double m = kNoEntry;
            for (int c = p; c < p + grid.subchannels_per_tx; ++c) {
                m = std::max(m, strongest[s * subs + c]);
            }
            position_rsrp[s * positions + p] = m;
        }
    }

    const double target = cfg.free_fraction_target * static_cast<double>(slots * positions);
    double threshold = cfg.p_th_dbm;
    int escalations = 0;
    for (;;) {
        std::size_t free = 0;
        for (std::size_t s = 0; s < slots; ++s) {
            for (int p = 0; p < positions; ++p) {
                const bool f = !(position_rsrp[s * positions + p] > threshold);
                map.set_free(window.first + static_cast<Slot>(s), p, f);
                free += f ? 1 : 0;
            }
        }
        if (static_cast<double>(free) >= target || !(max_rsrp > threshold)) {
            break;
        }
        threshold += cfg.escalation_step_db;
        ++escalations;
    }
    map.threshold_dbm = threshold;
    map.escalations = escalations;
    return map;
}

SelectionOutcome select_srs(const SensingDatabase& db, SelectionWindow window,
                            const SelectionConfig& cfg, const GridConfig& grid, Rng& rng,
                            PacketId packet, std::span<const Slot> own_slots)
{
    if (window.size() < cfg.k) {
        return infeasible(window, cfg);
    }
    auto map = build_exclusion_map(db, window, cfg, grid);
    block_own_slots(map, own_slots);
    return srs_on_map(map, cfg, grid, rng, packet);
}

SelectionOutcome select_ra(const SensingDatabase& /*db*/, SelectionWindow window,
                           const SelectionConfig& cfg, const GridConfig& grid, Rng& rng,
                           PacketId packet, std::span<const Slot> own_slots)
{
    if (window.size() < cfg.k) {
        return infeasible(window, cfg);
    }
    auto map = all_free_map(window, cfg, grid);
    block_own_slots(map, own_slots);
    return srs_on_map(map, cfg, grid, rng, packet);
}

SelectionOutcome select_qfa(const SensingDatabase& db, SelectionWindow window,
                            const SelectionConfig& cfg, const GridConfig& grid, Rng& rng,
                            PacketId packet, std::span<const Slot> own_slots)
{
    if (window.size() < cfg.k) {
        return infeasible(window, cfg);
    }
    auto map = build_exclusion_map(db, window, cfg, grid);
    block_own_slots(map, own_slots);
    std::vector<ResourceBlockRef> attempts;
    Slot first = window.first;
    while (first <= window.last && !map.slot_has_free(first)) {
        ++first;
    }
    if (first > window.last) {
        return finish(map, {}, false, packet);
    }
    const auto starts = map.free_positions(first);
    attempts.push_back(
        ResourceBlockRef{first, starts[uniform_index(rng, starts.size())], grid.subchannels_per_tx});
    const bool ok = draw_attempts(map, first + 1, window.last, cfg.k - 1, rng,
                                  grid.subchannels_per_tx, attempts);
    return finish(map, std::move(attempts), ok, packet);
}

SelectionOutcome select_resources(const SensingDatabase& db, SelectionWindow window,
                                  const SelectionConfig& cfg, const GridConfig& grid, Rng& rng,
                                  PacketId packet, std::span<const Slot> own_slots)
{
    switch (cfg.algorithm) {
    case Algorithm::RA:
        return select_ra(db, window, cfg, grid, rng, packet, own_slots);
    case Algorithm::SRS:
        return select_srs(db, window, cfg, grid, rng, packet, own_slots);
    case Algorithm::QFA:
        return select_qfa(db, window, cfg, grid, rng, packet, own_slots);
    }
    throw UsageError("unknown selection algorithm");
}

} // namespace v2x
