#pragma once

#include "v2x/grid.hpp"

#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace v2x {

enum class Algorithm { RA, SRS, QFA };

std::string_view to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view s);

using Rng = std::mt19937_64;

struct SelectionConfig {
    int k = 5;
    int t1 = 1;
    int t2 = 20;
    double p_th_dbm = -110.0;
    double free_fraction_target = 0.2;
    double escalation_step_db = 3.0;
    Algorithm algorithm = Algorithm::SRS;

    int window_size() const { return t2 - t1 + 1; }
    void validate(const GridConfig& grid) const;
};

/// Inclusive range of candidate slots.
struct SelectionWindow {
    Slot first = 0;
    Slot last = -1;

    Slot size() const { return last >= first ? last - first + 1 : 0; }
    bool contains(Slot s) const { return s >= first && s <= last; }
};

/// [now + T1, now + T2], cut so that no slot starts at or after the deadline.
SelectionWindow selection_window(Slot now, const SelectionConfig& cfg,
                                 std::optional<Slot> last_allowed = std::nullopt);

struct SensingEntry {
    ResourceBlockRef block;
    double rsrp_dbm = 0.0;
    UeId source = 0;
};

/// Reservations this UE has overheard in decoded SCIs.
class SensingDatabase {
public:
    void add(const SensingEntry& e) { entries_.push_back(e); }

    /// Drops every entry whose slot is at or before `now`.
    void expire_through(Slot now);

    const std::vector<SensingEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::vector<SensingEntry> entries_;
};

/// Records every reservation of `sci`. The current block is already in the past.
void ingest_sci(SensingDatabase& db, const SciMessage& sci, double rsrp_dbm);

/// Free/busy flags for every (slot, starting subchannel) candidate in a window.
class ExclusionMap {
public:
    ExclusionMap(SelectionWindow window, int num_positions);

    SelectionWindow window() const { return window_; }
    int num_positions() const { return num_positions_; }
    std::size_t total_positions() const { return free_.size(); }
    std::size_t free_count() const;

    bool is_free(Slot slot, int first_subchannel) const;
    void set_free(Slot slot, int first_subchannel, bool value);
    std::vector<int> free_positions(Slot slot) const;
    bool slot_has_free(Slot slot) const;

    /// RSRP threshold the map was finally built with, after escalations.
    double threshold_dbm = 0.0;
    int escalations = 0;

private:
    std::size_t index(Slot slot, int first_subchannel) const;

    SelectionWindow window_;
    int num_positions_;
    std::vector<char> free_;
};

/// A position is busy when an overlapping entry has RSRP above the threshold. While the
/// free share is below the target, the threshold is raised in fixed steps and the map
/// rebuilt.
ExclusionMap build_exclusion_map(const SensingDatabase& db, SelectionWindow window,
                                 const SelectionConfig& cfg, const GridConfig& grid);

/// Map with every position free, as used by random access.
ExclusionMap all_free_map(SelectionWindow window, const SelectionConfig& cfg,
                          const GridConfig& grid);

struct SelectionOutcome {
    std::optional<TransmissionSchedule> schedule;
    SelectionWindow window;
    int escalations = 0;
    double threshold_dbm = 0.0;
    std::string failure;

    bool ok() const { return schedule.has_value(); }
};

// `own_slots` lists slots the selecting UE already transmits in. They are removed from the
// candidates after the exclusion map is built, since a UE sends at most once per slot.

/// Uniform draws of K distinct slots; a slot with no free start is discarded and another
/// drawn. Attempts are returned in slot order.
SelectionOutcome select_srs(const SensingDatabase& db, SelectionWindow window,
                            const SelectionConfig& cfg, const GridConfig& grid, Rng& rng,
                            PacketId packet = 0, std::span<const Slot> own_slots = {});

/// First attempt in the earliest slot with a free start, the rest by the SRS rule over
/// the slots after it.
SelectionOutcome select_qfa(const SensingDatabase& db, SelectionWindow window,
                            const SelectionConfig& cfg, const GridConfig& grid, Rng& rng,
                            PacketId packet = 0, std::span<const Slot> own_slots = {});

/// SRS draws with reservations ignored.
SelectionOutcome select_ra(const SensingDatabase& db, SelectionWindow window,
                           const SelectionConfig& cfg, const GridConfig& grid, Rng& rng,
                           PacketId packet = 0, std::span<const Slot> own_slots = {});

/// Dispatches on `cfg.algorithm`.
SelectionOutcome select_resources(const SensingDatabase& db, SelectionWindow window,
                                  const SelectionConfig& cfg, const GridConfig& grid, Rng& rng,
                                  PacketId packet = 0, std::span<const Slot> own_slots = {});

} // namespace v2x
