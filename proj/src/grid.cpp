#include "v2x/grid.hpp"

#include "v2x/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace v2x {

namespace {

// Absorbs representation error so that exact multiples of the slot duration
// land on the slot they start.
constexpr double kSlotEpsilon = 1e-9;

} // namespace

void GridConfig::validate() const
{
    if (!(slot_duration_s > 0.0)) {
        throw ConfigError("grid.slot_duration_s must be positive");
    }
    if (num_subchannels < 1) {
        throw ConfigError("grid.num_subchannels must be >= 1");
    }
    if (subchannels_per_tx < 1 || subchannels_per_tx > num_subchannels) {
        throw ConfigError("grid.subchannels_per_tx must be in [1, grid.num_subchannels]");
    }
    if (reservation_horizon < 2) {
        throw ConfigError("grid.reservation_horizon must be >= 2");
    }
}

int ResourceBlockRef::overlap_width(const ResourceBlockRef& other) const
{
    const int lo = std::max(first_subchannel, other.first_subchannel);
    const int hi = std::min(end_subchannel(), other.end_subchannel());
    return std::max(0, hi - lo);
}

void Reservations::push_back(const ResourceBlockRef& b)
{
    if (size_ == items_.size()) {
        throw UsageError("an SCI carries at most two reservations");
    }
    items_[size_++] = b;
}

SciMessage sci_for_attempt(const TransmissionSchedule& schedule, int attempt_index,
                           UeId source_ue)
{
    const int k = schedule.k();
    if (attempt_index < 1 || attempt_index > k) {
        throw UsageError("sci_for_attempt: attempt index " + std::to_string(attempt_index) +
                         " outside 1.." + std::to_string(k));
    }
    SciMessage sci;
    sci.source_ue = source_ue;
    sci.packet_id = schedule.packet_id;
    sci.attempt_index = attempt_index;
    sci.current = schedule.attempts[attempt_index - 1];
    const int last = std::min(k, attempt_index + kMaxReservationsPerSci);
    for (int i = attempt_index + 1; i <= last; ++i) {
        sci.reservations.push_back(schedule.attempts[i - 1]);
    }
    return sci;
}

Slot slot_of(double time_s, const GridConfig& cfg)
{
    if (time_s < 0.0) {
        throw DomainError("slot_of: negative time");
    }
    return static_cast<Slot>(std::floor(time_s / cfg.slot_duration_s + kSlotEpsilon));
}

Slot last_slot_before(double deadline_s, const GridConfig& cfg)
{
    return static_cast<Slot>(std::ceil(deadline_s / cfg.slot_duration_s - kSlotEpsilon)) - 1;
}

std::optional<std::string> check_sci(const SciMessage& sci, const GridConfig& cfg)
{
    if (sci.reservations.size() > static_cast<std::size_t>(kMaxReservationsPerSci)) {
        return "SCI carries more than two reservations";
    }
    const Slot max_gap = cfg.reservation_horizon - 1;
    for (std::size_t i = 0; i < sci.reservations.size(); ++i) {
        const Slot s = sci.reservations[i].slot;
        if (s <= sci.current.slot) {
            return "SCI reservation not later than current slot";
        }
        if (s - sci.current.slot > max_gap) {
            return "SCI reservation beyond the reservation horizon";
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (sci.reservations[j].slot == s) {
                return "SCI reservations share a slot";
            }
        }
    }
    return std::nullopt;
}

std::optional<std::string> check_schedule(const TransmissionSchedule& schedule,
                                          Slot window_first, Slot window_last,
                                          const GridConfig& cfg)
{
    if (schedule.attempts.empty()) {
        return "empty schedule";
    }
    const Slot max_gap = cfg.reservation_horizon - 1;
    for (std::size_t i = 0; i < schedule.attempts.size(); ++i) {
        const auto& a = schedule.attempts[i];
        if (a.slot < window_first || a.slot > window_last) {
            return "attempt outside selection window";
        }
        if (a.width != cfg.subchannels_per_tx || a.first_subchannel < 0 ||
            a.end_subchannel() > cfg.num_subchannels) {
            return "attempt block outside the grid";
        }
        if (i > 0) {
            const Slot gap = a.slot - schedule.attempts[i - 1].slot;
            if (gap <= 0) {
                return "attempt slots not strictly increasing";
            }
            if (gap > max_gap) {
                return "consecutive attempts too far apart for chained reservations";
            }
        }
    }
    return std::nullopt;
}

std::string to_string(const ResourceBlockRef& block)
{
    std::ostringstream os;
    os << block.slot << ':' << block.first_subchannel;
    if (block.width != 1) {
        os << '+' << block.width;
    }
    return os.str();
}

} // namespace v2x
