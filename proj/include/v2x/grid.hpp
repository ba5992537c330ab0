#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace v2x {

using Slot = std::int64_t;
using UeId = std::uint32_t;
using PacketId = std::uint64_t;

/// Time-frequency grid shared by all UEs.
struct GridConfig {
    double slot_duration_s = 500e-6;
    int num_subchannels = 4;
    int subchannels_per_tx = 1;
    int reservation_horizon = 32;

    /// Throws ConfigError if the invariants do not hold.
    void validate() const;
};

/// A contiguous block of subchannels in one slot.
struct ResourceBlockRef {
    Slot slot = 0;
    int first_subchannel = 0;
    int width = 1;

    int end_subchannel() const { return first_subchannel + width; }
    bool overlaps_subchannels(const ResourceBlockRef& other) const {
        return first_subchannel < other.end_subchannel() &&
               other.first_subchannel < end_subchannel();
    }
    int overlap_width(const ResourceBlockRef& other) const;

    friend bool operator==(const ResourceBlockRef&, const ResourceBlockRef&) = default;
};

struct Packet {
    PacketId id = 0;
    UeId source_ue = 0;
    double arrival_time_s = 0.0;
    int size_bytes = 300;
    double delay_budget_s = 10e-3;

    double deadline_s() const { return arrival_time_s + delay_budget_s; }
};

/// Maximum number of future reservations one SCI can carry.
inline constexpr int kMaxReservationsPerSci = 2;

/// Fixed-capacity list of the reservations carried by one SCI.
class Reservations {
public:
    void push_back(const ResourceBlockRef& b);
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    const ResourceBlockRef& operator[](std::size_t i) const { return items_[i]; }
    const ResourceBlockRef* begin() const { return items_.data(); }
    const ResourceBlockRef* end() const { return items_.data() + size_; }

private:
    std::array<ResourceBlockRef, kMaxReservationsPerSci> items_{};
    std::size_t size_ = 0;
};

/// Sidelink control information carried on PSCCH.
struct SciMessage {
    UeId source_ue = 0;
    PacketId packet_id = 0;
    ResourceBlockRef current;
    Reservations reservations;
    int attempt_index = 1;
};

/// The K attempts selected for one packet, ordered by slot.
struct TransmissionSchedule {
    PacketId packet_id = 0;
    std::vector<ResourceBlockRef> attempts;

    int k() const { return static_cast<int>(attempts.size()); }
};

/// SCI for the given 1-based attempt: reserves the next two attempts, if any.
SciMessage sci_for_attempt(const TransmissionSchedule& schedule, int attempt_index,
                           UeId source_ue = 0);

/// floor(time / slot_duration). Throws DomainError for negative time.
Slot slot_of(double time_s, const GridConfig& cfg);

/// Last slot whose start lies strictly before `deadline_s`.
Slot last_slot_before(double deadline_s, const GridConfig& cfg);

/// Returns a description of the first violated SCI invariant, if any.
std::optional<std::string> check_sci(const SciMessage& sci, const GridConfig& cfg);

/// Checks ordering, window bounds, block widths and maximum attempt spacing.
std::optional<std::string> check_schedule(const TransmissionSchedule& schedule,
                                          Slot window_first, Slot window_last,
                                          const GridConfig& cfg);

std::string to_string(const ResourceBlockRef& block);

} // namespace v2x
