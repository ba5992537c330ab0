#pragma once

#include "v2x/channel.hpp"
#include "v2x/grid.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace v2x {

enum class Decoder { MPPD, IPD };
enum class Duplex { HD, SBFD, IBFD };

std::string_view to_string(Decoder d);
std::string_view to_string(Duplex d);
std::optional<Decoder> parse_decoder(std::string_view s);
std::optional<Duplex> parse_duplex(std::string_view s);

struct PhyConfig {
    double pscch_sinr_threshold_db = 0.0;
    /// Threshold for the PSSCH MCS (MCS 6 by default).
    double pssch_sinr_threshold_db = 5.0;
    Decoder decoder = Decoder::MPPD;
    Duplex duplex = Duplex::HD;

    void validate() const;
};

/// One transmission on the air in the current slot. PSCCH and PSSCH share `sci.current`.
struct SlotTransmission {
    UeId source = 0;
    SciMessage sci;

    const ResourceBlockRef& block() const { return sci.current; }
};

/// A transmission as seen by one receiver.
struct IncomingSignal {
    std::size_t tx_index = 0;
    UeId source = 0;
    ResourceBlockRef block;
    double power_mw = 0.0;
    bool receivable = true;

    /// PSCCH is carried in the lowest subchannel of the block.
    int pscch_subchannel() const { return block.first_subchannel; }
};

struct PscchResult {
    bool attempted = false;
    bool decoded = false;
    double sinr_db = 0.0;
};

struct PsschResult {
    bool success = false;
    double sinr_db = 0.0;
};

enum class MissReason { half_duplex, pscch_fail, pssch_fail, out_of_model };

std::string_view to_string(MissReason r);

/// Reception outcome for one transmission at one receiver.
struct TxOutcome {
    std::size_t tx_index = 0;
    bool pscch_decoded = false;
    bool pssch_decoded = false;
    std::optional<MissReason> miss;
    double pscch_sinr_db = 0.0;
    double pssch_sinr_db = 0.0;
};

struct SlotReceptionReport {
    UeId receiver = 0;
    Slot slot = 0;
    std::vector<SciMessage> decoded_scis;
    std::vector<PacketId> decoded_packets;
    /// One entry per transmission in the slot other than the receiver's own.
    std::vector<TxOutcome> outcomes;
};

/// Indices into `txs` that `receiver` can listen to given its own activity in the slot.
/// The receiver's own transmission is never included.
std::vector<std::size_t> receivable_transmissions(UeId receiver,
                                                  std::span<const SlotTransmission> txs,
                                                  Duplex duplex);

/// Capture decoding: in each PSCCH subchannel only the strongest receivable candidate is
/// attempted (ties go to the lowest UE id) and it must beat noise plus all other energy
/// on that subchannel. Result is index-aligned with `signals`.
std::vector<PscchResult> decode_pscch_mppd(std::span<const IncomingSignal> signals,
                                           double noise_mw_per_subchannel,
                                           const PhyConfig& cfg);

/// Ideal decoding: every receivable candidate whose SNR clears the threshold is decoded.
std::vector<PscchResult> decode_pscch_ipd(std::span<const IncomingSignal> signals,
                                          double noise_mw_per_subchannel,
                                          const PhyConfig& cfg);

std::vector<PscchResult> decode_pscch(std::span<const IncomingSignal> signals,
                                      double noise_mw_per_subchannel, const PhyConfig& cfg);

/// PSSCH decoding against full co-channel interference. Throws UsageError if the PSCCH
/// of `target` was not decoded.
PsschResult decode_pssch(std::span<const IncomingSignal> signals, std::size_t target,
                         std::span<const PscchResult> pscch, double noise_mw_per_subchannel,
                         const PhyConfig& cfg);

/// Signals from every transmission in the slot except the receiver's own.
std::vector<IncomingSignal> incoming_signals(UeId receiver, std::span<const SlotTransmission> txs,
                                             const ChannelModel& channel, Duplex duplex);

/// Full pipeline for one receiver in one slot. Pure in its arguments.
SlotReceptionReport receive_slot(UeId receiver, Slot slot, std::span<const SlotTransmission> txs,
                                 const ChannelModel& channel, const PhyConfig& cfg);

/// Buffers reused across calls of `receive_slot_into`.
struct ReceptionScratch {
    std::vector<IncomingSignal> signals;
    std::vector<PscchResult> pscch;
    std::vector<double> subchannel_mw;
};

/// Same as `receive_slot`, refilling `report` in place without reallocating.
void receive_slot_into(SlotReceptionReport& report, ReceptionScratch& scratch, UeId receiver,
                       Slot slot, std::span<const SlotTransmission> txs,
                       const ChannelModel& channel, const PhyConfig& cfg);

/// A PSCCH decoded by one receiver in the batch path.
struct Decoding {
    UeId receiver = 0;
    std::size_t tx_index = 0;
    bool pssch_decoded = false;
};

/// Slot reception for every UE at once: per-receiver, per-subchannel energy is accumulated
/// once per slot, so the cost is linear in transmissions times UEs. Produces exactly the
/// decoded PSCCH/PSSCH sets that `receive_slot` yields for each receiver.
class SlotReceiver {
public:
    SlotReceiver(const ChannelModel& channel, const PhyConfig& cfg, const GridConfig& grid);

    /// Decodings grouped by transmission, receivers ascending within each. The reference
    /// stays valid until the next call.
    const std::vector<Decoding>& receive(std::span<const SlotTransmission> txs);

    /// UEs whose SNR from `tx` clears the PSCCH threshold.
    std::span<const UeId> hearers(UeId tx) const { return hearers_[tx]; }

private:
    bool receivable(UeId receiver, const SlotTransmission& t) const;

    const ChannelModel& channel_;
    PhyConfig cfg_;
    int num_subchannels_;
    double noise_mw_;
    double pscch_ratio_;
    double pssch_ratio_;
    std::vector<std::vector<UeId>> hearers_;
    std::vector<double> total_mw_;
    std::vector<int> best_tx_;
    std::vector<double> best_mw_;
    std::vector<int> own_tx_;
    std::vector<Decoding> decodings_;
    std::span<const SlotTransmission> txs_;
};

} // namespace v2x
