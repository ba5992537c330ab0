#include "v2x/phy.hpp"

#include "v2x/errors.hpp"

#include <algorithm>
#include <cmath>

namespace v2x {

namespace {

double to_db(double ratio) { return 10.0 * std::log10(ratio); }

double threshold_ratio(double threshold_db) { return std::pow(10.0, threshold_db / 10.0); }

/// Threshold test in the linear domain; both reception paths use it so they agree bit-exactly.
bool clears(double ratio, double threshold_db) { return ratio >= threshold_ratio(threshold_db); }

/// Power of `s` falling into one subchannel it occupies.
double per_subchannel_mw(const IncomingSignal& s) { return s.power_mw * (1.0 / s.block.width); }

bool covers(const ResourceBlockRef& b, int subchannel)
{
    return subchannel >= b.first_subchannel && subchannel < b.end_subchannel();
}

/// Total energy per subchannel over all signals.
void accumulate_subchannels(std::span<const IncomingSignal> signals, std::vector<double>& out)
{
    int extent = 0;
    for (const auto& s : signals) {
        extent = std::max(extent, s.block.end_subchannel());
    }
    out.assign(static_cast<std::size_t>(extent), 0.0);
    for (const auto& s : signals) {
        const double p = per_subchannel_mw(s);
        for (int c = s.block.first_subchannel; c < s.block.end_subchannel(); ++c) {
            out[c] += p;
        }
    }
}

/// Energy on `subchannel` from every signal other than `s`.
double others_on(const IncomingSignal& s, int subchannel, std::span<const double> totals)
{
    const double own = covers(s.block, subchannel) ? per_subchannel_mw(s) : 0.0;
    return std::max(0.0, totals[subchannel] - own);
}

void mppd_into(std::span<const IncomingSignal> signals, std::span<const double> totals,
               double noise_mw, const PhyConfig& cfg, std::vector<PscchResult>& out)
{
    out.assign(signals.size(), PscchResult{});
    for (std::size_t i = 0; i < signals.size(); ++i) {
        const auto& s = signals[i];
        if (!s.receivable) {
            continue;
        }
        // Only the strongest receivable candidate in this PSCCH subchannel is attempted.
        bool strongest = true;
        for (std::size_t j = 0; j < signals.size() && strongest; ++j) {
            const auto& o = signals[j];
            if (j == i || !o.receivable || o.pscch_subchannel() != s.pscch_subchannel()) {
                continue;
            }
            const double p = per_subchannel_mw(s);
            const double q = per_subchannel_mw(o);
            strongest = p > q || (p == q && s.source < o.source);
        }
        if (!strongest) {
            continue;
        }
        auto& r = out[i];
        r.attempted = true;
        const double ratio =
            per_subchannel_mw(s) / (noise_mw + others_on(s, s.pscch_subchannel(), totals));
        r.sinr_db = to_db(ratio);
        r.decoded = clears(ratio, cfg.pscch_sinr_threshold_db);
    }
}

void ipd_into(std::span<const IncomingSignal> signals, double noise_mw, const PhyConfig& cfg,
              std::vector<PscchResult>& out)
{
    out.assign(signals.size(), PscchResult{});
    for (std::size_t i = 0; i < signals.size(); ++i) {
        const auto& s = signals[i];
        if (!s.receivable) {
            continue;
        }
        auto& r = out[i];
        r.attempted = true;
        const double ratio = per_subchannel_mw(s) / noise_mw;
        r.sinr_db = to_db(ratio);
        r.decoded = clears(ratio, cfg.pscch_sinr_threshold_db);
    }
}

PsschResult pssch_on(const IncomingSignal& s, std::span<const double> totals, double noise_mw,
                     const PhyConfig& cfg)
{
    double interference = 0.0;
    for (int c = s.block.first_subchannel; c < s.block.end_subchannel(); ++c) {
        interference += others_on(s, c, totals);
    }
    PsschResult r;
    const double ratio = s.power_mw / (noise_mw * s.block.width + interference);
    r.sinr_db = to_db(ratio);
    r.success = clears(ratio, cfg.pssch_sinr_threshold_db);
    return r;
}

void incoming_into(UeId receiver, std::span<const SlotTransmission> txs,
                   const ChannelModel& channel, Duplex duplex, std::vector<IncomingSignal>& out)
{
    out.clear();
    const SlotTransmission* own = nullptr;
    for (const auto& t : txs) {
        if (t.source == receiver) {
            own = &t;
            break;
        }
    }
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto& t = txs[i];
        if (t.source == receiver) {
            continue;
        }
        IncomingSignal s;
        s.tx_index = i;
        s.source = t.source;
        s.block = t.block();
        s.power_mw = channel.rx_power_mw(t.source, receiver);
        if (own != nullptr) {
            s.receivable = duplex == Duplex::IBFD ||
                           (duplex == Duplex::SBFD && !s.block.overlaps_subchannels(own->block()));
        }
        out.push_back(s);
    }
}

} // namespace

std::string_view to_string(Decoder d)
{
    return d == Decoder::MPPD ? "MPPD" : "IPD";
}

std::string_view to_string(Duplex d)
{
    switch (d) {
    case Duplex::HD:
        return "HD";
    case Duplex::SBFD:
        return "SBFD";
    case Duplex::IBFD:
        return "IBFD";
    }
    return "?";
}

std::optional<Decoder> parse_decoder(std::string_view s)
{
    if (s == "MPPD") return Decoder::MPPD;
    if (s == "IPD") return Decoder::IPD;
    return std::nullopt;
}

std::optional<Duplex> parse_duplex(std::string_view s)
{
    if (s == "HD") return Duplex::HD;
    if (s == "SBFD") return Duplex::SBFD;
    if (s == "IBFD") return Duplex::IBFD;
    return std::nullopt;
}

std::string_view to_string(MissReason r)
{
    switch (r) {
    case MissReason::half_duplex:
        return "half_duplex";
    case MissReason::pscch_fail:
        return "pscch_fail";
    case MissReason::pssch_fail:
        return "pssch_fail";
    case MissReason::out_of_model:
        return "out_of_model";
    }
    return "?";
}

void PhyConfig::validate() const
{
    if (pscch_sinr_threshold_db > pssch_sinr_threshold_db) {
        throw ConfigError(
            "phy.pscch_sinr_threshold_db must not exceed phy.pssch_sinr_threshold_db");
    }
}

std::vector<std::size_t> receivable_transmissions(UeId receiver,
                                                  std::span<const SlotTransmission> txs,
                                                  Duplex duplex)
{
    const SlotTransmission* own = nullptr;
    for (const auto& t : txs) {
        if (t.source == receiver) {
            own = &t;
            break;
        }
    }
    std::vector<std::size_t> out;
    if (own != nullptr && duplex == Duplex::HD) {
        return out;
    }
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto& t = txs[i];
        if (t.source == receiver) {
            continue;
        }
        if (own != nullptr && duplex == Duplex::SBFD &&
            t.block().overlaps_subchannels(own->block())) {
            continue;
        }
        out.push_back(i);
    }
    return out;
}

std::vector<PscchResult> decode_pscch_mppd(std::span<const IncomingSignal> signals,
                                           double noise_mw_per_subchannel, const PhyConfig& cfg)
{
    std::vector<double> totals;
    accumulate_subchannels(signals, totals);
    std::vector<PscchResult> out;
    mppd_into(signals, totals, noise_mw_per_subchannel, cfg, out);
    return out;
}

std::vector<PscchResult> decode_pscch_ipd(std::span<const IncomingSignal> signals,
                                          double noise_mw_per_subchannel, const PhyConfig& cfg)
{
    std::vector<PscchResult> out;
    ipd_into(signals, noise_mw_per_subchannel, cfg, out);
    return out;
}

std::vector<PscchResult> decode_pscch(std::span<const IncomingSignal> signals,
                                      double noise_mw_per_subchannel, const PhyConfig& cfg)
{
    return cfg.decoder == Decoder::MPPD
               ? decode_pscch_mppd(signals, noise_mw_per_subchannel, cfg)
               : decode_pscch_ipd(signals, noise_mw_per_subchannel, cfg);
}

PsschResult decode_pssch(std::span<const IncomingSignal> signals, std::size_t target,
                         std::span<const PscchResult> pscch, double noise_mw_per_subchannel,
                         const PhyConfig& cfg)
{
    if (target >= signals.size() || target >= pscch.size() || !pscch[target].decoded) {
        throw UsageError("decode_pssch: PSCCH of the target transmission was not decoded");
    }
    std::vector<double> totals;
    accumulate_subchannels(signals, totals);
    return pssch_on(signals[target], totals, noise_mw_per_subchannel, cfg);
}

std::vector<IncomingSignal> incoming_signals(UeId receiver, std::span<const SlotTransmission> txs,
                                             const ChannelModel& channel, Duplex duplex)
{
    std::vector<IncomingSignal> out;
    incoming_into(receiver, txs, channel, duplex, out);
    return out;
}

void receive_slot_into(SlotReceptionReport& report, ReceptionScratch& scratch, UeId receiver,
                       Slot slot, std::span<const SlotTransmission> txs,
                       const ChannelModel& channel, const PhyConfig& cfg)
{
    report.receiver = receiver;
    report.slot = slot;
    report.decoded_scis.clear();
    report.decoded_packets.clear();
    report.outcomes.clear();

    auto& signals = scratch.signals;
    auto& pscch = scratch.pscch;
    incoming_into(receiver, txs, channel, cfg.duplex, signals);
    accumulate_subchannels(signals, scratch.subchannel_mw);
    const double noise = channel.noise_mw(1);
    if (cfg.decoder == Decoder::MPPD) {
        mppd_into(signals, scratch.subchannel_mw, noise, cfg, pscch);
    } else {
        ipd_into(signals, noise, cfg, pscch);
    }

    for (std::size_t i = 0; i < signals.size(); ++i) {
        TxOutcome o;
        o.tx_index = signals[i].tx_index;
        o.pscch_sinr_db = pscch[i].sinr_db;
        if (!signals[i].receivable) {
            o.miss = MissReason::half_duplex;
        } else if (!pscch[i].attempted) {
            o.miss = MissReason::out_of_model;
        } else if (!pscch[i].decoded) {
            o.miss = MissReason::pscch_fail;
        } else {
            o.pscch_decoded = true;
            const auto& sci = txs[o.tx_index].sci;
            report.decoded_scis.push_back(sci);
            const auto pssch = pssch_on(signals[i], scratch.subchannel_mw, noise, cfg);
            o.pssch_sinr_db = pssch.sinr_db;
            if (pssch.success) {
                o.pssch_decoded = true;
                report.decoded_packets.push_back(sci.packet_id);
            } else {
                o.miss = MissReason::pssch_fail;
            }
        }
        report.outcomes.push_back(o);
    }
}

SlotReceptionReport receive_slot(UeId receiver, Slot slot, std::span<const SlotTransmission> txs,
                                 const ChannelModel& channel, const PhyConfig& cfg)
{
    SlotReceptionReport report;
    ReceptionScratch scratch;
    receive_slot_into(report, scratch, receiver, slot, txs, channel, cfg);
    return report;
}

} // namespace v2x

namespace v2x {

SlotReceiver::SlotReceiver(const ChannelModel& channel, const PhyConfig& cfg,
                           const GridConfig& grid)
    : channel_(channel),
      cfg_(cfg),
      num_subchannels_(grid.num_subchannels),
      noise_mw_(channel.noise_mw(1)),
      pscch_ratio_(threshold_ratio(cfg.pscch_sinr_threshold_db)),
      pssch_ratio_(threshold_ratio(cfg.pssch_sinr_threshold_db)),
      hearers_(channel.num_ues()),
      total_mw_(channel.num_ues() * grid.num_subchannels, 0.0),
      best_tx_(channel.num_ues() * grid.num_subchannels, -1),
      best_mw_(channel.num_ues() * grid.num_subchannels, 0.0),
      own_tx_(channel.num_ues(), -1)
{
    const std::size_t n = channel.num_ues();
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t r = 0; r < n; ++r) {
            if (r == t) {
                continue;
            }
            const double per_sub =
                channel.rx_power_mw(static_cast<UeId>(t), static_cast<UeId>(r)) /
                grid.subchannels_per_tx;
            if (per_sub / noise_mw_ >= pscch_ratio_) {
                hearers_[t].push_back(static_cast<UeId>(r));
            }
        }
    }
}

bool SlotReceiver::receivable(UeId receiver, const SlotTransmission& t) const
{
    const int own = own_tx_[receiver];
    if (own < 0) {
        return true;
    }
    switch (cfg_.duplex) {
    case Duplex::HD:
        return false;
    case Duplex::SBFD:
        return !t.block().overlaps_subchannels(txs_[own].block());
    case Duplex::IBFD:
        return true;
    }
    return false;
}

const std::vector<Decoding>& SlotReceiver::receive(std::span<const SlotTransmission> txs)
{
    txs_ = txs;
    decodings_.clear();
    const std::size_t n = channel_.num_ues();
    // Subchannel-major layout so the per-transmission sweeps over receivers are contiguous.
    std::fill(total_mw_.begin(), total_mw_.end(), 0.0);
    std::fill(best_tx_.begin(), best_tx_.end(), -1);
    for (std::size_t i = 0; i < txs.size(); ++i) {
        own_tx_[txs[i].source] = static_cast<int>(i);
    }
    const bool mppd = cfg_.decoder == Decoder::MPPD;

    // The diagonal of the power matrix is zero, so a UE's own signal never adds energy.
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto& t = txs[i];
        const auto& b = t.block();
        const double* powers = channel_.rx_powers_mw_from(t.source);
        const double inv_width = 1.0 / b.width;
        for (int c = b.first_subchannel; c < b.end_subchannel(); ++c) {
            double* total = &total_mw_[static_cast<std::size_t>(c) * n];
            for (std::size_t r = 0; r < n; ++r) {
                total[r] += powers[r] * inv_width;
            }
        }
        if (!mppd) {
            continue;
        }
        const std::size_t row = static_cast<std::size_t>(b.first_subchannel) * n;
        int* best_tx = &best_tx_[row];
        double* best_mw = &best_mw_[row];
        for (std::size_t r = 0; r < n; ++r) {
            const auto rid = static_cast<UeId>(r);
            if (rid == t.source || (own_tx_[r] >= 0 && !receivable(rid, t))) {
                continue;
            }
            const double p = powers[r] * inv_width;
            const int best = best_tx[r];
            if (best < 0 || p > best_mw[r] ||
                (p == best_mw[r] && t.source < txs[static_cast<std::size_t>(best)].source)) {
                best_tx[r] = static_cast<int>(i);
                best_mw[r] = p;
            }
        }
    }

    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto& t = txs[i];
        const auto& b = t.block();
        const double* powers = channel_.rx_powers_mw_from(t.source);
        const std::size_t pscch_row = static_cast<std::size_t>(b.first_subchannel) * n;
        for (UeId r : hearers_[t.source]) {
            if (own_tx_[r] >= 0 && !receivable(r, t)) {
                continue;
            }
            const double power = powers[r];
            const double p = power * (1.0 / b.width);
            if (mppd) {
                if (best_tx_[pscch_row + r] != static_cast<int>(i)) {
                    continue;
                }
                const double others = std::max(0.0, total_mw_[pscch_row + r] - p);
                if (!(p / (noise_mw_ + others) >= pscch_ratio_)) {
                    continue;
                }
            }
            double interference = 0.0;
            for (int c = b.first_subchannel; c < b.end_subchannel(); ++c) {
                interference += std::max(0.0, total_mw_[static_cast<std::size_t>(c) * n + r] - p);
            }
            const double sinr = power / (noise_mw_ * b.width + interference);
            decodings_.push_back(Decoding{r, i, sinr >= pssch_ratio_});
        }
    }

    for (const auto& t : txs) {
        own_tx_[t.source] = -1;
    }
    return decodings_;
}

} // namespace v2x
