#pragma once

#include "v2x/grid.hpp"

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace v2x {

/// UEs placed along a straight highway, positions in meters.
struct Topology {
    std::vector<double> positions_m;
    bool wraparound = false;

    std::size_t size() const { return positions_m.size(); }
    double span_m() const;
    /// Ring circumference under wraparound: the span plus one average gap, so the first
    /// and last UE sit a typical spacing apart.
    double ring_m() const;
    double distance_m(UeId a, UeId b) const;

    /// Throws ConfigError unless N >= 2 and positions strictly increase.
    void validate() const;
};

/// Log-distance propagation plus receiver noise parameters.
struct PropagationConfig {
    double l0_db = 46.7;
    double d0_m = 1.0;
    double path_loss_exponent = 3.0;
    double tx_power_dbm = 23.0;
    double noise_figure_db = 5.0;
    double subchannel_bandwidth_hz = 3.6e6;

    void validate() const;
};

/// Gaps between neighbours are i.i.d. exponential with mean `mean_gap_m`; UE 0 sits at 0.
Topology generate_topology(std::size_t num_ues, double mean_gap_m, std::uint64_t seed,
                           bool wraparound = false);

/// L0 + 10 n log10(d / d0), clamped to L0 below the reference distance.
double path_loss_db(double distance_m, const PropagationConfig& cfg);

/// Received power, which doubles as the RSRP of `tx` at `rx` (no fading).
double rx_power_dbm(UeId tx, UeId rx, const Topology& topo, const PropagationConfig& cfg);

/// Thermal noise over `width` subchannels including the receiver noise figure.
double noise_power_dbm(const PropagationConfig& cfg, int width);

double sinr_db(double target_dbm, std::span<const double> interferers_dbm, double noise_dbm);


/// Two-column table: `ue_id position_m`, one UE per line. Lines starting with '#' are skipped.
void write_topology(std::ostream& os, const Topology& topo);
Topology read_topology(std::istream& is, bool wraparound = false);

/// Precomputed received powers for a fixed topology, used by the slot loop.
class ChannelModel {
public:
    ChannelModel(Topology topo, const PropagationConfig& cfg, double relevance_radius_m);

    std::size_t num_ues() const { return topo_.size(); }
    const Topology& topology() const { return topo_; }
    const PropagationConfig& propagation() const { return cfg_; }

    double rx_power_mw(UeId tx, UeId rx) const { return rx_mw_[tx * n_ + rx]; }
    double rx_power_dbm(UeId tx, UeId rx) const { return rx_dbm_[tx * n_ + rx]; }
    /// Row of received powers from `tx` at every UE (zero at `tx` itself).
    const double* rx_powers_mw_from(UeId tx) const { return &rx_mw_[tx * n_]; }
    double noise_mw(int width) const { return noise_mw_per_subchannel_ * width; }

    /// UEs within the relevance radius of `source`, excluding the source itself.
    std::span<const UeId> relevance_set(UeId source) const { return relevant_[source]; }
    bool in_relevance_area(UeId source, UeId rx) const;

private:
    Topology topo_;
    PropagationConfig cfg_;
    double relevance_radius_m_;
    std::size_t n_;
    std::vector<double> rx_mw_;
    std::vector<double> rx_dbm_;
    std::vector<std::vector<UeId>> relevant_;
    double noise_mw_per_subchannel_;
};

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

} // namespace v2x
