#include "v2x/channel.hpp"

#include "v2x/errors.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace v2x {

namespace {

constexpr double kThermalNoiseDbmPerHz = -174.0;

} // namespace

double Topology::span_m() const
{
    return positions_m.empty() ? 0.0 : positions_m.back() - positions_m.front();
}

double Topology::ring_m() const
{
    const auto n = static_cast<double>(positions_m.size());
    return n < 2 ? 0.0 : span_m() * n / (n - 1.0);
}

double Topology::distance_m(UeId a, UeId b) const
{
    const double d = std::abs(positions_m.at(a) - positions_m.at(b));
    if (!wraparound) {
        return d;
    }
    return std::min(d, ring_m() - d);
}

void Topology::validate() const
{
    if (positions_m.size() < 2) {
        throw ConfigError("topology needs at least two UEs");
    }
    for (std::size_t i = 1; i < positions_m.size(); ++i) {
        if (!(positions_m[i] > positions_m[i - 1])) {
            throw ConfigError("topology positions must be strictly increasing (UE " +
                              std::to_string(i) + ")");
        }
    }
}

void PropagationConfig::validate() const
{
    if (!(l0_db > 0.0) || !(d0_m > 0.0) || !(path_loss_exponent > 0.0)) {
        throw ConfigError("radio.l0_db, radio.d0_m and radio.path_loss_exponent must be positive");
    }
    if (!(subchannel_bandwidth_hz > 0.0)) {
        throw ConfigError("radio.subchannel_bandwidth_hz must be positive");
    }
}

Topology generate_topology(std::size_t num_ues, double mean_gap_m, std::uint64_t seed,
                           bool wraparound)
{
    if (num_ues < 2) {
        throw ConfigError("generate_topology: need at least two UEs");
    }
    if (!(mean_gap_m > 0.0)) {
        throw ConfigError("generate_topology: mean gap must be positive");
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      0x70b0u};
    std::mt19937_64 rng(seq);
    std::exponential_distribution<double> gap(1.0 / mean_gap_m);

    Topology topo;
    topo.wraparound = wraparound;
    topo.positions_m.resize(num_ues);
    topo.positions_m[0] = 0.0;
    for (std::size_t i = 1; i < num_ues; ++i) {
        double g = gap(rng);
        // A zero gap would make two UEs coincide and break strict ordering.
        while (!(g > 0.0)) {
            g = gap(rng);
        }
        topo.positions_m[i] = topo.positions_m[i - 1] + g;
    }
    return topo;
}

double path_loss_db(double distance_m, const PropagationConfig& cfg)
{
    if (!(distance_m > 0.0)) {
        throw DomainError("path_loss_db: distance must be positive");
    }
    const double d = std::max(distance_m, cfg.d0_m);
    return cfg.l0_db + 10.0 * cfg.path_loss_exponent * std::log10(d / cfg.d0_m);
}

double rx_power_dbm(UeId tx, UeId rx, const Topology& topo, const PropagationConfig& cfg)
{
    if (tx == rx) {
        throw UsageError("rx_power_dbm: transmitter and receiver are the same UE");
    }
    return cfg.tx_power_dbm - path_loss_db(topo.distance_m(tx, rx), cfg);
}

double noise_power_dbm(const PropagationConfig& cfg, int width)
{
    if (width < 1) {
        throw UsageError("noise_power_dbm: width must be >= 1");
    }
    return kThermalNoiseDbmPerHz + 10.0 * std::log10(width * cfg.subchannel_bandwidth_hz) +
           cfg.noise_figure_db;
}

double sinr_db(double target_dbm, std::span<const double> interferers_dbm, double noise_dbm)
{
    double denom = dbm_to_mw(noise_dbm);
    for (double p : interferers_dbm) {
        denom += dbm_to_mw(p);
    }
    return 10.0 * std::log10(dbm_to_mw(target_dbm) / denom);
}

void write_topology(std::ostream& os, const Topology& topo)
{
    os << "# ue_id position_m\n";
    os.precision(17);
    for (std::size_t i = 0; i < topo.size(); ++i) {
        os << i << ' ' << topo.positions_m[i] << '\n';
    }
}

Topology read_topology(std::istream& is, bool wraparound)
{
    Topology topo;
    topo.wraparound = wraparound;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::istringstream ls(line);
        std::size_t id = 0;
        double pos = 0.0;
        if (!(ls >> id >> pos)) {
            throw ConfigError("topology file line " + std::to_string(lineno) +
                              ": expected `ue_id position_m`");
        }
        if (id != topo.positions_m.size()) {
            throw ConfigError("topology file line " + std::to_string(lineno) +
                              ": UE ids must be consecutive from 0");
        }
        topo.positions_m.push_back(pos);
    }
    topo.validate();
    return topo;
}

ChannelModel::ChannelModel(Topology topo, const PropagationConfig& cfg, double relevance_radius_m)
    : topo_(std::move(topo)),
      cfg_(cfg),
      relevance_radius_m_(relevance_radius_m),
      n_(topo_.size()),
      rx_mw_(n_ * n_, 0.0),
      rx_dbm_(n_ * n_, -std::numeric_limits<double>::infinity()),
      relevant_(n_),
      noise_mw_per_subchannel_(dbm_to_mw(noise_power_dbm(cfg, 1)))
{
    topo_.validate();
    cfg_.validate();
    for (std::size_t tx = 0; tx < n_; ++tx) {
        for (std::size_t rx = 0; rx < n_; ++rx) {
            if (tx == rx) {
                continue;
            }
            const auto t = static_cast<UeId>(tx);
            const auto r = static_cast<UeId>(rx);
            const double p = v2x::rx_power_dbm(t, r, topo_, cfg_);
            rx_dbm_[tx * n_ + rx] = p;
            rx_mw_[tx * n_ + rx] = dbm_to_mw(p);
            if (topo_.distance_m(t, r) <= relevance_radius_m_) {
                relevant_[tx].push_back(r);
            }
        }
    }
}

bool ChannelModel::in_relevance_area(UeId source, UeId rx) const
{
    return source != rx && topo_.distance_m(source, rx) <= relevance_radius_m_;
}

} // namespace v2x
