#include "doctest.h"

#include "scenarios.hpp"

#include "v2x/engine.hpp"
#include "v2x/errors.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <vector>

using namespace v2x;

namespace {

ScenarioConfig short_run(double rate = 2.0)
{
    ScenarioConfig cfg;
    cfg.topology.num_ues = 60;
    cfg.traffic.per_ue_rate_pps = rate;
    cfg.traffic.warmup_s = 0.2;
    cfg.traffic.duration_s = 2.0;
    return cfg;
}

/// Attempt slots per (ue, packet) seen on the air.
using AirLog = std::map<std::pair<UeId, PacketId>, std::vector<Slot>>;

AirLog record_air(const ScenarioConfig& cfg, std::uint64_t seed)
{
    AirLog log;
    RunHooks hooks;
    hooks.on_slot = [&log](Slot slot, std::span<const SlotTransmission> txs,
                           std::span<const SlotReceptionReport>) {
        for (const auto& t : txs) {
            log[{t.source, t.sci.packet_id}].push_back(slot);
        }
    };
    run_simulation(cfg, seed, hooks);
    return log;
}

} // namespace

TEST_CASE("zero load produces no data")
{
    auto cfg = short_run(0.0);
    const auto r = run_simulation(cfg, 1);
    CHECK(r.packets == 0);
    CHECK_FALSE(r.has_data);
    CHECK(r.invariant_violations == 0);
}

TEST_CASE("a lone packet between two close UEs is delivered")
{
    ScenarioConfig cfg;
    Topology topo;
    topo.positions_m = {0.0, 10.0};
    cfg.topology.fixed = topo;
    cfg.topology.num_ues = 2;
    cfg.selection.k = 1;
    cfg.traffic.per_ue_rate_pps = 0.0;
    cfg.traffic.warmup_s = 0.0;
    cfg.traffic.duration_s = 0.1;
    cfg.traffic.scripted.push_back({0, 0.01});
    std::ostringstream trace;
    RunHooks hooks;
    hooks.reception_trace = &trace;
    const auto r = run_simulation(cfg, 3, hooks);
    CHECK(r.has_data);
    CHECK(r.packets == 1);
    CHECK(r.receiver_observations == 1);
    CHECK(r.plr == 0.0);

    std::istringstream in(trace.str());
    Slot slot = 0;
    UeId rx = 0, src = 0;
    PacketId packet = 0;
    std::string outcome;
    double pscch = 0.0, pssch = 0.0;
    in >> slot >> rx >> src >> packet >> outcome >> pscch >> pssch;
    REQUIRE(static_cast<bool>(in));
    CHECK(rx == 1);
    CHECK(src == 0);
    CHECK(outcome == "ok");
    // 23 - 76.7 dBm against -103.44 dBm noise.
    CHECK(pssch == doctest::Approx(23.0 - 76.7 + 103.437).epsilon(1e-3));
}

TEST_CASE("micro-instance PLR matches exhaustive enumeration")
{
    const double exact = testing::micro_instance_enumeration();
    CHECK(exact == doctest::Approx(0.36));

    const auto cfg = testing::micro_instance();
    const int trials = 4000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < trials; ++i) {
        const auto r = run_simulation(cfg, static_cast<std::uint64_t>(i) + 1);
        REQUIRE(r.has_data);
        REQUIRE(r.packets == 3);
        sum += r.plr;
        sum_sq += r.plr * r.plr;
    }
    const double mean = sum / trials;
    const double sd = std::sqrt((sum_sq - trials * mean * mean) / (trials - 1));
    CHECK(std::abs(mean - exact) < 4.0 * sd / std::sqrt(trials));
}

TEST_CASE("runs are reproducible from the seed")
{
    auto cfg = short_run();
    cfg.selection.algorithm = Algorithm::QFA;
    const auto a = run_simulation(cfg, 9);
    const auto b = run_simulation(cfg, 9);
    const auto c = run_simulation(cfg, 10);
    CHECK(a.plr == b.plr);
    CHECK(a.packets == b.packets);
    CHECK(a.lost_observations == b.lost_observations);
    CHECK(a.first_attempt_histogram == b.first_attempt_histogram);
    CHECK(a.packets != c.packets);
}

TEST_CASE("no invariant violations across variants")
{
    for (auto alg : {Algorithm::RA, Algorithm::SRS, Algorithm::QFA}) {
        for (auto dec : {Decoder::MPPD, Decoder::IPD}) {
            for (auto dup : {Duplex::HD, Duplex::SBFD, Duplex::IBFD}) {
                auto cfg = short_run(20.0);
                cfg.selection.algorithm = alg;
                cfg.phy.decoder = dec;
                cfg.phy.duplex = dup;
                const auto r = run_simulation(cfg, 4);
                CAPTURE(to_string(alg));
                CAPTURE(to_string(dec));
                CAPTURE(to_string(dup));
                CHECK(r.invariant_violations == 0);
                CHECK(r.first_violation.empty());
                CHECK(r.has_data);
                CHECK(r.plr > 0.0);
                CHECK(r.plr < 1.0);
            }
        }
    }
}

TEST_CASE("attempts stay in the window and a UE sends once per slot")
{
    auto cfg = short_run(30.0);
    const auto air = record_air(cfg, 2);
    std::map<UeId, std::set<Slot>> busy;
    for (const auto& [key, slots] : air) {
        CHECK(slots.size() <= static_cast<std::size_t>(cfg.selection.k));
        CHECK(slots.back() - slots.front() < cfg.selection.window_size());
        for (Slot s : slots) {
            CHECK(busy[key.first].insert(s).second);
        }
    }
}

TEST_CASE("FIFO service waits for the previous packet, concurrent service does not")
{
    ScenarioConfig cfg;
    cfg.topology.num_ues = 10;
    cfg.traffic.per_ue_rate_pps = 0.0;
    cfg.traffic.warmup_s = 0.0;
    cfg.traffic.duration_s = 0.05;
    cfg.traffic.scripted = {{0, 1e-3}, {0, 1.5e-3}};

    int interleaved = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        cfg.traffic.service = ServicePolicy::Fifo;
        const auto fifo = record_air(cfg, seed);
        std::vector<std::vector<Slot>> packets;
        for (const auto& [key, slots] : fifo) {
            packets.push_back(slots);
        }
        if (packets.size() == 2) {
            CHECK(packets[1].front() > packets[0].back());
        }

        cfg.traffic.service = ServicePolicy::Concurrent;
        const auto conc = record_air(cfg, seed);
        REQUIRE(conc.size() == 2);
        const auto& first = conc.begin()->second;
        const auto& second = std::next(conc.begin())->second;
        CHECK(first.size() == 5);
        CHECK(second.size() == 5);
        // Arrivals at slots 2 and 3: windows start one slot later.
        CHECK(first.front() >= 3);
        CHECK(second.front() >= 4);
        CHECK(second.back() <= 23);
        interleaved += second.front() < first.back() ? 1 : 0;
    }
    CHECK(interleaved > 0);
}

TEST_CASE("first-attempt delay formula")
{
    CHECK(mean_first_attempt_delay_formula(5, 1, 20) == doctest::Approx(2.5));
    CHECK(mean_first_attempt_delay_formula(20, 1, 20) == doctest::Approx(0.0));
    CHECK(mean_first_attempt_delay_formula(1, 1, 20) == doctest::Approx(9.5));
    CHECK_THROWS_AS(mean_first_attempt_delay_formula(21, 1, 20), DomainError);
    CHECK_THROWS_AS(mean_first_attempt_delay_formula(0, 1, 20), DomainError);

    // Independent oracle: expected minimum of K distinct uniform draws from 0..W-1.
    for (int k = 1; k <= 20; ++k) {
        const int w = 20;
        double expected = 0.0;
        // P(min >= m) = C(w - m, k) / C(w, k).
        for (int m = 1; m <= w - k; ++m) {
            double ratio = 1.0;
            for (int i = 0; i < k; ++i) {
                ratio *= static_cast<double>(w - m - i) / (w - i);
            }
            expected += ratio;
        }
        CHECK(mean_first_attempt_delay_formula(k, 1, 20) == doctest::Approx(expected));
    }
}

TEST_CASE("simulated first-attempt delay follows the formula at light load")
{
    auto cfg = short_run(0.5);
    cfg.topology.num_ues = 200;
    cfg.traffic.duration_s = 10.0;
    const auto r = run_simulation(cfg, 6);
    CHECK(r.mean_first_attempt_delay ==
          doctest::Approx(mean_first_attempt_delay_formula(5, 1, 20)).epsilon(0.05));
}

TEST_CASE("metrics accumulator")
{
    MetricsAccumulator m(3);
    m.record_packet(0, 4, 3);
    m.record_packet(0, 4, 4);
    m.record_packet(1, 0, 0);
    CHECK(m.ue_plr(0) == doctest::Approx(1.0 / 8.0));
    CHECK_FALSE(m.ue_plr(1).has_value());
    CHECK_FALSE(m.ue_plr(2).has_value());
    m.record_first_attempt(2);
    m.record_first_attempt(4);
    RunResult r;
    m.fill(r);
    CHECK(r.has_data);
    CHECK(r.plr == doctest::Approx(0.125));
    CHECK(r.packets == 3);
    CHECK(r.mean_first_attempt_delay == doctest::Approx(3.0));
}

TEST_CASE("infeasible scenarios are rejected before the loop")
{
    ScenarioConfig cfg;
    cfg.selection.k = 25;
    CHECK_THROWS_AS(run_simulation(cfg, 1), ConfigError);
    cfg = ScenarioConfig{};
    cfg.traffic.per_ue_rate_pps = -1.0;
    CHECK_THROWS_AS(run_simulation(cfg, 1), ConfigError);
    cfg = ScenarioConfig{};
    cfg.traffic.scripted.push_back({500, 0.1});
    CHECK_THROWS_AS(run_simulation(cfg, 1), ConfigError);
    CHECK(parse_service_policy(to_string(ServicePolicy::Fifo)) == ServicePolicy::Fifo);
}
