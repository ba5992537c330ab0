#include "doctest.h"

#include "v2x/channel.hpp"
#include "v2x/errors.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

using namespace v2x;

namespace {

Topology line_of(std::vector<double> positions, bool wraparound = false)
{
    Topology t;
    t.positions_m = std::move(positions);
    t.wraparound = wraparound;
    return t;
}

double mean_gap(const Topology& t)
{
    return t.span_m() / static_cast<double>(t.size() - 1);
}

} // namespace

TEST_CASE("path loss at reference points")
{
    PropagationConfig cfg;
    CHECK(path_loss_db(1.0, cfg) == doctest::Approx(46.7));
    CHECK(path_loss_db(10.0, cfg) == doctest::Approx(76.7));
    // 46.7 + 30 * log10(200) = 46.7 + 30 * 2.30103
    CHECK(path_loss_db(200.0, cfg) == doctest::Approx(115.7309).epsilon(1e-5));
    CHECK(path_loss_db(0.5, cfg) == doctest::Approx(46.7));
    CHECK_THROWS_AS(path_loss_db(0.0, cfg), DomainError);
}

TEST_CASE("path loss strictly increases beyond the reference distance")
{
    PropagationConfig cfg;
    double prev = path_loss_db(1.0, cfg);
    for (double d = 1.5; d < 2000.0; d *= 1.3) {
        const double pl = path_loss_db(d, cfg);
        CHECK(pl > prev);
        prev = pl;
    }
}

TEST_CASE("received power examples and symmetry")
{
    PropagationConfig cfg;
    const auto topo = line_of({0.0, 1.0, 200.0});
    CHECK(rx_power_dbm(0, 1, topo, cfg) == doctest::Approx(-23.7));
    CHECK(rx_power_dbm(0, 2, topo, cfg) == doctest::Approx(-92.7309).epsilon(1e-5));
    CHECK(rx_power_dbm(1, 2, topo, cfg) == doctest::Approx(rx_power_dbm(2, 1, topo, cfg)));
    CHECK_THROWS_AS(rx_power_dbm(1, 1, topo, cfg), UsageError);
}

TEST_CASE("noise power")
{
    PropagationConfig cfg;
    CHECK(noise_power_dbm(cfg, 1) == doctest::Approx(-103.4370).epsilon(1e-5));
    CHECK(noise_power_dbm(cfg, 2) - noise_power_dbm(cfg, 1) ==
          doctest::Approx(10.0 * std::log10(2.0)));
    PropagationConfig floor;
    floor.noise_figure_db = 0.0;
    floor.subchannel_bandwidth_hz = 1.0;
    CHECK(noise_power_dbm(floor, 1) == doctest::Approx(-174.0));
    CHECK_THROWS_AS(noise_power_dbm(cfg, 0), UsageError);
}

TEST_CASE("sinr examples")
{
    CHECK(sinr_db(-90.0, {}, -103.44) == doctest::Approx(13.44));
    const std::vector<double> one{-70.0};
    CHECK(sinr_db(-70.0, one, -300.0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("sinr is monotone in target and interferers")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> power(-120.0, -60.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double noise = -103.44;
        const double target = power(rng);
        std::vector<double> intf(static_cast<std::size_t>(trial % 4));
        for (auto& p : intf) {
            p = power(rng);
        }
        const double base = sinr_db(target, intf, noise);
        CHECK(sinr_db(target + 0.5, intf, noise) > base);
        auto more = intf;
        more.push_back(power(rng));
        CHECK(sinr_db(target, more, noise) < base);
        if (!intf.empty()) {
            auto louder = intf;
            louder[0] += 1.0;
            CHECK(sinr_db(target, louder, noise) < base);
        }
    }
}

TEST_CASE("generated topology is deterministic and ordered")
{
    const auto a = generate_topology(200, 10.0, 42);
    const auto b = generate_topology(200, 10.0, 42);
    const auto c = generate_topology(200, 10.0, 43);
    CHECK(a.positions_m == b.positions_m);
    CHECK(a.positions_m != c.positions_m);
    CHECK(a.positions_m.front() == 0.0);
    CHECK_NOTHROW(a.validate());
}

TEST_CASE("generated gaps have the configured mean")
{
    // Exponential gaps: sample mean has relative standard error 1/sqrt(n).
    const auto small = generate_topology(200, 10.0, 5);
    CHECK(std::abs(mean_gap(small) / 10.0 - 1.0) < 0.15);
    const auto large = generate_topology(10000, 10.0, 5);
    CHECK(std::abs(mean_gap(large) / 10.0 - 1.0) < 0.02);

    const auto pair = generate_topology(2, 10.0, 9);
    CHECK(pair.size() == 2);
    CHECK(pair.positions_m[1] > 0.0);

    // Coefficient of variation of an exponential is 1.
    std::vector<double> gaps;
    for (std::size_t i = 1; i < large.size(); ++i) {
        gaps.push_back(large.positions_m[i] - large.positions_m[i - 1]);
    }
    const double m = std::accumulate(gaps.begin(), gaps.end(), 0.0) / gaps.size();
    double var = 0.0;
    for (double g : gaps) {
        var += (g - m) * (g - m);
    }
    var /= static_cast<double>(gaps.size() - 1);
    CHECK(std::sqrt(var) / m == doctest::Approx(1.0).epsilon(0.05));

    CHECK_THROWS_AS(generate_topology(1, 10.0, 1), ConfigError);
    CHECK_THROWS_AS(generate_topology(5, 0.0, 1), ConfigError);
}

TEST_CASE("wraparound distance")
{
    const auto flat = line_of({0.0, 10.0, 20.0, 30.0});
    const auto ring = line_of({0.0, 10.0, 20.0, 30.0}, true);
    CHECK(ring.ring_m() == doctest::Approx(40.0));
    CHECK(flat.distance_m(0, 3) == doctest::Approx(30.0));
    CHECK(ring.distance_m(0, 3) == doctest::Approx(10.0));
    CHECK(ring.distance_m(0, 2) == doctest::Approx(20.0));
    CHECK(ring.distance_m(1, 2) == doctest::Approx(10.0));

    // End UEs never coincide, so every pair keeps a finite received power.
    const auto topo = generate_topology(50, 10.0, 8, true);
    PropagationConfig cfg;
    for (UeId a = 0; a < 50; ++a) {
        for (UeId b = 0; b < 50; ++b) {
            if (a != b) {
                CHECK(topo.distance_m(a, b) > 0.0);
                CHECK(topo.distance_m(a, b) <= topo.ring_m() / 2.0 + 1e-9);
            }
        }
    }
    CHECK_NOTHROW(ChannelModel(topo, cfg, 200.0));
}

TEST_CASE("topology text round trip")
{
    const auto topo = generate_topology(30, 10.0, 17);
    std::stringstream ss;
    write_topology(ss, topo);
    const auto back = read_topology(ss);
    CHECK(back.positions_m == topo.positions_m);

    std::istringstream gap("0 0\n2 5\n");
    CHECK_THROWS_AS(read_topology(gap), ConfigError);
    std::istringstream unordered("# c\n0 5\n1 4\n");
    CHECK_THROWS_AS(read_topology(unordered), ConfigError);
    std::istringstream junk("0 zero\n");
    CHECK_THROWS_AS(read_topology(junk), ConfigError);
}

TEST_CASE("channel model caches powers and relevance sets")
{
    PropagationConfig cfg;
    const auto topo = line_of({0.0, 100.0, 200.0, 450.0});
    const ChannelModel ch(topo, cfg, 200.0);
    CHECK(ch.rx_power_dbm(0, 2) == doctest::Approx(rx_power_dbm(0, 2, topo, cfg)));
    CHECK(ch.rx_power_mw(0, 2) == doctest::Approx(dbm_to_mw(rx_power_dbm(0, 2, topo, cfg))));
    CHECK(ch.rx_power_mw(1, 1) == 0.0);
    CHECK(ch.noise_mw(1) == doctest::Approx(dbm_to_mw(noise_power_dbm(cfg, 1))));

    const auto rel0 = ch.relevance_set(0);
    CHECK(std::vector<UeId>(rel0.begin(), rel0.end()) == std::vector<UeId>{1, 2});
    const auto rel3 = ch.relevance_set(3);
    CHECK(rel3.empty());
    CHECK(ch.in_relevance_area(0, 2));
    CHECK_FALSE(ch.in_relevance_area(0, 0));
    CHECK_FALSE(ch.in_relevance_area(2, 3));
}
