#include "doctest.h"

#include "v2x/errors.hpp"
#include "v2x/selection.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

using namespace v2x;

namespace {

SensingEntry entry(Slot slot, int subchannel, double rsrp, UeId source = 9)
{
    return SensingEntry{ResourceBlockRef{slot, subchannel, 1}, rsrp, source};
}

double chi_square_critical(int dof, double alpha)
{
    return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), alpha));
}

} // namespace

TEST_CASE("selection window bounds")
{
    SelectionConfig cfg;
    const auto w = selection_window(100, cfg);
    CHECK(w.first == 101);
    CHECK(w.last == 120);
    CHECK(w.size() == 20);
    const auto cut = selection_window(100, cfg, Slot{110});
    CHECK(cut.last == 110);
    CHECK(cut.size() == 10);
    CHECK(selection_window(100, cfg, Slot{90}).size() == 0);
}

TEST_CASE("empty database leaves every position free")
{
    SelectionConfig cfg;
    GridConfig grid;
    const auto map = build_exclusion_map(SensingDatabase{}, {1, 20}, cfg, grid);
    CHECK(map.total_positions() == 80);
    CHECK(map.free_count() == 80);
    CHECK(map.escalations == 0);
    CHECK(map.threshold_dbm == cfg.p_th_dbm);
}

TEST_CASE("a strong reservation blocks exactly its position")
{
    SelectionConfig cfg;
    GridConfig grid;
    SensingDatabase db;
    db.add(entry(5, 0, -80.0));
    db.add(entry(6, 1, -115.0));
    db.add(entry(40, 2, -60.0));
    const auto map = build_exclusion_map(db, {1, 20}, cfg, grid);
    CHECK_FALSE(map.is_free(5, 0));
    CHECK(map.is_free(6, 1));
    CHECK(map.free_count() == 79);
}

TEST_CASE("wide transmissions are blocked by any overlapping reservation")
{
    SelectionConfig cfg;
    GridConfig grid;
    grid.subchannels_per_tx = 2;
    SensingDatabase db;
    db.add(entry(3, 2, -80.0));
    const auto map = build_exclusion_map(db, {1, 4}, cfg, grid);
    CHECK(map.num_positions() == 3);
    CHECK(map.is_free(3, 0));
    CHECK_FALSE(map.is_free(3, 1));
    CHECK_FALSE(map.is_free(3, 2));
}

TEST_CASE("threshold escalates until enough positions are free")
{
    SelectionConfig cfg;
    GridConfig grid;
    SensingDatabase db;
    for (Slot s = 1; s <= 20; ++s) {
        for (int c = 0; c < 4; ++c) {
            db.add(entry(s, c, -80.0));
        }
    }
    const auto map = build_exclusion_map(db, {1, 20}, cfg, grid);
    // Independent trace of the rule: raise by the step while -80 is above the threshold.
    int expected = 0;
    for (double th = cfg.p_th_dbm; -80.0 > th; th += cfg.escalation_step_db) {
        ++expected;
    }
    CHECK(expected == 10);
    CHECK(map.escalations == expected);
    CHECK(map.threshold_dbm == doctest::Approx(-80.0));
    CHECK(map.free_count() == 80);
}

TEST_CASE("escalation stops as soon as the free share reaches the target")
{
    SelectionConfig cfg;
    GridConfig grid;
    SensingDatabase db;
    // 70 of 80 positions at -100 dBm, the rest at -90 dBm: one step frees nothing,
    // four steps (-98) free the -100 group, giving 70/80 free.
    for (Slot s = 1; s <= 20; ++s) {
        for (int c = 0; c < 4; ++c) {
            const bool strong = (s - 1) * 4 + c >= 70;
            db.add(entry(s, c, strong ? -90.0 : -100.0));
        }
    }
    const auto map = build_exclusion_map(db, {1, 20}, cfg, grid);
    CHECK(map.escalations == 4);
    CHECK(map.free_count() == 70);
}

TEST_CASE("duplicate reservations collapse to the strongest")
{
    SelectionConfig cfg;
    GridConfig grid;
    SensingDatabase db;
    db.add(entry(4, 1, -120.0, 1));
    db.add(entry(4, 1, -100.0, 2));
    const auto map = build_exclusion_map(db, {1, 20}, cfg, grid);
    CHECK_FALSE(map.is_free(4, 1));
}

TEST_CASE("ingest_sci stores reservations only and expiry drops past slots")
{
    SensingDatabase db;
    SciMessage sci;
    sci.source_ue = 3;
    sci.current = {10, 0, 1};
    sci.reservations.push_back({12, 1, 1});
    sci.reservations.push_back({15, 2, 1});
    ingest_sci(db, sci, -95.0);
    REQUIRE(db.size() == 2);
    CHECK(db.entries()[0].block.slot == 12);
    CHECK(db.entries()[0].rsrp_dbm == -95.0);
    CHECK(db.entries()[1].source == 3);

    db.expire_through(12);
    REQUIRE(db.size() == 1);
    CHECK(db.entries()[0].block.slot == 15);
    db.expire_through(20);
    CHECK(db.empty());
}

TEST_CASE("SRS draws distinct slots uniformly from the window")
{
    SelectionConfig cfg;
    GridConfig grid;
    Rng rng(5);
    const SelectionWindow w{1, 20};
    const int trials = 40000;
    std::map<Slot, int> slot_hits;
    std::vector<int> sub_hits(4, 0);
    for (int i = 0; i < trials; ++i) {
        const auto out = select_srs(SensingDatabase{}, w, cfg, grid, rng, 1);
        REQUIRE(out.ok());
        const auto& a = out.schedule->attempts;
        REQUIRE(a.size() == 5);
        CHECK_FALSE(check_schedule(*out.schedule, w.first, w.last, grid).has_value());
        for (const auto& b : a) {
            ++slot_hits[b.slot];
            ++sub_hits[b.first_subchannel];
        }
    }
    // Each slot is included with probability K / window.
    const double expected = trials * 5.0 / 20.0;
    double chi2 = 0.0;
    for (Slot s = 1; s <= 20; ++s) {
        chi2 += std::pow(slot_hits[s] - expected, 2) / expected;
    }
    CHECK(chi2 < chi_square_critical(19, 1e-3));

    const double per_sub = trials * 5.0 / 4.0;
    double chi2_sub = 0.0;
    for (int c : sub_hits) {
        chi2_sub += std::pow(c - per_sub, 2) / per_sub;
    }
    CHECK(chi2_sub < chi_square_critical(3, 1e-3));
}

TEST_CASE("SRS avoids excluded positions and reports infeasible windows")
{
    SelectionConfig cfg;
    GridConfig grid;
    Rng rng(8);
    SensingDatabase db;
    for (Slot s = 1; s <= 15; ++s) {
        for (int c = 0; c < 4; ++c) {
            db.add(entry(s, c, -60.0));
        }
    }
    db.add(entry(16, 0, -60.0));
    cfg.free_fraction_target = 0.0;
    for (int i = 0; i < 200; ++i) {
        const auto out = select_srs(db, {1, 20}, cfg, grid, rng);
        REQUIRE(out.ok());
        for (const auto& b : out.schedule->attempts) {
            CHECK(b.slot >= 16);
            CHECK_FALSE((b.slot == 16 && b.first_subchannel == 0));
        }
    }
    cfg.k = 6;
    CHECK_FALSE(select_srs(db, {1, 20}, cfg, grid, rng).ok());
    cfg.k = 5;
    const auto short_window = select_srs(db, {1, 4}, cfg, grid, rng);
    CHECK_FALSE(short_window.ok());
    CHECK_FALSE(short_window.failure.empty());
}

TEST_CASE("QFA takes the earliest free slot first")
{
    SelectionConfig cfg;
    cfg.algorithm = Algorithm::QFA;
    GridConfig grid;
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const auto out = select_resources(SensingDatabase{}, selection_window(40, cfg), cfg,
                                          grid, rng);
        REQUIRE(out.ok());
        CHECK(out.schedule->attempts.front().slot == 41);
        CHECK(out.schedule->k() == 5);
    }

    SensingDatabase db;
    for (int c = 0; c < 4; ++c) {
        db.add(entry(41, c, -70.0));
    }
    db.add(entry(42, 0, -70.0));
    db.add(entry(42, 1, -70.0));
    db.add(entry(42, 3, -70.0));
    for (int i = 0; i < 100; ++i) {
        const auto out = select_resources(db, selection_window(40, cfg), cfg, grid, rng);
        REQUIRE(out.ok());
        CHECK(out.schedule->attempts.front().slot == 42);
        CHECK(out.schedule->attempts.front().first_subchannel == 2);
        for (std::size_t j = 1; j < out.schedule->attempts.size(); ++j) {
            CHECK(out.schedule->attempts[j].slot > 42);
        }
    }
}

TEST_CASE("RA ignores the sensing database")
{
    SelectionConfig cfg;
    GridConfig grid;
    SensingDatabase db;
    for (Slot s = 1; s <= 20; ++s) {
        for (int c = 0; c < 4; ++c) {
            db.add(entry(s, c, -50.0));
        }
    }
    Rng a(77);
    Rng b(77);
    for (int i = 0; i < 50; ++i) {
        const auto with = select_ra(db, {1, 20}, cfg, grid, a);
        const auto without = select_ra(SensingDatabase{}, {1, 20}, cfg, grid, b);
        REQUIRE(with.ok());
        CHECK(with.schedule->attempts == without.schedule->attempts);
        CHECK(with.escalations == 0);
    }
}

TEST_CASE("two RA users with one attempt collide with probability 1/window")
{
    SelectionConfig cfg;
    cfg.k = 1;
    GridConfig grid;
    grid.num_subchannels = 1;

    // Enumeration: both pick one of 20 slots uniformly.
    int same = 0;
    for (int x = 0; x < 20; ++x) {
        for (int y = 0; y < 20; ++y) {
            same += x == y ? 1 : 0;
        }
    }
    const double exact = same / 400.0;
    CHECK(exact == doctest::Approx(1.0 / 20.0));

    Rng rng(12);
    const int trials = 200000;
    int collisions = 0;
    for (int i = 0; i < trials; ++i) {
        const auto u = select_ra(SensingDatabase{}, {1, 20}, cfg, grid, rng);
        const auto v = select_ra(SensingDatabase{}, {1, 20}, cfg, grid, rng);
        collisions += u.schedule->attempts[0] == v.schedule->attempts[0] ? 1 : 0;
    }
    const double p = static_cast<double>(collisions) / trials;
    const double sigma = std::sqrt(exact * (1.0 - exact) / trials);
    CHECK(std::abs(p - exact) < 4.0 * sigma);
}

TEST_CASE("own slots are never selected again")
{
    SelectionConfig cfg;
    GridConfig grid;
    Rng rng(31);
    const std::vector<Slot> own{3, 7, 8, 15};
    for (auto alg : {Algorithm::RA, Algorithm::SRS, Algorithm::QFA}) {
        cfg.algorithm = alg;
        for (int i = 0; i < 300; ++i) {
            const auto out = select_resources(SensingDatabase{}, {1, 20}, cfg, grid, rng, 4, own);
            REQUIRE(out.ok());
            CHECK(out.schedule->packet_id == 4);
            for (const auto& b : out.schedule->attempts) {
                CHECK(std::find(own.begin(), own.end(), b.slot) == own.end());
            }
        }
    }
    cfg.algorithm = Algorithm::QFA;
    const std::vector<Slot> first_taken{1, 2};
    const auto q = select_resources(SensingDatabase{}, {1, 20}, cfg, grid, rng, 0, first_taken);
    CHECK(q.schedule->attempts.front().slot == 3);
}

TEST_CASE("SelectionConfig validation")
{
    GridConfig grid;
    SelectionConfig cfg;
    CHECK_NOTHROW(cfg.validate(grid));
    cfg.k = 21;
    CHECK_THROWS_AS(cfg.validate(grid), ConfigError);
    cfg = SelectionConfig{};
    cfg.k = 0;
    CHECK_THROWS_AS(cfg.validate(grid), ConfigError);
    cfg = SelectionConfig{};
    cfg.t1 = 25;
    CHECK_THROWS_AS(cfg.validate(grid), ConfigError);
    cfg = SelectionConfig{};
    cfg.t2 = 40;
    CHECK_THROWS_AS(cfg.validate(grid), ConfigError);
    CHECK(parse_algorithm("QFA") == Algorithm::QFA);
    CHECK_FALSE(parse_algorithm("qfa").has_value());
}
