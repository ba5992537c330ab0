#include "doctest.h"

#include "v2x/config.hpp"
#include "v2x/experiment.hpp"

#include <sstream>
#include <string>

using namespace v2x;

namespace {

Config config_of(std::initializer_list<std::pair<std::string, std::string>> kv)
{
    const auto r = validate_config(KeyValues(kv));
    REQUIRE_MESSAGE(r.ok(), r.summary());
    return *r.config;
}

std::string csv_of(const ExperimentOutput& out)
{
    std::ostringstream os;
    write_csv(os, out.rows);
    return os.str();
}

} // namespace

TEST_CASE("preset expansion sizes")
{
    const auto plr = expand_experiment(config_of({{"experiment.preset", "plr_vs_load"}}));
    CHECK(plr.cells.size() == 3 * 11);
    CHECK(plr.skipped.empty());
    CHECK(plr.cells.front().variant.algorithm == Algorithm::RA);
    CHECK(plr.cells.front().k == 5);
    CHECK(plr.cells.front().load == 1.0);

    const auto cap = expand_experiment(config_of({{"experiment.preset", "capacity_vs_k"}}));
    CHECK(cap.cells.size() == 7 * 8 * 2);
    CHECK(cap.cells.front().variant == Variant{Algorithm::SRS, Decoder::MPPD, Duplex::HD});
    CHECK(cap.cells.front().plr_target == 0.1);

    const auto narrowed = expand_experiment(config_of({{"experiment.preset", "capacity_vs_k"},
                                                       {"experiment.algorithms", "QFA"},
                                                       {"experiment.plr_targets", "0.1"},
                                                       {"experiment.k", "1-8"}}));
    CHECK(narrowed.cells.size() == 8);

    const auto custom = expand_experiment(config_of({}));
    REQUIRE(custom.cells.size() == 1);
    CHECK(custom.cells[0].load == 1.0);
}

TEST_CASE("invalid combinations are skipped and listed")
{
    const auto cfg = config_of({{"experiment.k", "5,30"}, {"experiment.algorithms", "RA,SRS"}});
    const auto ex = expand_experiment(cfg);
    CHECK(ex.cells.size() == 2);
    REQUIRE(ex.skipped.size() == 2);
    CHECK(ex.skipped[0].find("K=30") != std::string::npos);
}

TEST_CASE("an empty combination set gives a header-only CSV")
{
    const auto out = run_experiment(config_of({{"experiment.k", "30"}}), 1);
    CHECK(out.rows.empty());
    CHECK(out.skipped.size() == 1);
    CHECK(csv_of(out) == csv_header() + "\n");
}

TEST_CASE("CSV quoting round-trips through the splitter")
{
    ExperimentRow row;
    row.variant = Variant{Algorithm::QFA, Decoder::IPD, Duplex::SBFD};
    row.k = 3;
    row.load_pps_per_ue = 2.5;
    row.aggregate_load_pps = 500.0;
    row.plr = 0.01;
    row.capacity_flags = "saturated|monotonicity_violation";
    row.seeds = 5;
    row.config = "a=1;b=\"x,y\"";
    const auto line = csv_row(row);
    const auto fields = split_csv_line(line);
    const auto header = split_csv_line(csv_header());
    REQUIRE(fields.size() == header.size());
    CHECK(header.front() == "version");
    CHECK(fields.front() == kCsvVersion);
    CHECK(fields.back() == row.config);
    CHECK(fields[3] == "IPD");
    CHECK(fields[4] == "SBFD");
    CHECK(fields[6].empty());

    CHECK(split_csv_line("a,\"b,c\",\"d\"\"e\",") ==
          std::vector<std::string>{"a", "b,c", "d\"e", ""});
}

TEST_CASE("PLR rows are reproducible and independent of the worker count")
{
    const auto cfg = config_of({{"topology.num_ues", "40"},
                                {"traffic.warmup_s", "0.1"},
                                {"traffic.duration_s", "0.6"},
                                {"run.seeds", "2"},
                                {"experiment.algorithms", "RA,QFA"},
                                {"experiment.loads", "5,20"}});
    const auto a = run_experiment(cfg, 1);
    const auto b = run_experiment(cfg, 1);
    const auto c = run_experiment(cfg, 3);
    REQUIRE(a.rows.size() == 4);
    CHECK(a.failures.empty());
    CHECK(csv_of(a) == csv_of(b));
    CHECK(csv_of(a) == csv_of(c));

    const auto& r = a.rows[1];
    CHECK(r.variant.algorithm == Algorithm::RA);
    CHECK(r.load_pps_per_ue == 20.0);
    CHECK(r.aggregate_load_pps == doctest::Approx(800.0));
    REQUIRE(r.plr.has_value());
    CHECK(r.plr_ci.has_value());
    CHECK_FALSE(r.capacity.has_value());
    CHECK(r.runtime_s == doctest::Approx(0.6 * 2));
    CHECK(r.config.find("traffic.rate_pps=20;") != std::string::npos);
}

TEST_CASE("capacity rows carry the searched capacity")
{
    const auto cfg = config_of({{"topology.num_ues", "40"},
                                {"traffic.warmup_s", "0.1"},
                                {"traffic.duration_s", "0.6"},
                                {"run.seeds", "2"},
                                {"selection.algorithm", "RA"},
                                {"experiment.plr_targets", "0.05"},
                                {"experiment.load_lo", "2"},
                                {"experiment.load_hi", "64"},
                                {"experiment.relative_tolerance", "0.1"}});
    const auto row = run_cell(cfg, expand_experiment(cfg).cells.at(0));
    REQUIRE(row.capacity.has_value());
    CHECK(row.plr_target == 0.05);
    CHECK(*row.capacity > 2.0);
    CHECK(*row.capacity < 64.0);
    REQUIRE(row.plr.has_value());
    CHECK(*row.plr <= 0.05);
    CHECK(row.load_pps_per_ue == *row.capacity);
    CHECK(row.capacity_flags.find("error") == std::string::npos);
}
