#include "v2x/experiment.hpp"

#include "v2x/errors.hpp"
#include "v2x/stats.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

namespace v2x {

namespace {

const std::vector<double> kDefaultLoadGrid = {1, 2, 4, 6, 8, 12, 16, 24, 32, 48, 64};

std::vector<Variant> product(const std::vector<Algorithm>& algorithms,
                             const std::vector<Decoder>& decoders,
                             const std::vector<Duplex>& duplexes)
{
    std::vector<Variant> out;
    for (auto a : algorithms) {
        for (auto d : decoders) {
            for (auto x : duplexes) {
                out.push_back(Variant{a, d, x});
            }
        }
    }
    return out;
}

template <typename T>
std::vector<T> or_default(const std::vector<T>& given, std::vector<T> fallback)
{
    return given.empty() ? fallback : given;
}

std::vector<Variant> variants_for(const Config& cfg)
{
    const auto& ex = cfg.experiment;
    const auto& phy = cfg.scenario.phy;
    const bool lists_given = !ex.algorithms.empty() || !ex.decoders.empty() || !ex.duplexes.empty();
    switch (ex.preset) {
    case Preset::plr_vs_load:
        return product(or_default(ex.algorithms, {Algorithm::RA, Algorithm::SRS, Algorithm::QFA}),
                       or_default(ex.decoders, {phy.decoder}), or_default(ex.duplexes, {phy.duplex}));
    case Preset::capacity_vs_k:
        if (!lists_given) {
            // Baseline first, then every decoder/duplex combination under QFA.
            auto out = product({Algorithm::QFA}, {Decoder::MPPD, Decoder::IPD},
                               {Duplex::HD, Duplex::SBFD, Duplex::IBFD});
            out.insert(out.begin(), Variant{Algorithm::SRS, Decoder::MPPD, Duplex::HD});
            return out;
        }
        return product(or_default(ex.algorithms, {cfg.scenario.selection.algorithm}),
                       or_default(ex.decoders, {phy.decoder}), or_default(ex.duplexes, {phy.duplex}));
    case Preset::custom:
        break;
    }
    return product(or_default(ex.algorithms, {cfg.scenario.selection.algorithm}),
                   or_default(ex.decoders, {phy.decoder}), or_default(ex.duplexes, {phy.duplex}));
}

std::string describe(const ExperimentCell& c)
{
    std::string s = std::string(to_string(c.variant.algorithm)) + "/" +
                    std::string(to_string(c.variant.decoder)) + "/" +
                    std::string(to_string(c.variant.duplex)) + " K=" + std::to_string(c.k);
    if (c.load) {
        s += " load=" + format_double(*c.load);
    }
    if (c.plr_target) {
        s += " target=" + format_double(*c.plr_target);
    }
    return s;
}

std::string csv_field(const std::string& v)
{
    if (v.find_first_of(",\"\n") == std::string::npos) {
        return v;
    }
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string optional_number(const std::optional<double>& v)
{
    return v ? format_double(*v) : std::string();
}

void add_flag(std::string& flags, std::string_view flag)
{
    flags += (flags.empty() ? "" : "|") + std::string(flag);
}

} // namespace

ExpandedExperiment expand_experiment(const Config& cfg)
{
    const auto& ex = cfg.experiment;
    ExpandedExperiment out;
    const auto variants = variants_for(cfg);

    std::vector<int> ks = ex.k_values;
    if (ks.empty()) {
        ks = ex.preset == Preset::capacity_vs_k ? std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}
                                                : std::vector<int>{cfg.scenario.selection.k};
    }

    std::vector<std::optional<double>> loads;
    std::vector<std::optional<double>> targets;
    if (ex.preset == Preset::capacity_vs_k) {
        for (double t : or_default(ex.plr_targets, {0.1, 1e-3})) {
            targets.emplace_back(t);
        }
    } else if (ex.preset == Preset::plr_vs_load) {
        for (double l : or_default(ex.loads, kDefaultLoadGrid)) {
            loads.emplace_back(l);
        }
    } else if (!ex.loads.empty()) {
        loads.assign(ex.loads.begin(), ex.loads.end());
    } else if (!ex.plr_targets.empty()) {
        targets.assign(ex.plr_targets.begin(), ex.plr_targets.end());
    } else {
        loads.emplace_back(cfg.scenario.traffic.per_ue_rate_pps);
    }

    for (const auto& v : variants) {
        for (int k : ks) {
            ExperimentCell probe{v, k, std::nullopt, std::nullopt};
            try {
                cell_scenario(cfg, probe).validate();
            } catch (const ConfigError& e) {
                out.skipped.push_back(describe(probe) + ": " + e.what());
                continue;
            }
            for (const auto& t : targets) {
                out.cells.push_back(ExperimentCell{v, k, std::nullopt, t});
            }
            for (const auto& l : loads) {
                out.cells.push_back(ExperimentCell{v, k, l, std::nullopt});
            }
        }
    }
    return out;
}

ScenarioConfig cell_scenario(const Config& cfg, const ExperimentCell& cell)
{
    ScenarioConfig s = cfg.scenario;
    s.selection.algorithm = cell.variant.algorithm;
    s.phy.decoder = cell.variant.decoder;
    s.phy.duplex = cell.variant.duplex;
    s.selection.k = cell.k;
    if (cell.load) {
        s.traffic.per_ue_rate_pps = *cell.load;
    }
    return s;
}

ExperimentRow run_cell(const Config& cfg, const ExperimentCell& cell, unsigned jobs)
{
    ExperimentRow row;
    row.preset = cfg.experiment.preset;
    row.variant = cell.variant;
    row.k = cell.k;
    row.plr_target = cell.plr_target;
    row.seeds = cfg.run.num_seeds;

    ScenarioConfig scenario = cell_scenario(cfg, cell);
    const auto seeds = seed_range(cfg.run.first_seed, cfg.run.num_seeds);
    const double run_seconds = scenario.traffic.duration_s * static_cast<double>(seeds.size());

    if (cell.load) {
        row.load_pps_per_ue = *cell.load;
        row.runtime_s = run_seconds;
        try {
            const auto est = measure_plr(run_seeds(scenario, seeds, jobs));
            row.plr = est.plr;
            row.plr_ci = est.halfwidth;
        } catch (const StatisticsError&) {
            add_flag(row.capacity_flags, "statistics_error");
        }
    } else {
        CapacitySearchOptions opts;
        opts.load_lo = cfg.experiment.load_lo;
        opts.load_hi = cfg.experiment.load_hi;
        opts.tolerance = 0.0;
        opts.relative_tolerance = cfg.experiment.relative_tolerance;
        opts.max_expansions = cfg.experiment.max_expansions;
        opts.seeds = seeds;
        opts.jobs = jobs;
        try {
            const auto result = capacity_search(scenario, *cell.plr_target, opts);
            row.capacity = result.capacity;
            row.load_pps_per_ue = result.capacity;
            row.runtime_s = run_seconds * static_cast<double>(result.probes.size());
            // PLR of the highest probe that still met the target.
            const CapacityProbe* best = nullptr;
            for (const auto& p : result.probes) {
                if (p.estimate.plr <= *cell.plr_target && (!best || p.load_pps > best->load_pps)) {
                    best = &p;
                }
            }
            if (best) {
                row.plr = best->estimate.plr;
                row.plr_ci = best->estimate.halfwidth;
            }
            if (result.saturated) {
                add_flag(row.capacity_flags, "saturated");
            }
            if (result.monotonicity_violation) {
                add_flag(row.capacity_flags, "monotonicity_violation");
            }
        } catch (const BracketError&) {
            add_flag(row.capacity_flags, "bracket_error");
        } catch (const StatisticsError&) {
            add_flag(row.capacity_flags, "statistics_error");
        }
    }
    row.aggregate_load_pps =
        row.load_pps_per_ue * static_cast<double>(scenario.topology.fixed
                                                      ? scenario.topology.fixed->size()
                                                      : scenario.topology.num_ues);

    Config echo;
    echo.scenario = scenario;
    echo.scenario.traffic.per_ue_rate_pps = row.load_pps_per_ue;
    echo.scenario.topology.fixed.reset();
    echo.topology_file = cfg.topology_file;
    echo.run = cfg.run;
    row.config = normalized_line(echo);
    return row;
}

ExperimentOutput run_experiment(const Config& cfg, unsigned jobs, std::ostream* log)
{
    const auto expanded = expand_experiment(cfg);
    ExperimentOutput out;
    out.skipped = expanded.skipped;
    const auto& cells = expanded.cells;
    out.rows.resize(cells.size());

    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    std::exception_ptr error;
    std::size_t done = 0;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const auto start = std::chrono::steady_clock::now();
            try {
                out.rows[i] = run_cell(cfg, cells[i]);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!error) {
                    error = std::current_exception();
                }
                continue;
            }
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::lock_guard lock(mutex);
            ++done;
            if (log != nullptr) {
                *log << "[" << done << "/" << cells.size() << "] " << describe(cells[i]) << " -> "
                     << (out.rows[i].capacity ? "capacity " + format_double(*out.rows[i].capacity)
                                              : "plr " + optional_number(out.rows[i].plr))
                     << (out.rows[i].capacity_flags.empty() ? "" : " [" + out.rows[i].capacity_flags + "]")
                     << " (" << wall << " s)\n";
            }
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cells.size())));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        worker();
    }
    if (error) {
        std::rethrow_exception(error);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& flags = out.rows[i].capacity_flags;
        if (flags.find("error") != std::string::npos) {
            out.failures.push_back(describe(cells[i]) + ": " + flags);
        }
    }
    return out;
}

std::string csv_header()
{
    return "version,preset,algorithm,decoder,duplex,K,plr_target,load_pps_per_ue,"
           "aggregate_load_pps,plr,plr_ci,capacity,capacity_flags,seeds,runtime,config";
}

std::string csv_row(const ExperimentRow& row)
{
    std::string out;
    auto add = [&](const std::string& v) { out += (out.empty() ? "" : ",") + csv_field(v); };
    add(std::string(kCsvVersion));
    add(std::string(to_string(row.preset)));
    add(std::string(to_string(row.variant.algorithm)));
    add(std::string(to_string(row.variant.decoder)));
    add(std::string(to_string(row.variant.duplex)));
    add(std::to_string(row.k));
    add(optional_number(row.plr_target));
    add(format_double(row.load_pps_per_ue));
    add(format_double(row.aggregate_load_pps));
    add(optional_number(row.plr));
    add(optional_number(row.plr_ci));
    add(optional_number(row.capacity));
    add(row.capacity_flags);
    add(std::to_string(row.seeds));
    add(format_double(row.runtime_s));
    add(row.config);
    return out;
}

void write_csv(std::ostream& os, const std::vector<ExperimentRow>& rows)
{
    os << csv_header() << '\n';
    for (const auto& r : rows) {
        os << csv_row(r) << '\n';
    }
}

std::vector<std::string> split_csv_line(std::string_view line)
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

} // namespace v2x
