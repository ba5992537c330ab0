// Command-line front end: validate configs, run experiment sweeps, trace single runs.

#include "v2x/config.hpp"
#include "v2x/errors.hpp"
#include "v2x/experiment.hpp"
#include "v2x/stats.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitStatistics = 2;

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
};

void set_key(v2x::KeyValues& kv, const std::string& key, const std::string& value)
{
    for (auto& [k, v] : kv) {
        if (k == key) {
            v = value;
            return;
        }
    }
    kv.emplace_back(key, value);
}

/// Config file (if any) with `--set` overrides and dedicated flags layered on top.
v2x::ValidationResult load(const CommonOptions& common, const v2x::KeyValues& extra)
{
    v2x::KeyValues kv;
    if (!common.config_path.empty()) {
        std::ifstream in(common.config_path);
        if (!in) {
            v2x::ValidationResult r;
            r.issues.push_back({"file", "cannot open '" + common.config_path + "'"});
            return r;
        }
        try {
            kv = v2x::parse_key_values(in);
        } catch (const v2x::ConfigError& e) {
            v2x::ValidationResult r;
            r.issues.push_back({"file", common.config_path + ": " + e.what()});
            return r;
        }
    }
    for (const auto& o : common.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            v2x::ValidationResult r;
            r.issues.push_back({"--set", "expected key=value, got '" + o + "'"});
            return r;
        }
        set_key(kv, o.substr(0, eq), o.substr(eq + 1));
    }
    for (const auto& [k, v] : extra) {
        set_key(kv, k, v);
    }
    return v2x::validate_config(kv);
}

int report_issues(const v2x::ValidationResult& r)
{
    std::cerr << "configuration error:\n";
    for (const auto& i : r.issues) {
        std::cerr << "  " << i.field << ": " << i.message << '\n';
    }
    return kExitConfig;
}

void add_common(CLI::App* cmd, CommonOptions& common)
{
    cmd->add_option("-c,--config", common.config_path, "key = value config file");
    cmd->add_option("--set", common.overrides, "override one key, e.g. --set selection.k=3")
        ->take_all();
}

bool header_matches(const std::string& path)
{
    std::ifstream in(path);
    std::string first;
    return std::getline(in, first) && first == v2x::csv_header();
}

int cmd_run(const CommonOptions& common, const std::string& preset, std::size_t seeds,
            unsigned jobs, const std::string& out_path, bool append)
{
    v2x::KeyValues extra;
    if (!preset.empty()) {
        extra.emplace_back("experiment.preset", preset);
    }
    if (seeds > 0) {
        extra.emplace_back("run.seeds", std::to_string(seeds));
    }
    const auto validated = load(common, extra);
    if (!validated.ok()) {
        return report_issues(validated);
    }
    const auto& cfg = *validated.config;

    const auto output = v2x::run_experiment(cfg, jobs, &std::cerr);
    for (const auto& s : output.skipped) {
        std::cerr << "skipped " << s << '\n';
    }
    for (const auto& f : output.failures) {
        std::cerr << "failed " << f << '\n';
    }

    if (out_path.empty()) {
        v2x::write_csv(std::cout, output.rows);
    } else {
        namespace fs = std::filesystem;
        const bool existing = append && fs::exists(out_path) && fs::file_size(out_path) > 0;
        if (existing && !header_matches(out_path)) {
            std::cerr << out_path << ": existing header differs from version " << v2x::kCsvVersion
                      << "; refusing to append\n";
            return kExitConfig;
        }
        std::ofstream os(out_path, existing ? std::ios::app : std::ios::trunc);
        if (!os) {
            std::cerr << "cannot write " << out_path << '\n';
            return kExitConfig;
        }
        if (existing) {
            for (const auto& r : output.rows) {
                os << v2x::csv_row(r) << '\n';
            }
        } else {
            v2x::write_csv(os, output.rows);
        }
        std::ofstream prov(out_path + ".cfg");
        prov << "# configuration behind " << fs::path(out_path).filename().string()
             << " (csv version " << v2x::kCsvVersion << ")\n"
             << v2x::normalized_text(cfg);
    }

    if (!output.failures.empty()) {
        return kExitStatistics;
    }
    return output.skipped.empty() ? kExitOk : kExitConfig;
}

int cmd_validate(const CommonOptions& common)
{
    const auto validated = load(common, {});
    if (!validated.ok()) {
        return report_issues(validated);
    }
    std::cout << v2x::normalized_text(*validated.config);
    const auto expanded = v2x::expand_experiment(*validated.config);
    std::cerr << expanded.cells.size() << " experiment cell(s)";
    if (!expanded.skipped.empty()) {
        std::cerr << ", " << expanded.skipped.size() << " combination(s) invalid:\n";
        for (const auto& s : expanded.skipped) {
            std::cerr << "  " << s << '\n';
        }
        return kExitConfig;
    }
    std::cerr << '\n';
    return kExitOk;
}

int cmd_presets()
{
    for (auto p : {v2x::Preset::plr_vs_load, v2x::Preset::capacity_vs_k, v2x::Preset::custom}) {
        v2x::KeyValues kv{{"experiment.preset", std::string(v2x::to_string(p))}};
        const auto cfg = *v2x::validate_config(kv).config;
        const auto expanded = v2x::expand_experiment(cfg);
        std::cout << v2x::to_string(p) << ": " << expanded.cells.size() << " cell(s)\n";
        std::size_t shown = 0;
        for (const auto& c : expanded.cells) {
            if (shown++ == 6) {
                std::cout << "  ...\n";
                break;
            }
            std::cout << "  " << v2x::to_string(c.variant.algorithm) << '/'
                      << v2x::to_string(c.variant.decoder) << '/' << v2x::to_string(c.variant.duplex)
                      << " K=" << c.k;
            if (c.load) {
                std::cout << " load=" << v2x::format_double(*c.load);
            }
            if (c.plr_target) {
                std::cout << " capacity at PLR " << v2x::format_double(*c.plr_target);
            }
            std::cout << '\n';
        }
    }
    return kExitOk;
}

int cmd_simulate(const CommonOptions& common, std::uint64_t seed, const std::string& reception_path,
                 const std::string& selection_path, const std::string& topology_path)
{
    const auto validated = load(common, {});
    if (!validated.ok()) {
        return report_issues(validated);
    }
    const auto& scenario = validated.config->scenario;

    if (!topology_path.empty()) {
        std::ofstream os(topology_path);
        v2x::write_topology(os, v2x::scenario_topology(scenario, seed));
    }
    std::ofstream reception;
    std::ofstream selection;
    v2x::RunHooks hooks;
    if (!reception_path.empty()) {
        reception.open(reception_path);
        reception << "# slot receiver source packet outcome pscch_sinr_db pssch_sinr_db\n";
        hooks.reception_trace = &reception;
    }
    if (!selection_path.empty()) {
        selection.open(selection_path);
        selection << "# slot ue packet algorithm blocks escalations\n";
        hooks.selection_trace = &selection;
    }
    const auto r = v2x::run_simulation(scenario, seed, hooks);
    std::cout << "seed " << r.seed << '\n'
              << "plr " << (r.has_data ? v2x::format_double(r.plr) : "no-data") << '\n'
              << "plr_ci " << v2x::format_double(r.plr_confidence_halfwidth) << '\n'
              << "packets " << r.packets << '\n'
              << "receiver_observations " << r.receiver_observations << '\n'
              << "lost_observations " << r.lost_observations << '\n'
              << "scheduling_failures " << r.scheduling_failures << '\n'
              << "mean_first_attempt_delay_slots " << v2x::format_double(r.mean_first_attempt_delay)
              << '\n'
              << "invariant_violations " << r.invariant_violations << '\n';
    if (r.invariant_violations > 0) {
        std::cout << "first_violation " << r.first_violation << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Slot-level simulator of sidelink Mode 2 resource selection for sporadic traffic"};
    app.require_subcommand(1);

    CommonOptions common;

    auto* run = app.add_subcommand("run", "run an experiment and write CSV rows");
    add_common(run, common);
    std::string preset;
    std::size_t seeds = 0;
    unsigned jobs = 1;
    std::string out_path;
    bool append = false;
    run->add_option("--preset", preset, "plr_vs_load, capacity_vs_k or custom");
    run->add_option("--seeds", seeds, "number of seeds per measurement");
    run->add_option("-j,--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("-o,--out", out_path, "CSV output file (default: stdout)");
    run->add_flag("--append", append, "append rows to an existing CSV with the same header");

    auto* validate = app.add_subcommand("validate", "print the normalized config or its errors");
    add_common(validate, common);

    auto* presets = app.add_subcommand("presets", "list experiment presets");

    auto* simulate = app.add_subcommand("simulate", "one run with optional traces");
    add_common(simulate, common);
    std::uint64_t seed = 1;
    std::string reception_path;
    std::string selection_path;
    std::string topology_path;
    simulate->add_option("--seed", seed, "seed");
    simulate->add_option("--reception-trace", reception_path, "per-receiver outcome lines");
    simulate->add_option("--selection-trace", selection_path, "per-packet selection lines");
    simulate->add_option("--export-topology", topology_path, "write UE positions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) {
            return cmd_run(common, preset, seeds, jobs, out_path, append);
        }
        if (validate->parsed()) {
            return cmd_validate(common);
        }
        if (presets->parsed()) {
            return cmd_presets();
        }
        if (simulate->parsed()) {
            return cmd_simulate(common, seed, reception_path, selection_path, topology_path);
        }
    } catch (const v2x::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const v2x::BracketError& e) {
        std::cerr << "capacity search failed: " << e.what() << '\n';
        return kExitStatistics;
    } catch (const v2x::StatisticsError& e) {
        std::cerr << "statistics error: " << e.what() << '\n';
        return kExitStatistics;
    }
    return kExitOk;
}
