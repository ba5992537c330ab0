#pragma once

#include "v2x/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace v2x {

/// First column of every row; bumped whenever the column set changes.
inline constexpr std::string_view kCsvVersion = "1";

/// One unit of work: a PLR measurement at a fixed load, or a capacity search.
struct ExperimentCell {
    Variant variant;
    int k = 5;
    std::optional<double> load;
    std::optional<double> plr_target;
};

struct ExpandedExperiment {
    std::vector<ExperimentCell> cells;
    /// Human-readable reasons for combinations that were dropped.
    std::vector<std::string> skipped;
};

/// Resolves preset defaults and expands the cartesian product into cells.
ExpandedExperiment expand_experiment(const Config& cfg);

/// Scenario for one cell: the base scenario with the cell's variant, K and load applied.
ScenarioConfig cell_scenario(const Config& cfg, const ExperimentCell& cell);

struct ExperimentRow {
    Preset preset = Preset::custom;
    Variant variant;
    int k = 0;
    std::optional<double> plr_target;
    double load_pps_per_ue = 0.0;
    double aggregate_load_pps = 0.0;
    /// Absent when no run produced data or the search failed.
    std::optional<double> plr;
    std::optional<double> plr_ci;
    std::optional<double> capacity;
    /// '|'-separated: saturated, monotonicity_violation, bracket_error, statistics_error.
    std::string capacity_flags;
    std::size_t seeds = 0;
    /// Simulated seconds summed over every run behind the row.
    double runtime_s = 0.0;
    std::string config;
};

struct ExperimentOutput {
    std::vector<ExperimentRow> rows;
    std::vector<std::string> skipped;
    /// Cells whose statistics or capacity bracket failed; their rows carry a flag.
    std::vector<std::string> failures;
};

/// Runs every cell on up to `jobs` workers. Rows come back in expansion order regardless
/// of completion order. Progress lines go to `log` when it is set.
ExperimentOutput run_experiment(const Config& cfg, unsigned jobs, std::ostream* log = nullptr);

/// Measures one cell on the calling thread.
ExperimentRow run_cell(const Config& cfg, const ExperimentCell& cell, unsigned jobs = 1);

std::string csv_header();
std::string csv_row(const ExperimentRow& row);

/// Header followed by one line per row.
void write_csv(std::ostream& os, const std::vector<ExperimentRow>& rows);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

} // namespace v2x
