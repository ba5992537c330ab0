#pragma once

#include "v2x/engine.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace v2x {

enum class Preset { plr_vs_load, capacity_vs_k, custom };

std::string_view to_string(Preset p);
std::optional<Preset> parse_preset(std::string_view s);

/// One (algorithm, decoder, duplex) series of an experiment.
struct Variant {
    Algorithm algorithm = Algorithm::SRS;
    Decoder decoder = Decoder::MPPD;
    Duplex duplex = Duplex::HD;

    friend bool operator==(const Variant&, const Variant&) = default;
};

/// What to sweep. Empty lists fall back to the preset's choice, or to the scenario's
/// own setting for `custom`.
struct ExperimentSpec {
    Preset preset = Preset::custom;
    std::vector<Algorithm> algorithms;
    std::vector<Decoder> decoders;
    std::vector<Duplex> duplexes;
    std::vector<int> k_values;
    /// Per-UE loads for PLR rows. When empty, capacity is searched instead.
    std::vector<double> loads;
    std::vector<double> plr_targets;
    double load_lo = 0.5;
    double load_hi = 16.0;
    double relative_tolerance = 0.02;
    int max_expansions = 6;
};

struct RunSettings {
    std::uint64_t first_seed = 1;
    std::size_t num_seeds = 5;
};

struct Config {
    ScenarioConfig scenario;
    RunSettings run;
    ExperimentSpec experiment;
    /// Source of `scenario.topology.fixed`, when positions come from a file.
    std::string topology_file;
};

/// One problem found in a configuration, keyed by its dotted field path.
struct ConfigIssue {
    std::string field;
    std::string message;
};

struct ValidationResult {
    std::optional<Config> config;
    std::vector<ConfigIssue> issues;

    bool ok() const { return config.has_value() && issues.empty(); }
    /// All issues, one `field: message` per line.
    std::string summary() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Reads `key = value` lines; `#` starts a comment, blank lines are skipped. Throws
/// ConfigError naming the line on malformed input or a repeated key.
KeyValues parse_key_values(std::istream& is);

/// Applies `kv` on top of the defaults and checks every invariant. Unknown keys, values
/// that do not parse and violated invariants all become issues. Without an explicit
/// selection.t2 the window ends at floor(delay budget / slot duration).
ValidationResult validate_config(const KeyValues& kv);

/// Reads and validates a config file. An unreadable file is reported as an issue on
/// the pseudo-field `file`.
ValidationResult load_config_file(const std::string& path);

/// Every key with its effective value, in a fixed order. Feeding the text back through
/// parse_key_values and validate_config reproduces the same config.
std::string normalized_text(const Config& cfg);

/// Same content as normalized_text on a single line, `key=value` pairs separated by ';'.
std::string normalized_line(const Config& cfg);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

} // namespace v2x
