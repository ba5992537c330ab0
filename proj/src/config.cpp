#include "v2x/config.hpp"

#include "v2x/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

namespace v2x {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s)
{
    std::vector<std::string_view> out;
    if (trim(s).empty()) {
        return out;
    }
    std::size_t start = 0;
    for (;;) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

// Setters return an error message, or nothing on success.
using SetResult = std::optional<std::string>;

template <typename T>
SetResult parse_number(std::string_view text, T& out)
{
    text = trim(text);
    T v{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
        return "'" + std::string(text) + "' is not a valid number";
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(v)) {
            return "'" + std::string(text) + "' is not finite";
        }
    }
    out = v;
    return std::nullopt;
}

SetResult parse_bool(std::string_view text, bool& out)
{
    text = trim(text);
    if (text == "true" || text == "1" || text == "yes") {
        out = true;
    } else if (text == "false" || text == "0" || text == "no") {
        out = false;
    } else {
        return "'" + std::string(text) + "' is not a boolean (true/false)";
    }
    return std::nullopt;
}

template <typename E>
SetResult parse_enum(std::string_view text, E& out, std::optional<E> (*parse)(std::string_view),
                     std::string_view choices)
{
    const auto v = parse(trim(text));
    if (!v) {
        return "'" + std::string(trim(text)) + "' is not one of " + std::string(choices);
    }
    out = *v;
    return std::nullopt;
}

template <typename E>
SetResult parse_enum_list(std::string_view text, std::vector<E>& out,
                          std::optional<E> (*parse)(std::string_view), std::string_view choices)
{
    std::vector<E> values;
    for (auto item : split_list(text)) {
        E v{};
        if (auto err = parse_enum(item, v, parse, choices)) {
            return err;
        }
        values.push_back(v);
    }
    out = std::move(values);
    return std::nullopt;
}

SetResult parse_double_list(std::string_view text, std::vector<double>& out)
{
    std::vector<double> values;
    for (auto item : split_list(text)) {
        double v = 0.0;
        if (auto err = parse_number(item, v)) {
            return err;
        }
        values.push_back(v);
    }
    out = std::move(values);
    return std::nullopt;
}

/// Integers and inclusive ranges such as `1-4,6`.
SetResult parse_int_ranges(std::string_view text, std::vector<int>& out)
{
    std::vector<int> values;
    for (auto item : split_list(text)) {
        const auto dash = item.find('-', 1);
        int a = 0;
        int b = 0;
        if (dash == std::string_view::npos) {
            if (auto err = parse_number(item, a)) {
                return err;
            }
            b = a;
        } else {
            if (auto err = parse_number(item.substr(0, dash), a)) {
                return err;
            }
            if (auto err = parse_number(item.substr(dash + 1), b)) {
                return err;
            }
            if (b < a) {
                return "range '" + std::string(item) + "' is descending";
            }
        }
        for (int v = a; v <= b; ++v) {
            values.push_back(v);
        }
    }
    out = std::move(values);
    return std::nullopt;
}

template <typename T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& fmt)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + fmt(values[i]);
    }
    return out;
}

template <typename E>
std::string join_enums(const std::vector<E>& values)
{
    return join<E>(values, [](const E& e) { return std::string(to_string(e)); });
}

struct Field {
    std::string_view key;
    std::function<SetResult(Config&, std::string_view)> set;
    std::function<std::string(const Config&)> get;
};

#define V2X_NUMBER(KEY, EXPR)                                                                      \
    Field                                                                                          \
    {                                                                                              \
        KEY, [](Config& c, std::string_view t) { return parse_number(t, c.EXPR); },                \
            [](const Config& c) { return format_value(c.EXPR); }                                   \
    }

std::string format_value(double v) { return format_double(v); }

template <typename T>
    requires std::is_integral_v<T>
std::string format_value(T v)
{
    return std::to_string(v);
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> table = {
        V2X_NUMBER("grid.slot_duration_s", scenario.grid.slot_duration_s),
        V2X_NUMBER("grid.num_subchannels", scenario.grid.num_subchannels),
        V2X_NUMBER("grid.subchannels_per_tx", scenario.grid.subchannels_per_tx),
        V2X_NUMBER("grid.reservation_horizon", scenario.grid.reservation_horizon),

        V2X_NUMBER("topology.num_ues", scenario.topology.num_ues),
        V2X_NUMBER("topology.mean_gap_m", scenario.topology.mean_gap_m),
        {"topology.wraparound",
         [](Config& c, std::string_view t) { return parse_bool(t, c.scenario.topology.wraparound); },
         [](const Config& c) { return std::string(c.scenario.topology.wraparound ? "true" : "false"); }},
        {"topology.file",
         [](Config& c, std::string_view t) -> SetResult {
             c.topology_file = std::string(trim(t));
             return std::nullopt;
         },
         [](const Config& c) { return c.topology_file; }},

        V2X_NUMBER("radio.tx_power_dbm", scenario.radio.tx_power_dbm),
        V2X_NUMBER("radio.noise_figure_db", scenario.radio.noise_figure_db),
        V2X_NUMBER("radio.l0_db", scenario.radio.l0_db),
        V2X_NUMBER("radio.d0_m", scenario.radio.d0_m),
        V2X_NUMBER("radio.path_loss_exponent", scenario.radio.path_loss_exponent),
        V2X_NUMBER("radio.subchannel_bandwidth_hz", scenario.radio.subchannel_bandwidth_hz),
        V2X_NUMBER("radio.relevance_radius_m", scenario.relevance_radius_m),

        V2X_NUMBER("phy.pscch_sinr_threshold_db", scenario.phy.pscch_sinr_threshold_db),
        V2X_NUMBER("phy.pssch_sinr_threshold_db", scenario.phy.pssch_sinr_threshold_db),
        {"phy.decoder",
         [](Config& c, std::string_view t) {
             return parse_enum(t, c.scenario.phy.decoder, parse_decoder, "MPPD, IPD");
         },
         [](const Config& c) { return std::string(to_string(c.scenario.phy.decoder)); }},
        {"phy.duplex",
         [](Config& c, std::string_view t) {
             return parse_enum(t, c.scenario.phy.duplex, parse_duplex, "HD, SBFD, IBFD");
         },
         [](const Config& c) { return std::string(to_string(c.scenario.phy.duplex)); }},

        {"selection.algorithm",
         [](Config& c, std::string_view t) {
             return parse_enum(t, c.scenario.selection.algorithm, parse_algorithm, "RA, SRS, QFA");
         },
         [](const Config& c) { return std::string(to_string(c.scenario.selection.algorithm)); }},
        V2X_NUMBER("selection.k", scenario.selection.k),
        V2X_NUMBER("selection.t1", scenario.selection.t1),
        V2X_NUMBER("selection.t2", scenario.selection.t2),
        V2X_NUMBER("selection.p_th_dbm", scenario.selection.p_th_dbm),
        V2X_NUMBER("selection.free_fraction_target", scenario.selection.free_fraction_target),
        V2X_NUMBER("selection.escalation_step_db", scenario.selection.escalation_step_db),

        V2X_NUMBER("traffic.rate_pps", scenario.traffic.per_ue_rate_pps),
        V2X_NUMBER("traffic.packet_size_bytes", scenario.traffic.packet_size_bytes),
        V2X_NUMBER("traffic.delay_budget_s", scenario.traffic.delay_budget_s),
        V2X_NUMBER("traffic.warmup_s", scenario.traffic.warmup_s),
        V2X_NUMBER("traffic.duration_s", scenario.traffic.duration_s),
        {"traffic.service",
         [](Config& c, std::string_view t) {
             return parse_enum(t, c.scenario.traffic.service, parse_service_policy,
                               "concurrent, fifo");
         },
         [](const Config& c) { return std::string(to_string(c.scenario.traffic.service)); }},

        V2X_NUMBER("run.first_seed", run.first_seed),
        V2X_NUMBER("run.seeds", run.num_seeds),

        {"experiment.preset",
         [](Config& c, std::string_view t) {
             return parse_enum(t, c.experiment.preset, parse_preset,
                               "plr_vs_load, capacity_vs_k, custom");
         },
         [](const Config& c) { return std::string(to_string(c.experiment.preset)); }},
        {"experiment.algorithms",
         [](Config& c, std::string_view t) {
             return parse_enum_list(t, c.experiment.algorithms, parse_algorithm, "RA, SRS, QFA");
         },
         [](const Config& c) { return join_enums(c.experiment.algorithms); }},
        {"experiment.decoders",
         [](Config& c, std::string_view t) {
             return parse_enum_list(t, c.experiment.decoders, parse_decoder, "MPPD, IPD");
         },
         [](const Config& c) { return join_enums(c.experiment.decoders); }},
        {"experiment.duplexes",
         [](Config& c, std::string_view t) {
             return parse_enum_list(t, c.experiment.duplexes, parse_duplex, "HD, SBFD, IBFD");
         },
         [](const Config& c) { return join_enums(c.experiment.duplexes); }},
        {"experiment.k",
         [](Config& c, std::string_view t) { return parse_int_ranges(t, c.experiment.k_values); },
         [](const Config& c) {
             return join<int>(c.experiment.k_values, [](const int& k) { return std::to_string(k); });
         }},
        {"experiment.loads",
         [](Config& c, std::string_view t) { return parse_double_list(t, c.experiment.loads); },
         [](const Config& c) { return join<double>(c.experiment.loads, format_double); }},
        {"experiment.plr_targets",
         [](Config& c, std::string_view t) { return parse_double_list(t, c.experiment.plr_targets); },
         [](const Config& c) { return join<double>(c.experiment.plr_targets, format_double); }},
        V2X_NUMBER("experiment.load_lo", experiment.load_lo),
        V2X_NUMBER("experiment.load_hi", experiment.load_hi),
        V2X_NUMBER("experiment.relative_tolerance", experiment.relative_tolerance),
        V2X_NUMBER("experiment.max_expansions", experiment.max_expansions),
    };
    return table;
}

#undef V2X_NUMBER

void check(std::vector<ConfigIssue>& issues, bool ok, std::string_view field, std::string message)
{
    if (!ok) {
        issues.push_back(ConfigIssue{std::string(field), std::move(message)});
    }
}

void check_invariants(const Config& c, std::vector<ConfigIssue>& out)
{
    const auto& s = c.scenario;
    check(out, s.grid.slot_duration_s > 0.0, "grid.slot_duration_s", "must be positive");
    check(out, s.grid.num_subchannels >= 1, "grid.num_subchannels", "must be >= 1");
    check(out, s.grid.subchannels_per_tx >= 1 && s.grid.subchannels_per_tx <= s.grid.num_subchannels,
          "grid.subchannels_per_tx", "must be in [1, grid.num_subchannels]");
    check(out, s.grid.reservation_horizon >= 2, "grid.reservation_horizon", "must be >= 2");

    if (c.topology_file.empty()) {
        check(out, s.topology.num_ues >= 2, "topology.num_ues", "must be >= 2");
    }
    check(out, s.topology.mean_gap_m > 0.0, "topology.mean_gap_m", "must be positive");

    check(out, s.radio.l0_db > 0.0, "radio.l0_db", "must be positive");
    check(out, s.radio.d0_m > 0.0, "radio.d0_m", "must be positive");
    check(out, s.radio.path_loss_exponent > 0.0, "radio.path_loss_exponent", "must be positive");
    check(out, s.radio.subchannel_bandwidth_hz > 0.0, "radio.subchannel_bandwidth_hz",
          "must be positive");
    check(out, s.relevance_radius_m > 0.0, "radio.relevance_radius_m", "must be positive");

    check(out, s.phy.pscch_sinr_threshold_db <= s.phy.pssch_sinr_threshold_db,
          "phy.pscch_sinr_threshold_db", "must not exceed phy.pssch_sinr_threshold_db");

    const auto& sel = s.selection;
    check(out, sel.k >= 1, "selection.k", "must be >= 1");
    check(out, sel.t1 >= 0 && sel.t1 <= sel.t2, "selection.t1", "must satisfy 0 <= T1 <= T2");
    if (sel.k >= 1 && sel.t1 <= sel.t2) {
        check(out, sel.k <= sel.window_size(), "selection.k",
              "K=" + std::to_string(sel.k) + " does not fit the selection window of " +
                  std::to_string(sel.window_size()) + " slots [T1=" + std::to_string(sel.t1) +
                  ", T2=" + std::to_string(sel.t2) + "]");
    }
    check(out, sel.t2 - sel.t1 <= s.grid.reservation_horizon - 1, "selection.t2",
          "T2 - T1 must be < grid.reservation_horizon (" +
              std::to_string(s.grid.reservation_horizon) + ")");
    check(out, sel.free_fraction_target >= 0.0 && sel.free_fraction_target <= 1.0,
          "selection.free_fraction_target", "must be in [0, 1]");
    check(out, sel.escalation_step_db > 0.0, "selection.escalation_step_db", "must be positive");

    const auto& tr = s.traffic;
    check(out, tr.per_ue_rate_pps >= 0.0, "traffic.rate_pps",
          "must be >= 0, got " + format_double(tr.per_ue_rate_pps));
    check(out, tr.packet_size_bytes >= 1, "traffic.packet_size_bytes", "must be >= 1");
    check(out, tr.delay_budget_s > 0.0, "traffic.delay_budget_s", "must be positive");
    check(out, tr.warmup_s >= 0.0, "traffic.warmup_s", "must be >= 0");
    check(out, tr.duration_s > tr.warmup_s, "traffic.duration_s", "must exceed traffic.warmup_s");

    check(out, c.run.num_seeds >= 2, "run.seeds", "at least two seeds are needed for a CI");

    const auto& ex = c.experiment;
    for (int k : ex.k_values) {
        check(out, k >= 1, "experiment.k", "values must be >= 1");
    }
    for (double l : ex.loads) {
        check(out, l >= 0.0, "experiment.loads", "values must be >= 0");
    }
    for (double t : ex.plr_targets) {
        check(out, t > 0.0 && t < 1.0, "experiment.plr_targets", "values must be in (0, 1)");
    }
    check(out, ex.load_lo > 0.0, "experiment.load_lo", "must be positive");
    check(out, ex.load_hi >= ex.load_lo, "experiment.load_hi", "must be >= experiment.load_lo");
    check(out, ex.relative_tolerance > 0.0, "experiment.relative_tolerance", "must be positive");
    check(out, ex.max_expansions >= 0, "experiment.max_expansions", "must be >= 0");
}

} // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string_view to_string(Preset p)
{
    switch (p) {
    case Preset::plr_vs_load:
        return "plr_vs_load";
    case Preset::capacity_vs_k:
        return "capacity_vs_k";
    case Preset::custom:
        return "custom";
    }
    return "?";
}

std::optional<Preset> parse_preset(std::string_view s)
{
    if (s == "plr_vs_load") return Preset::plr_vs_load;
    if (s == "capacity_vs_k") return Preset::capacity_vs_k;
    if (s == "custom") return Preset::custom;
    return std::nullopt;
}

std::string ValidationResult::summary() const
{
    std::string out;
    for (const auto& i : issues) {
        out += i.field + ": " + i.message + "\n";
    }
    return out;
}

KeyValues parse_key_values(std::istream& is)
{
    KeyValues kv;
    std::set<std::string, std::less<>> seen;
    std::string line;
    for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = trim(view);
        if (view.empty()) {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        const auto key = trim(view.substr(0, eq));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        }
        if (!seen.emplace(key).second) {
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" +
                              std::string(key) + "'");
        }
        kv.emplace_back(std::string(key), std::string(trim(view.substr(eq + 1))));
    }
    return kv;
}

ValidationResult validate_config(const KeyValues& kv)
{
    ValidationResult result;
    Config cfg;
    bool t2_given = false;
    bool num_ues_given = false;
    for (const auto& [key, value] : kv) {
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(),
                                     [&](const Field& f) { return f.key == key; });
        if (it == table.end()) {
            result.issues.push_back(ConfigIssue{key, "unknown key"});
            continue;
        }
        if (auto err = it->set(cfg, value)) {
            result.issues.push_back(ConfigIssue{key, *err});
            continue;
        }
        t2_given = t2_given || key == "selection.t2";
        num_ues_given = num_ues_given || key == "topology.num_ues";
    }
    if (!t2_given) {
        const double slots = cfg.scenario.traffic.delay_budget_s / cfg.scenario.grid.slot_duration_s;
        if (std::isfinite(slots) && slots >= 0.0 && slots < 1e9) {
            cfg.scenario.selection.t2 = static_cast<int>(std::floor(slots + 1e-9));
        }
    }
    if (!cfg.topology_file.empty()) {
        std::ifstream in(cfg.topology_file);
        if (!in) {
            result.issues.push_back(ConfigIssue{"topology.file", "cannot open '" + cfg.topology_file + "'"});
        } else {
            try {
                Topology topo = read_topology(in);
                topo.validate();
                if (num_ues_given && cfg.scenario.topology.num_ues != topo.size()) {
                    result.issues.push_back(ConfigIssue{
                        "topology.num_ues", "file has " + std::to_string(topo.size()) +
                                                " UEs but topology.num_ues is " +
                                                std::to_string(cfg.scenario.topology.num_ues)});
                }
                cfg.scenario.topology.num_ues = topo.size();
                cfg.scenario.topology.fixed = std::move(topo);
            } catch (const ConfigError& e) {
                result.issues.push_back(ConfigIssue{"topology.file", e.what()});
            }
        }
    }
    check_invariants(cfg, result.issues);
    if (result.issues.empty()) {
        // The per-field checks above should mirror every scenario invariant; this catches
        // any that were missed.
        try {
            cfg.scenario.validate();
        } catch (const ConfigError& e) {
            result.issues.push_back(ConfigIssue{"scenario", e.what()});
        }
    }
    result.config = std::move(cfg);
    return result;
}

ValidationResult load_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        ValidationResult r;
        r.issues.push_back(ConfigIssue{"file", "cannot open '" + path + "'"});
        return r;
    }
    try {
        return validate_config(parse_key_values(in));
    } catch (const ConfigError& e) {
        ValidationResult r;
        r.issues.push_back(ConfigIssue{"file", path + ": " + e.what()});
        return r;
    }
}

std::string normalized_text(const Config& cfg)
{
    std::string out;
    for (const auto& f : fields()) {
        out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

std::string normalized_line(const Config& cfg)
{
    std::string out;
    for (const auto& f : fields()) {
        out += (out.empty() ? "" : ";") + std::string(f.key) + "=" + f.get(cfg);
    }
    return out;
}

} // namespace v2x
