#pragma once

// Scenario files: a strict INI dialect.
//
//   # comment
//   [section]
//   key = value        ; values: numbers, words, true/false, comma lists
//
// Unknown sections or keys, duplicates and malformed lines are errors that
// carry the line (and column where meaningful). Every key carries its unit.
//
//   [sensor]   no keys; accepted for completeness
//   [bath]     omega0_hz | (b_z_gauss [gamma_hz_per_t = 10.705e6]),
//              a_perp_hz (required), a_par_hz = 0, p_z = 0, n_spins = 1
//              a_par_hz, a_perp_hz and p_z take one value or one per spin
//   [noise]    kind = none|ac|random_phase_ac|ou_lorentzian|white, amplitude_hz = 0,
//              frequency_hz = 0, phase_rad = 0, fwhm_hz = 0, center_hz = 0
//   [protocol] kind = qc|cc, t_interr_s (required), randomize_mode = exact_channel|sampled
//   [sweep]    delay_start_s = t_interr_s, delay_step_s (required), n_points (required)
//   [run]      mode = exact|mc, n_traj = 1000, substep_dt_s = auto, seed = 1
//   [output]   path = out, format = csv|json, emit_spectrum = true, spectrum_window = hann|rect
//   [psd]      n_traj = 256, dt_s = 1e-6, timeline_s = 4e-3   (used by the psd command)
//
// All *_hz quantities are cyclic frequencies; the library works with angular
// frequencies, so they are multiplied by 2 pi on conversion. The noise
// amplitude is given the same way (b / 2 pi).

#include "qcorr/analysis.hpp"
#include "qcorr/noise.hpp"
#include "qcorr/protocol.hpp"
#include "qcorr/spin_system.hpp"

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qcorr {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, int line = 0, int column = 0)
        : std::runtime_error(format(msg, line, column)), line_(line), column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    static std::string format(const std::string& msg, int line, int column) {
        if (line <= 0) {
            return msg;
        }
        std::string where = "line " + std::to_string(line);
        if (column > 0) {
            where += ", column " + std::to_string(column);
        }
        return where + ": " + msg;
    }

    int line_;
    int column_;
};

enum class ProtocolKind { qc, cc };

inline std::string_view to_string(ProtocolKind k) { return k == ProtocolKind::qc ? "qc" : "cc"; }

struct ScenarioConfig {
    struct Bath {
        std::optional<double> omega0_hz;
        std::optional<double> b_z_gauss;
        double gamma_hz_per_t = kGamma13CHzPerTesla;
        std::vector<double> a_par_hz{0.0};
        std::vector<double> a_perp_hz;
        std::vector<double> p_z{0.0};
        std::size_t n_spins = 1;
    } bath;
    struct Noise {
        NoiseKind kind = NoiseKind::none;
        double amplitude_hz = 0.0;
        double frequency_hz = 0.0;
        double phase_rad = 0.0;
        double fwhm_hz = 0.0;
        double center_hz = 0.0;
    } noise;
    struct Protocol {
        ProtocolKind kind = ProtocolKind::qc;
        double t_interr_s = 0.0;
        RandomizeMode randomize_mode = RandomizeMode::exact_channel;
    } protocol;
    struct Sweep {
        std::optional<double> delay_start_s;
        double delay_step_s = 0.0;
        std::size_t n_points = 0;
    } sweep;
    struct Run {
        ExecMode mode = ExecMode::exact;
        std::size_t n_traj = 1000;
        std::optional<double> substep_dt_s;
        std::uint64_t seed = 1;
    } run;
    struct Output {
        std::string path = "out";
        std::string format = "csv";
        bool emit_spectrum = true;
        Window spectrum_window = Window::hann;
    } output;
    struct Psd {
        std::size_t n_traj = 256;
        double dt_s = 1e-6;
        double timeline_s = 4e-3;
    } psd;

    // Raw key/value pairs as read, "section.key" -> text, for manifests.
    std::map<std::string, std::string> raw;
};

enum class ScenarioScope {
    full,       // bath, protocol and sweep required
    noise_only  // only [noise]/[run]/[psd] are needed (psd command)
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct Entry {
    std::string value;
    int line = 0;
    int column = 0;  // 1-based column of the value
};

class EntryReader {
public:
    EntryReader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    const Entry* find(const std::string& key) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

    double number(const std::string& key, double fallback) const {
        const Entry* e = find(key);
        return e ? parse_number(*e, key) : fallback;
    }

    std::optional<double> optional_number(const std::string& key) const {
        const Entry* e = find(key);
        return e ? std::optional<double>(parse_number(*e, key)) : std::nullopt;
    }

    double required_number(const std::string& key) const {
        const Entry* e = find(key);
        if (!e) {
            throw ConfigError("missing required key '" + key + "'");
        }
        return parse_number(*e, key);
    }

    std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
        const Entry* e = find(key);
        if (!e) {
            return fallback;
        }
        std::vector<double> out;
        std::string_view rest = e->value;
        int offset = 0;
        while (true) {
            const auto comma = rest.find(',');
            const std::string_view item = rest.substr(0, comma);
            out.push_back(parse_number({std::string(trim(item)), e->line, e->column + offset}, key));
            if (comma == std::string_view::npos) {
                break;
            }
            offset += static_cast<int>(comma) + 1;
            rest.remove_prefix(comma + 1);
        }
        return out;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
        const Entry* e = find(key);
        if (!e) {
            return fallback;
        }
        std::uint64_t v = 0;
        const char* first = e->value.data();
        const char* last = first + e->value.size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) {
            throw ConfigError("'" + key + "' expects a non-negative integer, got '" + e->value + "'", e->line,
                              e->column);
        }
        return v;
    }

    std::string word(const std::string& key, const std::string& fallback) const {
        const Entry* e = find(key);
        return e ? e->value : fallback;
    }

    bool boolean(const std::string& key, bool fallback) const {
        const Entry* e = find(key);
        if (!e) {
            return fallback;
        }
        if (e->value == "true") {
            return true;
        }
        if (e->value == "false") {
            return false;
        }
        throw ConfigError("'" + key + "' expects true or false, got '" + e->value + "'", e->line, e->column);
    }

    [[noreturn]] void bad_value(const std::string& key, const std::string& what) const {
        const Entry* e = find(key);
        throw ConfigError("'" + key + "' " + what, e ? e->line : 0, e ? e->column : 0);
    }

private:
    static double parse_number(const Entry& e, const std::string& key) {
        double v = 0.0;
        const char* first = e.value.data();
        const char* last = first + e.value.size();
        if (first != last && *first == '+') {
            ++first;
        }
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last || e.value.empty() || !std::isfinite(v)) {
            throw ConfigError("'" + key + "' expects a finite number, got '" + e.value + "'", e.line, e.column);
        }
        return v;
    }

    std::map<std::string, Entry> entries_;
};

inline const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"sensor", {}},
        {"bath", {"omega0_hz", "b_z_gauss", "gamma_hz_per_t", "a_par_hz", "a_perp_hz", "p_z", "n_spins"}},
        {"noise", {"kind", "amplitude_hz", "frequency_hz", "phase_rad", "fwhm_hz", "center_hz"}},
        {"protocol", {"kind", "t_interr_s", "randomize_mode"}},
        {"sweep", {"delay_start_s", "delay_step_s", "n_points"}},
        {"run", {"mode", "n_traj", "substep_dt_s", "seed"}},
        {"output", {"path", "format", "emit_spectrum", "spectrum_window"}},
        {"psd", {"n_traj", "dt_s", "timeline_s"}},
    };
    return s;
}

inline std::map<std::string, Entry> tokenize(std::string_view text) {
    std::map<std::string, Entry> entries;
    std::string section;
    std::set<std::string> seen_sections;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        const std::string_view raw_line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++line_no;

        std::string_view line = raw_line;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const std::string_view content = trim(line);
        if (content.empty()) {
            continue;
        }
        const int indent = static_cast<int>(line.find_first_not_of(" \t\r")) + 1;
        if (content.front() == '[') {
            if (content.back() != ']') {
                throw ConfigError("unterminated section header", line_no, indent + static_cast<int>(content.size()));
            }
            section = std::string(trim(content.substr(1, content.size() - 2)));
            if (schema().count(section) == 0) {
                throw ConfigError("unknown section [" + section + "]", line_no, indent);
            }
            if (!seen_sections.insert(section).second) {
                throw ConfigError("duplicate section [" + section + "]", line_no, indent);
            }
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("expected 'key = value'", line_no, indent);
        }
        if (section.empty()) {
            throw ConfigError("key outside of any section", line_no, indent);
        }
        const std::string key(trim(content.substr(0, eq)));
        const std::string_view value_part = content.substr(eq + 1);
        const std::string value(trim(value_part));
        if (key.empty()) {
            throw ConfigError("empty key", line_no, indent);
        }
        if (value.empty()) {
            throw ConfigError("empty value for '" + key + "'", line_no, indent + static_cast<int>(eq) + 1);
        }
        if (schema().at(section).count(key) == 0) {
            throw ConfigError("unknown key '" + section + "." + key + "'", line_no, indent);
        }
        const std::string full = section + "." + key;
        const int value_col =
            indent + static_cast<int>(eq) + 1 + static_cast<int>(value_part.find_first_not_of(" \t"));
        if (!entries.emplace(full, Entry{value, line_no, value_col}).second) {
            throw ConfigError("duplicate key '" + full + "'", line_no, indent);
        }
    }
    return entries;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(std::string_view text, ScenarioScope scope = ScenarioScope::full) {
    auto entries = detail::tokenize(text);
    ScenarioConfig cfg;
    for (const auto& [k, e] : entries) {
        cfg.raw[k] = e.value;
    }
    const detail::EntryReader r(std::move(entries));
    const bool full = scope == ScenarioScope::full;

    auto positive = [&](const std::string& key, double v) {
        if (!(v > 0.0)) {
            r.bad_value(key, "must be > 0");
        }
        return v;
    };
    auto non_negative = [&](const std::string& key, double v) {
        if (!(v >= 0.0)) {
            r.bad_value(key, "must be >= 0");
        }
        return v;
    };

    // bath
    auto& b = cfg.bath;
    b.n_spins = r.unsigned_integer("bath.n_spins", 1);
    if (b.n_spins < 1 || b.n_spins > 5) {
        r.bad_value("bath.n_spins", "must be between 1 and 5");
    }
    b.omega0_hz = r.optional_number("bath.omega0_hz");
    b.b_z_gauss = r.optional_number("bath.b_z_gauss");
    b.gamma_hz_per_t = r.number("bath.gamma_hz_per_t", kGamma13CHzPerTesla);
    if (b.omega0_hz && b.b_z_gauss) {
        r.bad_value("bath.b_z_gauss", "conflicts with bath.omega0_hz; give one of them");
    }
    if (full && !b.omega0_hz && !b.b_z_gauss) {
        throw ConfigError("missing required key 'bath.omega0_hz' (or 'bath.b_z_gauss')");
    }
    if (b.omega0_hz) {
        non_negative("bath.omega0_hz", *b.omega0_hz);
    }
    if (b.b_z_gauss) {
        non_negative("bath.b_z_gauss", *b.b_z_gauss);
    }
    b.a_par_hz = r.list("bath.a_par_hz", {0.0});
    b.a_perp_hz = r.list("bath.a_perp_hz", {});
    b.p_z = r.list("bath.p_z", {0.0});
    if (full && b.a_perp_hz.empty()) {
        throw ConfigError("missing required key 'bath.a_perp_hz'");
    }
    for (const auto& [key, values] : {std::pair{"bath.a_par_hz", &b.a_par_hz}, std::pair{"bath.a_perp_hz", &b.a_perp_hz},
                                      std::pair{"bath.p_z", &b.p_z}}) {
        if (values->size() == 1 && b.n_spins > 1) {
            values->assign(b.n_spins, values->front());
        }
        if (!values->empty() && values->size() != b.n_spins) {
            r.bad_value(key, "needs 1 or n_spins values");
        }
    }
    for (double p : b.p_z) {
        if (std::abs(p) > 1.0) {
            r.bad_value("bath.p_z", "out of range: |p_z| must be <= 1");
        }
    }

    // noise
    auto& n = cfg.noise;
    const std::string kind = r.word("noise.kind", "none");
    const auto parsed_kind = parse_noise_kind(kind);
    if (!parsed_kind) {
        r.bad_value("noise.kind", "unknown noise kind '" + kind + "'");
    }
    n.kind = *parsed_kind;
    n.amplitude_hz = r.number("noise.amplitude_hz", 0.0);
    n.frequency_hz = non_negative("noise.frequency_hz", r.number("noise.frequency_hz", 0.0));
    n.phase_rad = r.number("noise.phase_rad", 0.0);
    n.fwhm_hz = non_negative("noise.fwhm_hz", r.number("noise.fwhm_hz", 0.0));
    n.center_hz = non_negative("noise.center_hz", r.number("noise.center_hz", 0.0));
    if (n.kind == NoiseKind::ou_lorentzian) {
        positive("noise.fwhm_hz", n.fwhm_hz);
    }
    if (n.kind == NoiseKind::white) {
        non_negative("noise.amplitude_hz", n.amplitude_hz);
    }

    // protocol
    auto& p = cfg.protocol;
    const std::string pkind = r.word("protocol.kind", "qc");
    if (pkind == "qc") {
        p.kind = ProtocolKind::qc;
    } else if (pkind == "cc") {
        p.kind = ProtocolKind::cc;
    } else {
        r.bad_value("protocol.kind", "must be qc or cc");
    }
    if (full) {
        p.t_interr_s = positive("protocol.t_interr_s", r.required_number("protocol.t_interr_s"));
    } else {
        p.t_interr_s = r.number("protocol.t_interr_s", 0.0);
    }
    const std::string rmode = r.word("protocol.randomize_mode", "exact_channel");
    if (rmode == "exact_channel") {
        p.randomize_mode = RandomizeMode::exact_channel;
    } else if (rmode == "sampled") {
        p.randomize_mode = RandomizeMode::sampled;
    } else {
        r.bad_value("protocol.randomize_mode", "must be exact_channel or sampled");
    }

    // sweep
    auto& s = cfg.sweep;
    s.delay_start_s = r.optional_number("sweep.delay_start_s");
    if (full) {
        s.delay_step_s = positive("sweep.delay_step_s", r.required_number("sweep.delay_step_s"));
        if (!r.has("sweep.n_points")) {
            throw ConfigError("missing required key 'sweep.n_points'");
        }
    }
    s.n_points = r.unsigned_integer("sweep.n_points", 0);
    if (full && s.n_points < 1) {
        r.bad_value("sweep.n_points", "must be >= 1");
    }
    if (s.delay_start_s && full && *s.delay_start_s < p.t_interr_s) {
        r.bad_value("sweep.delay_start_s", "must be >= protocol.t_interr_s");
    }

    // run
    auto& run = cfg.run;
    const std::string mode = r.word("run.mode", "exact");
    if (mode == "exact") {
        run.mode = ExecMode::exact;
    } else if (mode == "mc") {
        run.mode = ExecMode::monte_carlo;
    } else {
        r.bad_value("run.mode", "must be exact or mc");
    }
    run.n_traj = r.unsigned_integer("run.n_traj", 1000);
    if (run.n_traj < 1) {
        r.bad_value("run.n_traj", "must be >= 1");
    }
    run.substep_dt_s = r.optional_number("run.substep_dt_s");
    if (run.substep_dt_s) {
        positive("run.substep_dt_s", *run.substep_dt_s);
    }
    run.seed = r.unsigned_integer("run.seed", 1);

    // output
    auto& o = cfg.output;
    o.path = r.word("output.path", "out");
    o.format = r.word("output.format", "csv");
    if (o.format != "csv" && o.format != "json") {
        r.bad_value("output.format", "must be csv or json");
    }
    o.emit_spectrum = r.boolean("output.emit_spectrum", true);
    const std::string win = r.word("output.spectrum_window", "hann");
    if (win == "hann") {
        o.spectrum_window = Window::hann;
    } else if (win == "rect") {
        o.spectrum_window = Window::rect;
    } else {
        r.bad_value("output.spectrum_window", "must be hann or rect");
    }

    // psd
    auto& psd = cfg.psd;
    psd.n_traj = r.unsigned_integer("psd.n_traj", 256);
    if (psd.n_traj < 2) {
        r.bad_value("psd.n_traj", "must be >= 2");
    }
    psd.dt_s = positive("psd.dt_s", r.number("psd.dt_s", 1e-6));
    psd.timeline_s = positive("psd.timeline_s", r.number("psd.timeline_s", 4e-3));
    if (psd.timeline_s < psd.dt_s) {
        r.bad_value("psd.timeline_s", "must be >= psd.dt_s");
    }
    return cfg;
}

inline SpinSystem make_spin_system(const ScenarioConfig& cfg) {
    const auto& b = cfg.bath;
    const double omega0 =
        b.omega0_hz ? kTwoPi * *b.omega0_hz : larmor_from_field(b.b_z_gauss.value_or(0.0), b.gamma_hz_per_t);
    std::vector<NuclearSpinParams> spins(b.n_spins);
    for (std::size_t k = 0; k < b.n_spins; ++k) {
        spins[k].a_par = kTwoPi * b.a_par_hz.at(k);
        spins[k].a_perp = kTwoPi * b.a_perp_hz.at(k);
        spins[k].p_z = b.p_z.at(k);
    }
    return build_bath(omega0, spins);
}

inline NoiseModel make_noise_model(const ScenarioConfig& cfg) {
    NoiseModel m;
    m.kind = cfg.noise.kind;
    m.amplitude = kTwoPi * cfg.noise.amplitude_hz;
    m.frequency_hz = cfg.noise.frequency_hz;
    m.phase_rad = cfg.noise.phase_rad;
    m.fwhm_hz = cfg.noise.fwhm_hz;
    m.center_hz = cfg.noise.center_hz;
    m.seed_base = cfg.run.seed;
    return m;
}

inline std::vector<double> make_delays(const ScenarioConfig& cfg) {
    const double start = cfg.sweep.delay_start_s.value_or(cfg.protocol.t_interr_s);
    std::vector<double> d(cfg.sweep.n_points);
    for (std::size_t k = 0; k < d.size(); ++k) {
        d[k] = start + static_cast<double>(k) * cfg.sweep.delay_step_s;
    }
    return d;
}

inline SequenceBuilder make_builder(const ScenarioConfig& cfg) {
    if (cfg.protocol.kind == ProtocolKind::qc) {
        return build_qc_sequence;
    }
    return build_cc_sequence;
}

}  // namespace qcorr
