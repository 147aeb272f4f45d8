#pragma once

// File formats and run configuration.
//
// Signal files: one decimal sample per line; leading '#' lines may carry
// key=value metadata (sample_rate_hz, description).
// Run configuration: flat key=value lines, '#' comments, unknown keys rejected.
// Every output goes through write_file_atomic (temp file, then rename).

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deconv.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "hosa.hpp"
#include "signal.hpp"
#include "simulator.hpp"

namespace echodeconv::io {

using json = nlohmann::ordered_json;

inline constexpr const char* format_version = "1";

inline auto version() -> std::string {
#ifdef ECHODECONV_VERSION
    return ECHODECONV_VERSION;
#else
    return "0.1.0";
#endif
}

// ---------------------------------------------------------------- text utils

inline auto trim(std::string_view s) -> std::string {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Shortest decimal text that reads back to the same double.
inline auto format_double(double v) -> std::string {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline auto parse_double(const std::string& text, const std::string& what) -> double {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf" || t == "infinity") return infinite_snr;
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
        throw ParseError(what + ": '" + t + "' is not a number");
    return v;
}

inline auto parse_unsigned(const std::string& text, const std::string& what) -> std::uint64_t {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
        throw ParseError(what + ": '" + t + "' is not a non-negative integer");
    return v;
}

inline auto parse_bool(const std::string& text, const std::string& what) -> bool {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ParseError(what + ": '" + t + "' is not a boolean");
}

inline auto split_list(const std::string& text) -> std::vector<std::string> {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

// ---------------------------------------------------------------- files

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot move output into place: " + path.string());
    }
}

inline auto read_text(const std::filesystem::path& path) -> std::string {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SignalFile {
    RealSignal signal;
    std::map<std::string, std::string> metadata;
};

inline auto parse_signal_text(const std::string& text, const std::string& origin = "<signal>") -> SignalFile {
    SignalFile f;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const std::string body = trim(std::string_view(t).substr(1));
            if (const auto eq = body.find('='); eq != std::string::npos)
                f.metadata[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
            continue;
        }
        double v = 0.0;
        const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v))
            throw ParseError(origin + ":" + std::to_string(lineno) + ": not a finite real number: '" + t + "'");
        f.signal.samples.push_back(v);
    }
    if (f.signal.samples.empty()) throw ParseError(origin + ": no samples");
    if (auto it = f.metadata.find("sample_rate_hz"); it != f.metadata.end()) {
        const double fs = parse_double(it->second, origin + ": sample_rate_hz");
        if (!(fs > 0.0) || !std::isfinite(fs)) throw ParseError(origin + ": sample_rate_hz must be positive");
        f.signal.sample_rate_hz = fs;
    }
    return f;
}

inline auto read_signal_file(const std::filesystem::path& path) -> SignalFile {
    return parse_signal_text(read_text(path), path.string());
}

inline auto format_signal(const Signal& s, const std::string& description = {},
                          std::optional<double> sample_rate_hz = std::nullopt) -> std::string {
    std::string out;
    if (!description.empty()) out += "# description=" + description + "\n";
    if (sample_rate_hz) out += "# sample_rate_hz=" + format_double(*sample_rate_hz) + "\n";
    for (double v : s) out += format_double(v) + "\n";
    return out;
}

inline void write_signal_file(const std::filesystem::path& path, const Signal& s, const std::string& description = {},
                              std::optional<double> sample_rate_hz = std::nullopt) {
    write_file_atomic(path, format_signal(s, description, sample_rate_hz));
}

/// Comma-separated table; numbers in round-trip precision.
inline auto format_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows)
    -> std::string {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------- run config

struct RunConfig {
    SimulationConfig sim;
    HosaConfig hosa;
    GaussianityConfig gauss;
    ForwardConfig forward;
    double drop_db = 3.0;
    std::vector<double> snr_levels_db{14.0, 10.0, 7.0};
    std::size_t trials = 50;
    std::uint64_t master_seed = 2006;
    std::size_t threads = 1;
    std::vector<Method> methods{Method::wiener_q, Method::forward, Method::forward_ase};
    double comparison_rho = 0.01;
    bool comparison_blind = true;

    [[nodiscard]] auto pipeline() const -> PipelineConfig { return {hosa, forward}; }

    [[nodiscard]] auto grid() const -> ExperimentGrid {
        ExperimentGrid g;
        g.snr_levels_db = snr_levels_db;
        g.trials = trials;
        g.base = sim;
        g.hosa = hosa;
        g.methods = methods;
        g.master_seed = master_seed;
        g.threads = threads;
        return g;
    }

    void validate() const {
        sim.validate();
        forward.validate();
        if (hosa.fft_size < 2 * hosa.lag + 1) throw std::invalid_argument("config: hosa.fft_size must be >= 2*hosa.lag+1");
        if (hosa.pulse_length > hosa.fft_size) throw std::invalid_argument("config: hosa.pulse_length exceeds hosa.fft_size");
        if (trials < 1) throw std::invalid_argument("config: experiment.trials must be >= 1");
        if (!(gauss.alpha > 0.0 && gauss.alpha < 1.0)) throw std::invalid_argument("config: gauss.alpha outside (0,1)");
        if (!(comparison_rho >= 0.0 && comparison_rho <= 1.0)) throw std::invalid_argument("config: comparison.rho outside [0,1]");
    }
};

namespace detail {

struct ConfigKey {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline auto join(const std::vector<std::string>& v) -> std::string {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

inline auto config_keys() -> const std::vector<ConfigKey>& {
    using S = const std::string&;
    auto u = [](S v, const char* k) { return parse_unsigned(v, k); };
    static const std::vector<ConfigKey> keys{
        {"sim.pulse_length", [=](RunConfig& c, S v) { c.sim.pulse_length = u(v, "sim.pulse_length"); },
         [](const RunConfig& c) { return std::to_string(c.sim.pulse_length); }},
        {"sim.signal_length", [=](RunConfig& c, S v) { c.sim.signal_length = u(v, "sim.signal_length"); },
         [](const RunConfig& c) { return std::to_string(c.sim.signal_length); }},
        {"sim.rho", [](RunConfig& c, S v) { c.sim.rho = parse_double(v, "sim.rho"); },
         [](const RunConfig& c) { return format_double(c.sim.rho); }},
        {"sim.snr_db", [](RunConfig& c, S v) { c.sim.snr_db = parse_double(v, "sim.snr_db"); },
         [](const RunConfig& c) { return format_double(c.sim.snr_db); }},
        {"sim.seed", [=](RunConfig& c, S v) { c.sim.seed = u(v, "sim.seed"); },
         [](const RunConfig& c) { return std::to_string(c.sim.seed); }},
        {"hosa.segment_length", [=](RunConfig& c, S v) { c.hosa.segment_length = u(v, "hosa.segment_length"); },
         [](const RunConfig& c) { return std::to_string(c.hosa.segment_length); }},
        {"hosa.lag", [=](RunConfig& c, S v) { c.hosa.lag = u(v, "hosa.lag"); },
         [](const RunConfig& c) { return std::to_string(c.hosa.lag); }},
        {"hosa.fft_size", [=](RunConfig& c, S v) { c.hosa.fft_size = u(v, "hosa.fft_size"); },
         [](const RunConfig& c) { return std::to_string(c.hosa.fft_size); }},
        {"hosa.pulse_length", [=](RunConfig& c, S v) { c.hosa.pulse_length = u(v, "hosa.pulse_length"); },
         [](const RunConfig& c) { return std::to_string(c.hosa.pulse_length); }},
        {"hosa.lag_window", [](RunConfig& c, S v) { c.hosa.window = parse_lag_window(trim(v)); },
         [](const RunConfig& c) { return to_string(c.hosa.window); }},
        {"hosa.epsilon", [](RunConfig& c, S v) { c.hosa.epsilon = parse_double(v, "hosa.epsilon"); },
         [](const RunConfig& c) { return format_double(c.hosa.epsilon); }},
        {"gauss.smoothing_exponent",
         [](RunConfig& c, S v) { c.gauss.smoothing_exponent = parse_double(v, "gauss.smoothing_exponent"); },
         [](const RunConfig& c) { return format_double(c.gauss.smoothing_exponent); }},
        {"gauss.alpha", [](RunConfig& c, S v) { c.gauss.alpha = parse_double(v, "gauss.alpha"); },
         [](const RunConfig& c) { return format_double(c.gauss.alpha); }},
        {"wavelet.denoise", [](RunConfig& c, S v) { c.forward.denoise_wavelet.vanishing_moments = parse_wavelet_name(trim(v)); },
         [](const RunConfig& c) { return c.forward.denoise_wavelet.name(); }},
        {"wavelet.inversion",
         [](RunConfig& c, S v) { c.forward.inversion_wavelet.vanishing_moments = parse_wavelet_name(trim(v)); },
         [](const RunConfig& c) { return c.forward.inversion_wavelet.name(); }},
        {"wavelet.levels",
         [=](RunConfig& c, S v) {
             c.forward.denoise_wavelet.levels = c.forward.inversion_wavelet.levels = u(v, "wavelet.levels");
         },
         [](const RunConfig& c) { return std::to_string(c.forward.denoise_wavelet.levels); }},
        {"forward.tau_multiplier", [](RunConfig& c, S v) { c.forward.tau_multiplier = parse_double(v, "forward.tau_multiplier"); },
         [](const RunConfig& c) { return format_double(c.forward.tau_multiplier); }},
        {"forward.tau_search", [](RunConfig& c, S v) { c.forward.tau_search = parse_bool(v, "forward.tau_search"); },
         [](const RunConfig& c) { return std::string(c.forward.tau_search ? "true" : "false"); }},
        {"forward.gain_alignment", [](RunConfig& c, S v) { c.forward.gain_alignment = parse_gain_alignment(trim(v)); },
         [](const RunConfig& c) { return to_string(c.forward.gain_alignment); }},
        {"forward.threshold_log", [](RunConfig& c, S v) { c.forward.threshold_log_base = parse_log_base(trim(v)); },
         [](const RunConfig& c) { return to_string(c.forward.threshold_log_base); }},
        {"forward.burg_order", [=](RunConfig& c, S v) { c.forward.burg_order = u(v, "forward.burg_order"); },
         [](const RunConfig& c) { return std::to_string(c.forward.burg_order); }},
        {"forward.q_sq",
         [](RunConfig& c, S v) {
             if (trim(v) == "auto") c.forward.q_sq.reset();
             else c.forward.q_sq = parse_double(v, "forward.q_sq");
         },
         [](const RunConfig& c) { return c.forward.q_sq ? format_double(*c.forward.q_sq) : std::string("auto"); }},
        {"metrics.drop_db", [](RunConfig& c, S v) { c.drop_db = parse_double(v, "metrics.drop_db"); },
         [](const RunConfig& c) { return format_double(c.drop_db); }},
        {"experiment.snr_levels",
         [](RunConfig& c, S v) {
             c.snr_levels_db.clear();
             for (const auto& item : split_list(v)) c.snr_levels_db.push_back(parse_double(item, "experiment.snr_levels"));
         },
         [](const RunConfig& c) {
             std::vector<std::string> s;
             for (double d : c.snr_levels_db) s.push_back(format_double(d));
             return join(s);
         }},
        {"experiment.trials", [=](RunConfig& c, S v) { c.trials = u(v, "experiment.trials"); },
         [](const RunConfig& c) { return std::to_string(c.trials); }},
        {"experiment.master_seed", [=](RunConfig& c, S v) { c.master_seed = u(v, "experiment.master_seed"); },
         [](const RunConfig& c) { return std::to_string(c.master_seed); }},
        {"experiment.threads", [=](RunConfig& c, S v) { c.threads = u(v, "experiment.threads"); },
         [](const RunConfig& c) { return std::to_string(c.threads); }},
        {"experiment.methods",
         [](RunConfig& c, S v) {
             c.methods.clear();
             for (const auto& item : split_list(v)) c.methods.push_back(parse_method(item));
         },
         [](const RunConfig& c) {
             std::vector<std::string> s;
             for (auto m : c.methods) s.push_back(to_string(m));
             return join(s);
         }},
        {"comparison.rho", [](RunConfig& c, S v) { c.comparison_rho = parse_double(v, "comparison.rho"); },
         [](const RunConfig& c) { return format_double(c.comparison_rho); }},
        {"comparison.blind", [](RunConfig& c, S v) { c.comparison_blind = parse_bool(v, "comparison.blind"); },
         [](const RunConfig& c) { return std::string(c.comparison_blind ? "true" : "false"); }},
    };
    return keys;
}

}  // namespace detail

inline auto config_key_names() -> std::vector<std::string> {
    std::vector<std::string> names;
    for (const auto& k : detail::config_keys()) names.emplace_back(k.name);
    return names;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : detail::config_keys())
        if (key == k.name) {
            try {
                k.set(cfg, value);
            } catch (const ParseError&) {
                throw;
            } catch (const std::exception& e) {
                throw ParseError(key + ": " + e.what());
            }
            return;
        }
    throw ParseError("unknown config key '" + key + "'");
}

inline auto parse_run_config(const std::string& text, const std::string& origin = "<config>") -> RunConfig {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        try {
            set_config_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ParseError& e) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

inline auto load_run_config(const std::filesystem::path& path) -> RunConfig {
    return parse_run_config(read_text(path), path.string());
}

/// Every key with its resolved value.
inline auto config_json(const RunConfig& cfg) -> json {
    json j = json::object();
    for (const auto& k : detail::config_keys()) j[k.name] = k.get(cfg);
    return j;
}

inline auto format_config(const RunConfig& cfg) -> std::string {
    std::string out;
    for (const auto& k : detail::config_keys()) out += std::string(k.name) + "=" + k.get(cfg) + "\n";
    return out;
}

// ---------------------------------------------------------------- JSON reports

/// Finite numbers as numbers; non-finite values as strings ("inf", "nan").
inline auto number(double v) -> json {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline auto report_header(const std::string& kind, const RunConfig& cfg) -> json {
    json j;
    j["format_version"] = format_version;
    j["software_version"] = version();
    j["report"] = kind;
    j["config"] = config_json(cfg);
    return j;
}

inline auto to_json(const MetricsReport& m) -> json {
    json j;
    j["mse"] = number(m.mse);
    j["isnr_db"] = number(m.isnr_db);
    j["width_before_samples"] = number(m.width_before_samples);
    j["width_after_samples"] = number(m.width_after_samples);
    j["axial_resolution_gain"] = number(m.axial_resolution_gain);
    j["alignment"] = {{"shift", m.alignment.shift},
                      {"sign", m.alignment.sign},
                      {"truth_scale", number(m.alignment.truth_scale)},
                      {"estimate_scale", number(m.alignment.estimate_scale)}};
    return j;
}

inline auto to_json(const DeconvolutionResult& r) -> json {
    json j;
    j["method"] = to_string(r.method);
    j["blind"] = r.blind;
    j["pulse_length"] = r.pulse.size();
    if (r.q_sq) j["q_sq"] = number(*r.q_sq);
    if (r.forward) {
        const auto& f = *r.forward;
        j["forward"] = {{"noise_sigma", number(f.noise_sigma)},
                        {"tau", number(f.tau)},
                        {"tau_multiplier", number(f.tau_multiplier)},
                        {"padded_length", f.padded_length},
                        {"level_sigmas", f.level_sigmas},
                        {"thresholds", f.thresholds}};
    }
    if (r.ase) j["ase"] = {{"burg_order", r.ase->burg_order}, {"band_low_bin", r.ase->band_low}, {"band_high_bin", r.ase->band_high}};
    return j;
}

inline auto to_json(const PulseEstimate& p) -> json {
    json d = json::object();
    for (const auto& [k, v] : p.diagnostics) d[k] = number(v);
    return {{"pulse_length", p.pulse.size()}, {"cepstrum_length", p.cepstrum.size()}, {"diagnostics", d}};
}

inline auto to_json(const GaussianityResult& g) -> json {
    return {{"statistic", number(g.statistic)},
            {"p_value", number(g.p_value)},
            {"is_gaussian", g.is_gaussian},
            {"degrees_of_freedom", g.degrees_of_freedom},
            {"smoothing", g.smoothing}};
}

inline auto to_json(const CellSummary& c) -> json {
    return {{"snr_db", number(c.snr_db)},   {"metric", c.metric},
            {"mean", number(c.mean)},       {"sd", number(c.sd)},
            {"successes", c.successes},     {"failures", c.failures},
            {"degenerate_sample", c.degenerate_sample}};
}

inline auto to_json(const TrialRecord& t) -> json {
    json j{{"trial", t.trial}, {"seed", t.seed}, {"snr_db", number(t.snr_db)}};
    j["value"] = t.value ? number(*t.value) : json(nullptr);
    if (!t.error.empty()) j["error"] = t.error;
    return j;
}

}  // namespace echodeconv::io
