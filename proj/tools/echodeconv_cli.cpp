// echodeconv command-line front end.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <echodeconv.hpp>

namespace fs = std::filesystem;
using namespace echodeconv;
using io::json;

namespace {

struct Options {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::string method = "ForWaRD+ASE";
    bool blind = false;
    bool keep_intermediates = false;
    std::string signal;
    std::string pulse;
    std::string truth;
    std::string estimate;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("echodeconv");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("ECHODECONV_LOG")) {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string(env) != "off")
            spdlog::warn("ECHODECONV_LOG='{}' not recognised; using info", env);
        else
            spdlog::set_level(level);
    }
}

auto load_config(const Options& o) -> io::RunConfig {
    io::RunConfig cfg = o.config.empty() ? io::RunConfig{} : io::load_run_config(o.config);
    if (o.seed) {
        cfg.sim.seed = *o.seed;
        cfg.master_seed = *o.seed;
    }
    cfg.forward.keep_intermediates = o.keep_intermediates;
    cfg.validate();
    return cfg;
}

auto prepare_out(const Options& o) -> fs::path {
    fs::path dir(o.out);
    fs::create_directories(dir);
    if (!fs::is_directory(dir)) throw std::runtime_error("output path is not a directory: " + dir.string());
    return dir;
}

void write_json(const fs::path& path, const json& j) {
    io::write_file_atomic(path, j.dump(2) + "\n");
    spdlog::info("wrote {}", path.string());
}

void write_signal(const fs::path& path, const Signal& s, const std::string& description,
                  std::optional<double> fs_hz = std::nullopt) {
    io::write_signal_file(path, s, description, fs_hz);
    spdlog::info("wrote {}", path.string());
}

auto d(double v) -> std::string { return io::format_double(v); }

// ---------------------------------------------------------------- simulate

void cmd_simulate(const Options& o) {
    const auto cfg = load_config(o);
    const auto dir = prepare_out(o);
    const auto obs = synthesize_observation(cfg.sim);
    write_signal(dir / "pulse.txt", obs.pulse, "simulated pulse");
    write_signal(dir / "reflectivity.txt", obs.reflectivity, "Bernoulli-Gaussian reflectivity");
    write_signal(dir / "observation.txt", obs.observation, "noisy observation");
    json m = io::report_header("simulate", cfg);
    m["realized_snr_db"] = norm(obs.clean) > 0.0 ? io::number(snr_db(obs.clean, obs.observation)) : json(nullptr);
    m["noise_sigma"] = obs.noise_sigma;
    m["files"] = {"pulse.txt", "reflectivity.txt", "observation.txt"};
    write_json(dir / "manifest.json", m);
}

// ---------------------------------------------------------------- estimate-pulse

void cmd_estimate_pulse(const Options& o) {
    const auto cfg = load_config(o);
    const auto input = io::read_signal_file(o.signal);
    const auto& y = input.signal.samples;
    if (y.size() < 2 * cfg.hosa.segment_length)
        throw std::invalid_argument("signal has " + std::to_string(y.size()) + " samples; minimum is " +
                                    std::to_string(2 * cfg.hosa.segment_length) + " (two segments of hosa.segment_length)");
    const auto dir = prepare_out(o);
    const auto est = estimate_pulse(y, cfg.hosa);
    write_signal(dir / "pulse.txt", est.pulse, "estimated pulse (unit energy, peak-centred)", input.signal.sample_rate_hz);
    write_signal(dir / "cepstrum.txt", est.cepstrum, "pulse cepstrum, lags -n..n");

    const std::size_t nfft = 512;
    const auto spec = fft::forward_real(est.pulse, nfft);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(nfft) * input.signal.sample_rate_hz.value_or(1.0);
        rows.push_back({d(f), d(std::abs(spec[k]))});
    }
    io::write_file_atomic(dir / "spectrum.csv",
                          io::format_csv({input.signal.sample_rate_hz ? "frequency_hz" : "frequency_cycles_per_sample", "magnitude"}, rows));

    json j = io::report_header("estimate-pulse", cfg);
    j["input"] = o.signal;
    j["input_length"] = y.size();
    j["pulse"] = io::to_json(est);
    if (!o.truth.empty()) j["aligned_mse"] = io::number(aligned_mse(io::read_signal_file(o.truth).signal.samples, est.pulse).mse);
    write_json(dir / "diagnostics.json", j);
}

// ---------------------------------------------------------------- deconvolve

void cmd_deconvolve(const Options& o) {
    const Method method = parse_method(o.method);
    if (o.pulse.empty() && !o.blind) throw CLI::ValidationError("deconvolve", "either --pulse FILE or --blind is required");
    if (!o.pulse.empty() && o.blind) throw CLI::ValidationError("deconvolve", "--pulse and --blind are mutually exclusive");
    auto cfg = load_config(o);
    const auto input = io::read_signal_file(o.signal);
    const auto& y = input.signal.samples;
    std::optional<Signal> h;
    if (!o.pulse.empty()) h = io::read_signal_file(o.pulse).signal.samples;
    std::optional<Signal> truth;
    if (!o.truth.empty()) truth = io::read_signal_file(o.truth).signal.samples;
    if (cfg.forward.tau_search && !truth) throw std::invalid_argument("forward.tau_search=true needs --truth");

    const auto dir = prepare_out(o);
    const auto r = deconvolve_pipeline(y, h, method, cfg.pipeline(), truth ? &*truth : nullptr);
    write_signal(dir / "estimate.txt", r.estimate, to_string(method) + " reflectivity estimate", input.signal.sample_rate_hz);

    json j = io::report_header("deconvolve", cfg);
    j["input"] = o.signal;
    j["deconvolution"] = io::to_json(r);
    if (r.pulse_estimate) j["pulse"] = io::to_json(*r.pulse_estimate);
    if (truth) j["metrics"] = io::to_json(evaluate(y, *truth, r.estimate, cfg.drop_db));
    write_json(dir / "report.json", j);

    if (o.keep_intermediates) {
        write_signal(dir / "pulse_used.txt", r.pulse, "pulse used for inversion");
        if (r.forward) {
            write_signal(dir / "x_lambda.txt", r.forward->x_lambda, "Fourier-shrunk estimate");
            std::vector<std::vector<std::string>> rows;
            for (std::size_t lvl = 0; lvl < r.forward->gains.size(); ++lvl)
                for (std::size_t i = 0; i < r.forward->gains[lvl].size(); ++i)
                    rows.push_back({std::to_string(lvl + 1), std::to_string(i), d(r.forward->gains[lvl][i])});
            io::write_file_atomic(dir / "wavelet_gains.csv", io::format_csv({"level", "index", "gain"}, rows));
        }
    }
}

// ---------------------------------------------------------------- gaussianity-test

void cmd_gaussianity(const Options& o) {
    const auto cfg = load_config(o);
    const auto input = io::read_signal_file(o.signal);
    const auto r = gaussianity_test(input.signal.samples, cfg.gauss);
    json j = io::report_header("gaussianity-test", cfg);
    j["input"] = o.signal;
    j["result"] = io::to_json(r);
    std::cout << (r.is_gaussian ? "gaussian" : "non-gaussian") << " p=" << d(r.p_value) << "\n";
    if (!o.out.empty()) write_json(prepare_out(o) / "gaussianity.json", j);
}

// ---------------------------------------------------------------- metrics

void cmd_metrics(const Options& o) {
    const auto cfg = load_config(o);
    const auto truth = io::read_signal_file(o.truth).signal.samples;
    const auto est = io::read_signal_file(o.estimate).signal.samples;
    json j = io::report_header("metrics", cfg);
    if (!o.signal.empty()) {
        const auto y = io::read_signal_file(o.signal).signal.samples;
        j["metrics"] = io::to_json(evaluate(y, truth, est, cfg.drop_db));
    } else {
        const auto m = aligned_mse(truth, est);
        j["metrics"] = {{"mse", io::number(m.mse)},
                        {"alignment", {{"shift", m.alignment.shift}, {"sign", m.alignment.sign}}}};
    }
    write_json(prepare_out(o) / "metrics.json", j);
}

// ---------------------------------------------------------------- experiment

void cmd_experiment(const Options& o) {
    const auto cfg = load_config(o);
    const auto dir = prepare_out(o);
    const auto sentinel = dir / "COMPLETE";
    fs::remove(sentinel);

    spdlog::info("pulse sweep: {} SNR levels x {} trials", cfg.snr_levels_db.size(), cfg.trials);
    const auto sweep = run_pulse_mse_sweep(cfg.grid());

    std::vector<std::vector<std::string>> table, trials;
    for (const auto& c : sweep.cells)
        table.push_back({d(c.snr_db), d(c.mean), d(c.sd), std::to_string(c.successes), std::to_string(c.failures)});
    for (const auto& t : sweep.trials)
        trials.push_back({d(t.snr_db), std::to_string(t.trial), std::to_string(t.seed), t.value ? d(*t.value) : "", t.error});
    io::write_file_atomic(dir / "pulse_mse_table.csv", io::format_csv({"snr_db", "mean_mse", "sd_mse", "successes", "failures"}, table));
    io::write_file_atomic(dir / "trials.csv", io::format_csv({"snr_db", "trial", "seed", "mse", "error"}, trials));

    std::vector<std::vector<std::string>> bands;
    for (std::size_t i = 0; i < sweep.true_pulse.size(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (const auto& b : sweep.bands) {
            const bool ok = i < b.mean.size();
            row.push_back(ok ? d(b.mean[i]) : "");
            row.push_back(ok ? d(b.lower[i]) : "");
            row.push_back(ok ? d(b.upper[i]) : "");
        }
        bands.push_back(std::move(row));
    }
    std::vector<std::string> band_header{"index"};
    for (const auto& b : sweep.bands)
        for (const char* s : {"mean", "minus_2sd", "plus_2sd"}) band_header.push_back(std::string(s) + "_" + d(b.snr_db) + "db");
    io::write_file_atomic(dir / "pulse_bands.csv", io::format_csv(band_header, bands));

    SimulationConfig scen = cfg.sim;
    scen.rho = cfg.comparison_rho;
    scen.seed = trial_seed(cfg.master_seed, 0);
    spdlog::info("deconvolution comparison: rho={} snr={} dB", scen.rho, scen.snr_db);
    const auto cmp = run_deconvolution_comparison(scen, cfg.methods, cfg.pipeline(), cfg.comparison_blind, cfg.drop_db);

    std::vector<std::string> acov_header{"lag", "observation"}, trace_header{"index", "reflectivity", "observation"};
    for (const auto& oc : cmp.outcomes) {
        acov_header.push_back(to_string(oc.method));
        trace_header.push_back(to_string(oc.method));
    }
    std::vector<std::vector<std::string>> acov_rows, trace_rows, cmp_rows;
    const long ml = static_cast<long>(cmp.acov_max_lag);
    for (long lag = -ml; lag <= ml; ++lag) {
        const auto i = static_cast<std::size_t>(lag + ml);
        std::vector<std::string> row{std::to_string(lag), d(cmp.acov_before[i])};
        for (const auto& oc : cmp.outcomes) row.push_back(d(oc.acov_after[i]));
        acov_rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < cmp.scenario.observation.size(); ++i) {
        std::vector<std::string> row{std::to_string(i), d(cmp.scenario.reflectivity[i]), d(cmp.scenario.observation[i])};
        for (const auto& oc : cmp.outcomes) row.push_back(d(oc.result.estimate[i]));
        trace_rows.push_back(std::move(row));
    }
    for (const auto& oc : cmp.outcomes)
        cmp_rows.push_back({to_string(oc.method), d(oc.metrics.axial_resolution_gain), d(oc.metrics.width_before_samples),
                            d(oc.metrics.width_after_samples), d(oc.metrics.isnr_db), d(oc.metrics.mse)});
    io::write_file_atomic(dir / "envelope_autocovariance.csv", io::format_csv(acov_header, acov_rows));
    io::write_file_atomic(dir / "comparison_traces.csv", io::format_csv(trace_header, trace_rows));
    io::write_file_atomic(dir / "comparison.csv",
                          io::format_csv({"method", "gain", "width_before", "width_after", "isnr_db", "mse"}, cmp_rows));

    json j = io::report_header("experiment", cfg);
    j["pulse_sweep"]["cells"] = json::array();
    for (const auto& c : sweep.cells) j["pulse_sweep"]["cells"].push_back(io::to_json(c));
    j["pulse_sweep"]["trials"] = json::array();
    for (const auto& t : sweep.trials) j["pulse_sweep"]["trials"].push_back(io::to_json(t));
    j["comparison"]["seed"] = scen.seed;
    j["comparison"]["rho"] = scen.rho;
    j["comparison"]["blind"] = cmp.blind;
    j["comparison"]["methods"] = json::array();
    for (const auto& oc : cmp.outcomes) {
        json m = io::to_json(oc.result);
        m["metrics"] = io::to_json(oc.metrics);
        j["comparison"]["methods"].push_back(m);
    }
    write_json(dir / "report.json", j);
    io::write_file_atomic(sentinel, "ok\n");
    for (const auto& c : sweep.cells)
        std::cout << "snr " << d(c.snr_db) << " dB  mse " << d(c.mean) << " +- " << d(c.sd) << "  (" << c.successes
                  << " ok, " << c.failures << " failed)\n";
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Blind deconvolution of ultrasonic A-scans: HOS pulse estimation + ForWaRD"};
    app.set_version_flag("--version", io::version());
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "key=value run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "override sim.seed and experiment.master_seed");
    };

    auto* sim = app.add_subcommand("simulate", "generate pulse, reflectivity and observation");
    common(sim);

    auto* est = app.add_subcommand("estimate-pulse", "estimate the pulse from an observation");
    common(est);
    est->add_option("--signal", o.signal, "observation signal file")->required()->check(CLI::ExistingFile);
    est->add_option("--truth", o.truth, "true pulse, for an aligned MSE in the diagnostics")->check(CLI::ExistingFile);

    auto* dec = app.add_subcommand("deconvolve", "estimate the reflectivity");
    common(dec);
    dec->add_option("--signal", o.signal, "observation signal file")->required()->check(CLI::ExistingFile);
    dec->add_option("--pulse", o.pulse, "known pulse signal file")->check(CLI::ExistingFile);
    dec->add_flag("--blind", o.blind, "estimate the pulse from the observation");
    dec->add_option("--method", o.method, "WienerQ | Wiener+ASE | ForWaRD | ForWaRD+ASE")->capture_default_str();
    dec->add_option("--truth", o.truth, "true reflectivity, enables the metrics report")->check(CLI::ExistingFile);
    dec->add_flag("--keep-intermediates", o.keep_intermediates, "write intermediate traces");

    auto* gau = app.add_subcommand("gaussianity-test", "bispectral test of Gaussianity");
    common(gau);
    gau->add_option("--signal", o.signal, "signal file")->required()->check(CLI::ExistingFile);

    auto* exp = app.add_subcommand("experiment", "pulse MSE sweep and deconvolution comparison");
    common(exp);

    auto* met = app.add_subcommand("metrics", "compare an estimate against ground truth");
    common(met);
    met->add_option("--truth", o.truth, "reference signal")->required()->check(CLI::ExistingFile);
    met->add_option("--estimate", o.estimate, "estimated signal")->required()->check(CLI::ExistingFile);
    met->add_option("--signal", o.signal, "observation; adds ISNR and resolution gain")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed()) cmd_simulate(o);
        else if (est->parsed()) cmd_estimate_pulse(o);
        else if (dec->parsed()) cmd_deconvolve(o);
        else if (gau->parsed()) cmd_gaussianity(o);
        else if (exp->parsed()) cmd_experiment(o);
        else if (met->parsed()) cmd_metrics(o);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
