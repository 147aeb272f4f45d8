#pragma once

// Monte-Carlo drivers: pulse-estimation MSE sweeps over SNR and the
// single-scenario deconvolution comparison.
//
// Trial t under master seed s uses seed derive_seed(s, stream::trial, t), so
// results do not depend on thread count or scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "deconv.hpp"
#include "hosa.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "simulator.hpp"

namespace echodeconv {

struct ExperimentGrid {
    std::vector<double> snr_levels_db{14.0, 10.0, 7.0};
    std::size_t trials = 50;
    SimulationConfig base;
    HosaConfig hosa;
    std::vector<Method> methods{Method::wiener_q, Method::forward_ase};
    std::uint64_t master_seed = 2006;
    std::size_t threads = 1;

    void validate() const {
        if (trials < 1) throw std::invalid_argument("ExperimentGrid: trials must be >= 1");
        if (snr_levels_db.empty()) throw std::invalid_argument("ExperimentGrid: no SNR levels");
        base.validate();
    }
};

inline auto trial_seed(std::uint64_t master, std::size_t trial) -> std::uint64_t {
    return derive_seed(master, stream::trial, trial);
}

struct TrialRecord {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double snr_db = 0.0;
    std::optional<double> value;  ///< empty when the trial failed
    std::string error;
};

struct CellSummary {
    double snr_db = 0.0;
    std::string metric;
    double mean = 0.0;
    double sd = 0.0;  ///< sample standard deviation (n - 1)
    std::size_t successes = 0;
    std::size_t failures = 0;
    bool degenerate_sample = false;  ///< fewer than two successes; sd reported as 0
};

/// Mean +- 2 SD envelope of aligned pulse estimates (one per SNR level).
struct PulseBand {
    double snr_db = 0.0;
    Signal mean;
    Signal lower;
    Signal upper;
};

struct PulseSweepReport {
    ExperimentGrid grid;
    Signal true_pulse;
    std::vector<CellSummary> cells;
    std::vector<TrialRecord> trials;
    std::vector<PulseBand> bands;
};

inline auto summarize(double snr_db, const std::string& metric, const std::vector<TrialRecord>& records) -> CellSummary {
    CellSummary c;
    c.snr_db = snr_db;
    c.metric = metric;
    std::vector<double> ok;
    for (const auto& r : records) {
        if (r.value) ok.push_back(*r.value);
        else ++c.failures;
    }
    c.successes = ok.size();
    if (ok.empty()) {
        c.mean = std::nan("");
        c.degenerate_sample = true;
        return c;
    }
    double s = 0.0;
    for (double v : ok) s += v;
    c.mean = s / static_cast<double>(ok.size());
    if (ok.size() < 2) {
        c.degenerate_sample = true;
        return c;
    }
    double ss = 0.0;
    for (double v : ok) ss += (v - c.mean) * (v - c.mean);
    c.sd = std::sqrt(ss / static_cast<double>(ok.size() - 1));
    return c;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += threads) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline auto run_pulse_mse_sweep(const ExperimentGrid& grid) -> PulseSweepReport {
    grid.validate();
    PulseSweepReport report;
    report.grid = grid;
    report.true_pulse = generate_pulse(grid.base.pulse_length);
    const std::size_t levels = grid.snr_levels_db.size();
    std::vector<TrialRecord> records(levels * grid.trials);
    std::vector<Signal> aligned(levels * grid.trials);

    parallel_for(records.size(), grid.threads, [&](std::size_t idx) {
        const std::size_t level = idx / grid.trials;
        const std::size_t trial = idx % grid.trials;
        TrialRecord& rec = records[idx];
        rec.trial = trial;
        rec.seed = trial_seed(grid.master_seed, trial);
        rec.snr_db = grid.snr_levels_db[level];
        try {
            SimulationConfig cfg = grid.base;
            cfg.seed = rec.seed;
            cfg.snr_db = rec.snr_db;
            const auto obs = synthesize_observation(cfg);
            const auto est = estimate_pulse(obs.observation, grid.hosa);
            rec.value = aligned_mse(obs.pulse, est.pulse).mse;
            aligned[idx] = canonical_pair(obs.pulse, est.pulse).second;
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
    });

    for (std::size_t level = 0; level < levels; ++level) {
        const auto first = records.begin() + static_cast<long>(level * grid.trials);
        const std::vector<TrialRecord> row(first, first + static_cast<long>(grid.trials));
        report.cells.push_back(summarize(grid.snr_levels_db[level], "pulse_mse", row));

        PulseBand band;
        band.snr_db = grid.snr_levels_db[level];
        std::vector<const Signal*> ok;
        for (std::size_t t = 0; t < grid.trials; ++t)
            if (records[level * grid.trials + t].value) ok.push_back(&aligned[level * grid.trials + t]);
        if (!ok.empty()) {
            const std::size_t n = ok.front()->size();
            band.mean.assign(n, 0.0);
            band.lower.assign(n, 0.0);
            band.upper.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0, ss = 0.0;
                for (const auto* p : ok) s += (*p)[i];
                const double mu = s / static_cast<double>(ok.size());
                for (const auto* p : ok) ss += ((*p)[i] - mu) * ((*p)[i] - mu);
                const double sd = ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
                band.mean[i] = mu;
                band.lower[i] = mu - 2.0 * sd;
                band.upper[i] = mu + 2.0 * sd;
            }
        }
        report.bands.push_back(std::move(band));
    }
    report.trials = std::move(records);
    return report;
}

struct MethodOutcome {
    Method method = Method::wiener_q;
    MetricsReport metrics;
    DeconvolutionResult result;
    Signal acov_after;  ///< envelope autocovariance of the estimate
};

struct ComparisonReport {
    SimulationConfig config;
    bool blind = true;
    Observation scenario;
    std::optional<PulseEstimate> pulse_estimate;
    Signal acov_before;  ///< envelope autocovariance of the observation
    std::size_t acov_max_lag = 0;
    std::vector<MethodOutcome> outcomes;
};

/// One simulated scenario, every requested method on the same observation and
/// (when blind) the same estimated pulse.
inline auto run_deconvolution_comparison(const SimulationConfig& cfg, const std::vector<Method>& methods,
                                         const PipelineConfig& pipeline = {}, bool blind = true,
                                         double drop_db = 3.0) -> ComparisonReport {
    cfg.validate();
    if (methods.empty()) throw std::invalid_argument("run_deconvolution_comparison: no methods requested");
    ComparisonReport rep;
    rep.config = cfg;
    rep.blind = blind;
    rep.scenario = synthesize_observation(cfg);
    const Signal& y = rep.scenario.observation;
    Signal pulse = rep.scenario.pulse;
    if (blind) {
        rep.pulse_estimate = estimate_pulse(y, pipeline.hosa);
        pulse = rep.pulse_estimate->pulse;
    }
    rep.acov_max_lag = std::min<std::size_t>(y.size() - 1, 64);
    rep.acov_before = autocovariance_normalized(envelope(y), rep.acov_max_lag);
    for (const auto m : methods) {
        MethodOutcome out;
        out.method = m;
        out.result = deconvolve_pipeline(y, pulse, m, pipeline, &rep.scenario.reflectivity);
        out.result.blind = blind;
        out.metrics = evaluate(y, rep.scenario.reflectivity, out.result.estimate, drop_db);
        out.acov_after = autocovariance_normalized(envelope(out.result.estimate), rep.acov_max_lag);
        rep.outcomes.push_back(std::move(out));
    }
    return rep;
}

}  // namespace echodeconv
