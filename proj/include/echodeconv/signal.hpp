#pragma once

// Core signal type and DSP primitives.
//
// Convolution here is linear and truncated to the length of the first
// operand, so observations stay on the same sample axis as the reflectivity.
// Deconvolution later treats the observation circularly; the two agree
// exactly only when the last (pulse length - 1) reflectivity samples are zero.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "error.hpp"
#include "fft.hpp"
#include "rng.hpp"

namespace echodeconv {

using Signal = std::vector<double>;
using Spectrum = std::vector<std::complex<double>>;

/// Samples plus optional sampling-rate metadata (used by file I/O and reports).
struct RealSignal {
    Signal samples;
    std::optional<double> sample_rate_hz;
};

namespace detail {

inline void require_nonempty(const Signal& s, const char* who) {
    if (s.empty()) throw std::invalid_argument(std::string(who) + ": empty signal");
}

inline void require_finite(const Signal& s, const char* who) {
    for (double v : s)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite sample");
}

inline auto squared_norm(const Signal& s) -> double {
    double acc = 0.0;
    for (double v : s) acc += v * v;
    return acc;
}

}  // namespace detail

inline auto norm(const Signal& s) -> double { return std::sqrt(detail::squared_norm(s)); }

inline auto mean(const Signal& s) -> double {
    detail::require_nonempty(s, "mean");
    double acc = 0.0;
    for (double v : s) acc += v;
    return acc / static_cast<double>(s.size());
}

/// First x.size() samples of the full linear convolution x * h.
inline auto convolve(const Signal& x, const Signal& h) -> Signal {
    detail::require_nonempty(x, "convolve");
    detail::require_nonempty(h, "convolve");
    detail::require_finite(x, "convolve");
    detail::require_finite(h, "convolve");
    const std::size_t n = x.size();
    Signal y(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        if (x[k] == 0.0) continue;
        const std::size_t stop = std::min(h.size(), n - k);
        for (std::size_t j = 0; j < stop; ++j) y[k + j] += x[k] * h[j];
    }
    return y;
}

/// Sentinel for "no noise": snr_db returns it for identical inputs and
/// add_noise_at_snr accepts it as a target.
inline constexpr double infinite_snr = std::numeric_limits<double>::infinity();

/// 20 log10(||clean|| / ||clean - noisy||); +infinity when the inputs coincide.
inline auto snr_db(const Signal& clean, const Signal& noisy) -> double {
    if (clean.size() != noisy.size()) throw std::invalid_argument("snr_db: length mismatch");
    const double signal_norm = norm(clean);
    if (signal_norm == 0.0) throw std::invalid_argument("snr_db: clean signal has zero norm");
    double diff = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) diff += (clean[i] - noisy[i]) * (clean[i] - noisy[i]);
    if (diff == 0.0) return infinite_snr;
    return 20.0 * std::log10(signal_norm / std::sqrt(diff));
}

struct NoisyObservation {
    Signal samples;
    double noise_sigma = 0.0;  ///< RMS of the realized noise vector
};

/// Adds white Gaussian noise whose realized vector is rescaled so the
/// resulting SNR equals the target exactly.
inline auto add_noise_at_snr(const Signal& y, double target_snr_db, std::uint64_t seed) -> NoisyObservation {
    detail::require_nonempty(y, "add_noise_at_snr");
    const double y_norm = norm(y);
    if (y_norm == 0.0) throw std::invalid_argument("add_noise_at_snr: zero-norm signal");
    if (std::isinf(target_snr_db) && target_snr_db > 0) return {y, 0.0};
    if (!std::isfinite(target_snr_db)) throw std::invalid_argument("add_noise_at_snr: invalid target");

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Signal noise(y.size());
    for (auto& v : noise) v = gauss(rng);
    const double drawn = norm(noise);
    if (drawn == 0.0) throw std::runtime_error("add_noise_at_snr: degenerate noise draw");
    const double wanted = y_norm / std::pow(10.0, target_snr_db / 20.0);
    const double scale = wanted / drawn;

    NoisyObservation out{y, wanted / std::sqrt(static_cast<double>(y.size()))};
    for (std::size_t i = 0; i < y.size(); ++i) out.samples[i] += scale * noise[i];
    return out;
}

/// Magnitude of the analytic signal (one-sided spectrum doubling).
inline auto envelope(const Signal& s) -> Signal {
    if (s.size() < 4) throw std::invalid_argument("envelope: need at least 4 samples");
    const std::size_t n = s.size();
    auto spec = fft::forward_real(s);
    // keep DC (and Nyquist for even n), double positive bins, zero negative bins
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < n; ++k) {
        if (k < (n + 1) / 2) spec[k] *= 2.0;
        else if (!(n % 2 == 0 && k == half)) spec[k] = 0.0;
    }
    const auto analytic = fft::inverse(std::move(spec));
    Signal env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(analytic[i]);
    return env;
}

/// Mean-removed autocovariance normalized to 1 at lag 0.
/// Output has 2*max_lag+1 entries; index max_lag is lag 0.
inline auto autocovariance_normalized(const Signal& s, std::size_t max_lag) -> Signal {
    detail::require_nonempty(s, "autocovariance_normalized");
    if (max_lag >= s.size()) throw std::invalid_argument("autocovariance_normalized: max_lag too large");
    const double mu = mean(s);
    Signal centered(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) centered[i] = s[i] - mu;
    const double r0 = detail::squared_norm(centered);
    if (r0 == 0.0) throw DegenerateStatistics("autocovariance of a constant signal");

    // Linear (non-circular) correlation through a zero-padded FFT.
    std::size_t n = 1;
    while (n < 2 * s.size()) n <<= 1;
    auto spec = fft::forward_real(centered, n);
    for (auto& v : spec) v = std::norm(v);
    const auto r = fft::inverse_real(std::move(spec));

    Signal out(2 * max_lag + 1);
    out[max_lag] = 1.0;
    for (std::size_t m = 1; m <= max_lag; ++m) {
        const double v = r[m] / r0;
        out[max_lag + m] = v;
        out[max_lag - m] = v;
    }
    return out;
}

/// Full width (fractional samples) of the central lobe of a normalized
/// autocovariance at the level 10^(-drop_db/20).
inline auto mainlobe_width_at_drop(const Signal& acov, double drop_db) -> double {
    if (acov.size() % 2 == 0 || acov.empty())
        throw std::invalid_argument("mainlobe_width_at_drop: expected 2*max_lag+1 samples");
    const std::size_t centre = acov.size() / 2;
    if (std::abs(acov[centre] - 1.0) > 1e-9)
        throw std::invalid_argument("mainlobe_width_at_drop: lag-0 value must be 1");
    const double level = std::pow(10.0, -drop_db / 20.0);

    auto half_width = [&](int dir) -> double {
        for (std::size_t m = 1; m <= centre; ++m) {
            const double prev = acov[centre + dir * static_cast<long>(m - 1)];
            const double cur = acov[centre + dir * static_cast<long>(m)];
            if (cur <= level) return static_cast<double>(m - 1) + (prev - level) / (prev - cur);
        }
        throw NumericalError("mainlobe_width_at_drop: lobe never falls below threshold");
    };
    return half_width(+1) + half_width(-1);
}

}  // namespace echodeconv
