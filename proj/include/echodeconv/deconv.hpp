#pragma once

// Inversion engines: Q-regularized Wiener filter, ForWaRD (Fourier shrinkage
// followed by wavelet-domain Wiener shrinkage) and autoregressive spectral
// extrapolation of a band-limited estimate.
//
// All frequency-domain inversion is circular on the observation length.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "burg.hpp"
#include "error.hpp"
#include "fft.hpp"
#include "hosa.hpp"
#include "metrics.hpp"
#include "signal.hpp"
#include "wavelet.hpp"

namespace echodeconv {

enum class Method { wiener_q, wiener_ase, forward, forward_ase };

inline auto to_string(Method m) -> std::string {
    switch (m) {
        case Method::wiener_q: return "WienerQ";
        case Method::wiener_ase: return "Wiener+ASE";
        case Method::forward: return "ForWaRD";
        default: return "ForWaRD+ASE";
    }
}

inline auto parse_method(const std::string& s) -> Method {
    if (s == "WienerQ") return Method::wiener_q;
    if (s == "Wiener+ASE") return Method::wiener_ase;
    if (s == "ForWaRD") return Method::forward;
    if (s == "ForWaRD+ASE") return Method::forward_ase;
    throw std::invalid_argument("unknown method '" + s + "' (valid: WienerQ, Wiener+ASE, ForWaRD, ForWaRD+ASE)");
}

inline auto uses_ase(Method m) -> bool { return m == Method::wiener_ase || m == Method::forward_ase; }

/// How wavelet-domain gains computed in the denoising basis are matched to
/// coefficients of the inversion basis. `time` pairs coefficients whose
/// supports share a centre; `index` pairs equal array positions, which puts
/// them (L1 - L2)/2 * (2^j - 1) samples apart at level j.
enum class GainAlignment { time, index };

inline auto to_string(GainAlignment g) -> std::string { return g == GainAlignment::time ? "time" : "index"; }

inline auto parse_gain_alignment(const std::string& s) -> GainAlignment {
    if (s == "time") return GainAlignment::time;
    if (s == "index") return GainAlignment::index;
    throw std::invalid_argument("unknown gain alignment '" + s + "' (valid: time, index)");
}

struct ForwardConfig {
    WaveletSpec denoise_wavelet{12, 5};
    WaveletSpec inversion_wavelet{6, 5};
    double tau_multiplier = 1.0;
    bool tau_search = false;  ///< oracle grid over tau_multiplier; needs ground truth
    LogBase threshold_log_base = LogBase::natural;
    GainAlignment gain_alignment = GainAlignment::time;
    std::size_t burg_order = 20;
    std::optional<double> q_sq;  ///< WienerQ regularizer; max|H|^2/100 when empty
    bool keep_intermediates = false;

    void validate() const {
        if (!(tau_multiplier >= 0.01 && tau_multiplier <= 10.0))
            throw std::invalid_argument("ForwardConfig: tau_multiplier outside [0.01, 10]");
        if (burg_order < 2) throw std::invalid_argument("ForwardConfig: burg_order must be >= 2");
        if (denoise_wavelet.levels != inversion_wavelet.levels)
            throw std::invalid_argument("ForwardConfig: level-count mismatch between the two wavelet decompositions");
        if (q_sq && *q_sq < 0.0) throw std::invalid_argument("ForwardConfig: q_sq must be >= 0");
    }
};

struct ForwardIntermediates {
    double noise_sigma = 0.0;
    double tau = 0.0;
    double tau_multiplier = 1.0;
    std::size_t padded_length = 0;
    std::vector<double> level_sigmas;  ///< finest first
    std::vector<double> thresholds;
    Signal x_lambda;                   ///< Fourier-shrunk estimate (kept on request)
    std::vector<Signal> gains;         ///< wavelet Wiener gains per level (kept on request)
};

struct AseRecord {
    std::size_t band_low = 0;   ///< first passband bin
    std::size_t band_high = 0;  ///< last passband bin
    std::size_t burg_order = 0;
};

struct DeconvolutionResult {
    Signal estimate;
    Method method = Method::wiener_q;
    Signal pulse;                 ///< pulse actually used
    bool blind = false;
    std::optional<double> q_sq;
    std::optional<ForwardIntermediates> forward;
    std::optional<AseRecord> ase;
    std::optional<PulseEstimate> pulse_estimate;
};

namespace detail {

inline auto pulse_spectrum(const Signal& h, std::size_t n) -> Spectrum {
    detail::require_nonempty(h, "deconvolution");
    if (h.size() > n) throw std::invalid_argument("deconvolution: pulse longer than observation");
    double e = 0.0;
    for (double v : h) e += v * v;
    if (e == 0.0) throw std::invalid_argument("deconvolution: pulse is identically zero");
    return fft::forward_real(h, n);
}

/// Y conj(H) / (|H|^2 + reg), binwise.
inline auto regularized_inverse(const Signal& y, const Signal& h, double reg) -> Signal {
    const auto H = pulse_spectrum(h, y.size());
    auto Y = fft::forward_real(y);
    double peak = 0.0;
    for (const auto& v : H) peak = std::max(peak, std::norm(v));
    if (reg == 0.0)
        for (const auto& v : H)
            if (std::norm(v) <= 1e-24 * peak) throw NumericalError("unregularized inversion at spectral zero");
    for (std::size_t k = 0; k < Y.size(); ++k) Y[k] = Y[k] * std::conj(H[k]) / (std::norm(H[k]) + reg);
    return fft::inverse_real(std::move(Y));
}

/// Offset (in coefficients) from an inversion-basis index to the denoising-basis
/// index with the same support centre, at 1-based level j.
inline auto gain_offset(std::size_t denoise_taps, std::size_t inversion_taps, std::size_t level) -> long {
    const double taps_diff = static_cast<double>(denoise_taps) - static_cast<double>(inversion_taps);
    return std::lround(taps_diff / 2.0 * (1.0 - std::ldexp(1.0, -static_cast<int>(level))));
}

inline auto next_pow2(std::size_t n) -> std::size_t {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace detail

inline auto default_q_sq(const Signal& h, std::size_t n) -> double {
    double peak = 0.0;
    for (const auto& v : detail::pulse_spectrum(h, n)) peak = std::max(peak, std::norm(v));
    return peak / 100.0;
}

inline auto wiener_q(const Signal& y, const Signal& h, std::optional<double> q_sq = std::nullopt)
    -> DeconvolutionResult {
    detail::require_nonempty(y, "wiener_q");
    const double q = q_sq ? *q_sq : default_q_sq(h, y.size());
    if (q < 0.0) throw std::invalid_argument("wiener_q: q_sq must be >= 0");
    DeconvolutionResult r;
    r.estimate = detail::regularized_inverse(y, h, q);
    r.method = Method::wiener_q;
    r.pulse = h;
    r.q_sq = q;
    return r;
}

/// MAD sigma of the finest single-level detail coefficients of y.
inline auto estimate_noise_sigma(const Signal& y, const WaveletSpec& spec) -> double {
    detail::require_nonempty(y, "estimate_noise_sigma");
    Signal even(y.begin(), y.begin() + static_cast<long>(y.size() - y.size() % 2));
    if (even.size() < 2) throw std::invalid_argument("estimate_noise_sigma: signal too short");
    const auto c = dwt(even, WaveletSpec{spec.vanishing_moments, 1});
    return mad_sigma(c.details.front());
}

/// multiplier * N * sigma^2 / ||y - mean(y)||^2
inline auto tikhonov_tau(const Signal& y, double sigma, double multiplier) -> double {
    if (!(multiplier >= 0.01 && multiplier <= 10.0)) throw std::invalid_argument("tikhonov_tau: multiplier outside [0.01, 10]");
    const double mu = mean(y);
    double ss = 0.0;
    for (double v : y) ss += (v - mu) * (v - mu);
    if (ss == 0.0) throw std::invalid_argument("tikhonov_tau: constant signal");
    return multiplier * static_cast<double>(y.size()) * sigma * sigma / ss;
}

/// Y conj(H) / (|H|^2 + tau): Fourier-domain Tikhonov shrinkage.
inline auto fourier_shrink(const Signal& y, const Signal& h, double tau) -> Signal {
    detail::require_nonempty(y, "fourier_shrink");
    if (tau < 0.0) throw std::invalid_argument("fourier_shrink: tau must be >= 0");
    return detail::regularized_inverse(y, h, tau);
}

/// ForWaRD. The pulse is normalized to unit energy internally (the tau rule
/// assumes it) and the estimate is rescaled to the pulse as given.
inline auto forward_deconvolve(const Signal& y, const Signal& h, const ForwardConfig& cfg = {}) -> DeconvolutionResult {
    cfg.validate();
    detail::require_nonempty(y, "forward_deconvolve");
    detail::require_finite(y, "forward_deconvolve");
    if (h.size() > y.size()) throw std::invalid_argument("forward_deconvolve: pulse longer than signal");
    const double h_norm = norm(h);
    if (h_norm == 0.0) throw std::invalid_argument("forward_deconvolve: pulse is identically zero");
    Signal unit(h);
    for (auto& v : unit) v /= h_norm;

    const std::size_t n = y.size();
    ForwardIntermediates info;
    info.tau_multiplier = cfg.tau_multiplier;
    info.noise_sigma = estimate_noise_sigma(y, cfg.denoise_wavelet);
    info.tau = tikhonov_tau(y, info.noise_sigma, cfg.tau_multiplier);
    const Signal x_lambda = fourier_shrink(y, unit, info.tau);

    const std::size_t levels = cfg.denoise_wavelet.levels;
    std::size_t padded = std::max(detail::next_pow2(n), std::size_t{1} << levels);
    info.padded_length = padded;
    Signal work(padded, 0.0);
    std::copy(x_lambda.begin(), x_lambda.end(), work.begin());

    const auto c1 = dwt(work, cfg.denoise_wavelet);  // gains come from this basis
    auto c2 = dwt(work, cfg.inversion_wavelet);       // and are applied in this one
    if (c1.details.size() != c2.details.size()) throw std::invalid_argument("forward_deconvolve: level-count mismatch");
    info.level_sigmas = per_level_sigmas(c1);
    for (std::size_t j = 0; j < c1.details.size(); ++j) {
        const double sj = info.level_sigmas[j];
        const double t = level_threshold(sj, n, cfg.threshold_log_base);
        info.thresholds.push_back(t);
        const auto kept = hard_threshold(c1.details[j], t);
        const long m = static_cast<long>(kept.size());
        const long offset = cfg.gain_alignment == GainAlignment::time
                                ? detail::gain_offset(scaling_filter(cfg.denoise_wavelet.vanishing_moments).size(),
                                                      scaling_filter(cfg.inversion_wavelet.vanishing_moments).size(), j + 1)
                                : 0;
        Signal gain(kept.size());
        for (long i = 0; i < m; ++i) {
            const double d = kept[static_cast<std::size_t>(((i - offset) % m + m) % m)];
            const double p = d * d;
            gain[static_cast<std::size_t>(i)] = p == 0.0 ? 0.0 : p / (p + sj * sj);
        }
        for (std::size_t i = 0; i < gain.size(); ++i) c2.details[j][i] *= gain[i];
        if (cfg.keep_intermediates) info.gains.push_back(std::move(gain));
    }
    Signal xf = idwt(c2);
    xf.resize(n);
    for (auto& v : xf) v /= h_norm;

    if (cfg.keep_intermediates) {
        info.x_lambda = x_lambda;
        for (auto& v : info.x_lambda) v /= h_norm;
    }
    DeconvolutionResult r;
    r.estimate = std::move(xf);
    r.method = Method::forward;
    r.pulse = h;
    r.forward = std::move(info);
    return r;
}

/// Contiguous bins k in [0, N/2] around the peak of |H| with |H| >= max|H| / 2.
inline auto pulse_passband(const Signal& h, std::size_t n) -> std::pair<std::size_t, std::size_t> {
    const auto H = detail::pulse_spectrum(h, n);
    const std::size_t half = n / 2;
    std::size_t peak = 0;
    for (std::size_t k = 1; k <= half; ++k)
        if (std::abs(H[k]) > std::abs(H[peak])) peak = k;
    const double level = std::abs(H[peak]) / 2.0;
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && std::abs(H[lo - 1]) >= level) --lo;
    while (hi < half && std::abs(H[hi + 1]) >= level) ++hi;
    return {lo, hi};
}

/// Extends the in-band spectrum of x_est outward by AR prediction (Burg fit on
/// the complex in-band bins), keeping the measured band untouched.
inline auto ase_extrapolate(const Signal& x_est, const Signal& h, std::size_t burg_order, AseRecord* record = nullptr)
    -> Signal {
    detail::require_nonempty(x_est, "ase_extrapolate");
    if (norm(x_est) == 0.0) throw DegenerateStatistics("ase_extrapolate: zero estimate");
    const std::size_t n = x_est.size();
    const std::size_t half = n / 2;
    const auto [lo, hi] = pulse_passband(h, n);
    const std::size_t width = hi - lo + 1;
    if (burg_order >= width)
        throw std::invalid_argument("ase_extrapolate: passband of " + std::to_string(width) +
                                    " bins too narrow for Burg order " + std::to_string(burg_order));
    auto X = fft::forward_real(x_est);
    const std::vector<fft::cplx> band(X.begin() + static_cast<long>(lo), X.begin() + static_cast<long>(hi + 1));
    const auto model = burg(band, burg_order);
    const auto& a = model.coefficients;

    std::vector<fft::cplx> z(X.begin(), X.begin() + static_cast<long>(half + 1));
    for (std::size_t k = hi + 1; k <= half; ++k) {
        fft::cplx acc{0.0, 0.0};
        for (std::size_t i = 1; i <= burg_order; ++i) acc += a[i] * z[k - i];
        z[k] = -acc;
    }
    for (std::size_t k = lo; k-- > 0;) {
        fft::cplx acc{0.0, 0.0};
        for (std::size_t i = 1; i <= burg_order && k + i <= half; ++i) acc += std::conj(a[i]) * z[k + i];
        z[k] = -acc;
    }
    z[0] = z[0].real();
    if (n % 2 == 0) z[half] = z[half].real();
    for (const auto& v : z)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NumericalError("ase_extrapolate: AR extrapolation diverged");

    std::vector<fft::cplx> full(n);
    for (std::size_t k = 0; k <= half; ++k) full[k] = z[k];
    for (std::size_t k = half + 1; k < n; ++k) full[k] = std::conj(z[n - k]);
    if (record != nullptr) *record = AseRecord{lo, hi, burg_order};
    return fft::inverse_real(std::move(full));
}

struct PipelineConfig {
    HosaConfig hosa;
    ForwardConfig forward;
};

/// Oracle tau search over 10 log-spaced multipliers in [0.01, 10]; picks the
/// minimum aligned MSE against known reflectivity. Simulation use only.
inline auto forward_tau_search(const Signal& y, const Signal& h, const Signal& x_true, ForwardConfig cfg)
    -> DeconvolutionResult {
    std::optional<DeconvolutionResult> best;
    double best_mse = 0.0;
    for (int i = 0; i < 10; ++i) {
        cfg.tau_multiplier = std::pow(10.0, -2.0 + 3.0 * i / 9.0);
        cfg.tau_multiplier = std::clamp(cfg.tau_multiplier, 0.01, 10.0);
        auto r = forward_deconvolve(y, h, cfg);
        const double mse = aligned_mse(x_true, r.estimate).mse;
        if (!best || mse < best_mse) {
            best_mse = mse;
            best = std::move(r);
        }
    }
    return std::move(*best);
}

/// Blind when h is empty: the pulse is estimated from y first.
inline auto deconvolve_pipeline(const Signal& y, std::optional<Signal> h, Method method, const PipelineConfig& cfg = {},
                                const Signal* x_true = nullptr) -> DeconvolutionResult {
    detail::require_nonempty(y, "deconvolve_pipeline");
    std::optional<PulseEstimate> estimated;
    if (!h) {
        estimated = estimate_pulse(y, cfg.hosa);
        h = estimated->pulse;
    }
    DeconvolutionResult r;
    if (method == Method::wiener_q || method == Method::wiener_ase) {
        r = wiener_q(y, *h, cfg.forward.q_sq);
    } else if (cfg.forward.tau_search) {
        if (x_true == nullptr) throw std::invalid_argument("tau_search requires ground-truth reflectivity");
        r = forward_tau_search(y, *h, *x_true, cfg.forward);
    } else {
        r = forward_deconvolve(y, *h, cfg.forward);
    }
    if (uses_ase(method)) {
        AseRecord rec;
        r.estimate = ase_extrapolate(r.estimate, *h, cfg.forward.burg_order, &rec);
        r.ase = rec;
    }
    r.method = method;
    r.blind = estimated.has_value();
    r.pulse_estimate = std::move(estimated);
    return r;
}

}  // namespace echodeconv
