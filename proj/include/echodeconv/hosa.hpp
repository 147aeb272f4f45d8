#pragma once

// Pulse estimation from third-order statistics.
//
// Pipeline: per-segment biased cumulant -> segment average -> lag window ->
// bicepstrum -> cepstrum read off the bicepstrum -> homomorphic reconstruction.
//
// Orientation note. For y = h * x with x i.i.d. skewed, the bicepstrum of y
// vanishes except on the two lag axes and on the diagonal m1 = m2:
//   b(m, 0) = b(0, m) = -h^(-m) (m != 0)    b(-n, -n) = h^(n)
// so the pulse cepstrum is taken from the diagonal, b(-n, -n). The
// anti-diagonal b(-n, n) is identically zero for this model.
// The ratio transform F^-1{F[m1 c] / F[c]} yields m1 * b(m1, m2); the lag
// weight is divided back out when the bicepstrum is formed.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "error.hpp"
#include "fft.hpp"
#include "signal.hpp"

namespace echodeconv {

enum class LagWindow { none, parzen };

inline auto to_string(LagWindow w) -> std::string { return w == LagWindow::parzen ? "parzen" : "none"; }

inline auto parse_lag_window(const std::string& s) -> LagWindow {
    if (s == "parzen") return LagWindow::parzen;
    if (s == "none") return LagWindow::none;
    throw std::invalid_argument("unknown lag window '" + s + "' (expected parzen|none)");
}

struct HosaConfig {
    std::size_t segment_length = 128;
    std::size_t lag = 63;           ///< cumulant lags -lag..lag
    std::size_t fft_size = 128;     ///< 2D transform size and reconstruction length
    std::size_t pulse_length = 64;  ///< output crop around the peak; 0 keeps fft_size samples
    LagWindow window = LagWindow::parzen;
    double epsilon = 1e-8;          ///< relative denominator floor
};

struct CumulantMatrix {
    std::vector<double> values;  ///< row-major, (2L+1) x (2L+1), row = m1
    std::size_t lag = 0;
    std::size_t segments = 1;

    [[nodiscard]] auto dim() const -> std::size_t { return 2 * lag + 1; }
    [[nodiscard]] auto at(long m1, long m2) const -> double {
        const long l = static_cast<long>(lag);
        return values[static_cast<std::size_t>((m1 + l) * static_cast<long>(dim()) + (m2 + l))];
    }
    auto at(long m1, long m2) -> double& {
        const long l = static_cast<long>(lag);
        return values[static_cast<std::size_t>((m1 + l) * static_cast<long>(dim()) + (m2 + l))];
    }
};

/// c(m1,m2) = (1/M) sum_k y(k) y(k+m1) y(k+m2) of the mean-removed input,
/// products reaching outside the record count as zero.
inline auto third_order_cumulant(const Signal& y, std::size_t lag) -> CumulantMatrix {
    detail::require_nonempty(y, "third_order_cumulant");
    if (2 * lag >= y.size()) throw std::invalid_argument("third_order_cumulant: lag must be < length/2");
    const long n = static_cast<long>(y.size());
    const long l = static_cast<long>(lag);
    const double mu = mean(y);
    Signal z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = y[i] - mu;

    CumulantMatrix c{std::vector<double>((2 * lag + 1) * (2 * lag + 1), 0.0), lag, 1};
    Signal prod(y.size());
    for (long m1 = -l; m1 <= l; ++m1) {
        for (long k = 0; k < n; ++k) {
            const long j = k + m1;
            prod[static_cast<std::size_t>(k)] = (j >= 0 && j < n) ? z[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(j)] : 0.0;
        }
        for (long m2 = m1; m2 <= l; ++m2) {
            const long k0 = std::max(0L, -m2);
            const long k1 = std::min(n, n - m2);
            double acc = 0.0;
            for (long k = k0; k < k1; ++k) acc += prod[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(k + m2)];
            c.at(m1, m2) = acc / static_cast<double>(n);
            c.at(m2, m1) = c.at(m1, m2);
        }
    }
    return c;
}

/// Average of per-segment cumulants over consecutive non-overlapping segments
/// (each segment mean-removed on its own). Summation runs in segment order.
inline auto segment_averaged_cumulant(const Signal& y, std::size_t segment_length, std::size_t lag)
    -> CumulantMatrix {
    if (segment_length == 0) throw std::invalid_argument("segment_averaged_cumulant: zero segment length");
    const std::size_t count = y.size() / segment_length;
    if (count < 2)
        throw std::invalid_argument("signal too short: need at least " + std::to_string(2 * segment_length) +
                                    " samples for two segments of " + std::to_string(segment_length));
    CumulantMatrix avg{std::vector<double>((2 * lag + 1) * (2 * lag + 1), 0.0), lag, count};
    for (std::size_t s = 0; s < count; ++s) {
        const Signal seg(y.begin() + static_cast<long>(s * segment_length),
                         y.begin() + static_cast<long>((s + 1) * segment_length));
        const auto c = third_order_cumulant(seg, lag);
        for (std::size_t i = 0; i < avg.values.size(); ++i) avg.values[i] += c.values[i];
    }
    for (auto& v : avg.values) v /= static_cast<double>(count);
    return avg;
}

/// Parzen lag window, u = |m| / (lag + 1).
inline auto parzen(double u) -> double {
    u = std::abs(u);
    if (u <= 0.5) return 1.0 - 6.0 * u * u + 6.0 * u * u * u;
    if (u <= 1.0) return 2.0 * (1.0 - u) * (1.0 - u) * (1.0 - u);
    return 0.0;
}

/// Applies w(m1) w(m2) w(m1 - m2), which keeps the cumulant symmetries.
inline auto apply_lag_window(CumulantMatrix c, LagWindow window) -> CumulantMatrix {
    if (window == LagWindow::none) return c;
    const long l = static_cast<long>(c.lag);
    const double scale = static_cast<double>(c.lag + 1);
    for (long m1 = -l; m1 <= l; ++m1)
        for (long m2 = -l; m2 <= l; ++m2)
            c.at(m1, m2) *= parzen(m1 / scale) * parzen(m2 / scale) * parzen((m1 - m2) / scale);
    return c;
}

struct Bicepstrum {
    std::vector<double> values;  ///< fft_size x fft_size, lag m stored at index m mod fft_size
    std::size_t fft_size = 0;
    std::size_t stabilized_bins = 0;  ///< denominator bins lifted by the epsilon floor
    double imag_residue = 0.0;        ///< ||imag|| / ||real|| of the inverse transform

    [[nodiscard]] auto at(long m1, long m2) const -> double {
        const long n = static_cast<long>(fft_size);
        const auto i = static_cast<std::size_t>(((m1 % n) + n) % n);
        const auto j = static_cast<std::size_t>(((m2 % n) + n) % n);
        return values[i * fft_size + j];
    }
};

inline auto bicepstrum(const CumulantMatrix& c, std::size_t fft_size, double epsilon = 1e-8) -> Bicepstrum {
    if (fft_size < c.dim()) throw std::invalid_argument("bicepstrum: fft_size must be >= 2L+1");
    const std::size_t n = fft_size;
    const long l = static_cast<long>(c.lag);
    const long ln = static_cast<long>(n);
    auto wrap = [&](long m) { return static_cast<std::size_t>(((m % ln) + ln) % ln); };

    std::vector<fft::cplx> plain(n * n, 0.0), weighted(n * n, 0.0);
    bool any = false;
    for (long m1 = -l; m1 <= l; ++m1)
        for (long m2 = -l; m2 <= l; ++m2) {
            const double v = c.at(m1, m2);
            any = any || v != 0.0;
            plain[wrap(m1) * n + wrap(m2)] = v;
            weighted[wrap(m1) * n + wrap(m2)] = static_cast<double>(m1) * v;
        }
    if (!any) throw DegenerateStatistics("all-zero cumulant");

    auto den = fft::forward2d(std::move(plain), n, n);
    auto num = fft::forward2d(std::move(weighted), n, n);
    double peak = 0.0;
    for (const auto& d : den) peak = std::max(peak, std::abs(d));
    const double floor = epsilon * peak;
    std::size_t lifted = 0;
    for (std::size_t i = 0; i < den.size(); ++i) {
        if (std::abs(den[i]) < floor) {
            den[i] += floor;
            ++lifted;
        }
        num[i] /= den[i];
    }
    const auto ratio = fft::inverse2d(std::move(num), n, n);

    double re2 = 0.0, im2 = 0.0;
    for (const auto& v : ratio) {
        re2 += v.real() * v.real();
        im2 += v.imag() * v.imag();
    }
    const double residue = re2 > 0.0 ? std::sqrt(im2 / re2) : 0.0;
    if (residue > 1e-6) throw NumericalError("ill-conditioned bicepstrum (imaginary residue " + std::to_string(residue) + ")");

    // ratio holds m1 * b(m1, m2); undo the weight, using the exchange symmetry
    // b(0, m) = b(m, 0) for the row the weight annihilates.
    Bicepstrum b{std::vector<double>(n * n, 0.0), n, lifted, residue};
    const long half = ln / 2;
    auto signed_lag = [&](long i) { return i > half ? i - ln : i; };
    for (long i = 0; i < ln; ++i) {
        const long m1 = signed_lag(i);
        for (long j = 0; j < ln; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i * ln + j);
            if (m1 != 0) {
                b.values[idx] = ratio[idx].real() / static_cast<double>(m1);
            } else {
                const long m2 = signed_lag(j);
                if (m2 != 0) b.values[idx] = ratio[static_cast<std::size_t>(j * ln)].real() / static_cast<double>(m2);
            }
        }
    }
    return b;
}

/// Pulse cepstrum h^(n) = b(-n, -n) for n in [-n_max, n_max], centred
/// (index n_max holds n = 0, which is fixed at 0).
inline auto diagonal_cepstrum(const Bicepstrum& b, std::size_t n_max) -> Signal {
    if (n_max == 0 || 2 * n_max + 1 > b.fft_size)
        throw std::invalid_argument("diagonal_cepstrum: n_max out of range for the bicepstrum grid");
    const long nm = static_cast<long>(n_max);
    Signal cep(2 * n_max + 1, 0.0);
    for (long n = -nm; n <= nm; ++n)
        if (n != 0) cep[static_cast<std::size_t>(n + nm)] = b.at(-n, -n);
    return cep;
}

struct PulseEstimate {
    Signal pulse;     ///< unit energy, peak at index pulse.size() / 2
    Signal cepstrum;  ///< centred, as passed to reconstruction
    std::map<std::string, double> diagnostics;
};

/// Unit energy and peak |value| moved (circularly) to index size/2.
inline auto canonicalize_pulse(Signal h) -> Signal {
    const double e = norm(h);
    if (e == 0.0) throw DegenerateStatistics("zero-energy pulse");
    for (auto& v : h) v /= e;
    std::size_t peak = 0;
    for (std::size_t i = 1; i < h.size(); ++i)
        if (std::abs(h[i]) > std::abs(h[peak])) peak = i;
    const std::size_t n = h.size();
    const std::size_t target = n / 2;
    Signal out(n);
    for (std::size_t i = 0; i < n; ++i) out[(i + target + n - peak) % n] = h[i];
    return out;
}

/// h = Re F^-1{ exp(F{h^}) } with the cepstrum laid out circularly on out_length points.
inline auto reconstruct_pulse(const Signal& cepstrum, std::size_t out_length) -> PulseEstimate {
    if (cepstrum.empty() || cepstrum.size() % 2 == 0)
        throw std::invalid_argument("reconstruct_pulse: cepstrum must have odd length 2*n_max+1");
    detail::require_finite(cepstrum, "reconstruct_pulse");
    if (out_length < cepstrum.size()) throw std::invalid_argument("reconstruct_pulse: out_length below cepstrum support");
    const long nm = static_cast<long>(cepstrum.size() / 2);
    const long n = static_cast<long>(out_length);

    std::vector<fft::cplx> buf(out_length, 0.0);
    for (long k = -nm; k <= nm; ++k) buf[static_cast<std::size_t>((k + n) % n)] = cepstrum[static_cast<std::size_t>(k + nm)];
    auto log_spec = fft::forward(std::move(buf));
    double max_log = 0.0;
    for (auto& v : log_spec) {
        max_log = std::max(max_log, v.real());
        if (v.real() > 700.0) throw NumericalError("cepstrum divergence: log-magnitude exceeds exp range");
        v = std::exp(v);
    }
    auto h = fft::inverse_real(std::move(log_spec));
    PulseEstimate est{canonicalize_pulse(std::move(h)), cepstrum, {}};
    est.diagnostics["max_log_magnitude"] = max_log;
    return est;
}

/// Window of `length` samples around the canonical peak, renormalized.
inline auto crop_pulse(const Signal& canonical, std::size_t length) -> Signal {
    if (length == 0 || length >= canonical.size()) return canonical;
    const std::size_t start = canonical.size() / 2 - length / 2;
    Signal out(canonical.begin() + static_cast<long>(start), canonical.begin() + static_cast<long>(start + length));
    return canonicalize_pulse(std::move(out));
}

inline auto estimate_pulse(const Signal& y, const HosaConfig& cfg = {}) -> PulseEstimate {
    if (y.size() < 2 * cfg.segment_length)
        throw std::invalid_argument("signal too short: need at least " + std::to_string(2 * cfg.segment_length) +
                                    " samples (two segments of " + std::to_string(cfg.segment_length) + ")");
    if (cfg.pulse_length > cfg.fft_size) throw std::invalid_argument("estimate_pulse: pulse_length exceeds fft_size");
    auto c = segment_averaged_cumulant(y, cfg.segment_length, cfg.lag);
    const auto segments = c.segments;
    c = apply_lag_window(std::move(c), cfg.window);
    const auto b = bicepstrum(c, cfg.fft_size, cfg.epsilon);
    const auto cep = diagonal_cepstrum(b, cfg.fft_size / 2 - 1);
    auto est = reconstruct_pulse(cep, cfg.fft_size);
    est.pulse = crop_pulse(est.pulse, cfg.pulse_length);
    est.diagnostics["segments"] = static_cast<double>(segments);
    est.diagnostics["lag"] = static_cast<double>(cfg.lag);
    est.diagnostics["fft_size"] = static_cast<double>(cfg.fft_size);
    est.diagnostics["stabilized_bins"] = static_cast<double>(b.stabilized_bins);
    est.diagnostics["epsilon"] = cfg.epsilon;
    est.diagnostics["imag_residue"] = b.imag_residue;
    est.diagnostics["parzen_window"] = cfg.window == LagWindow::parzen ? 1.0 : 0.0;
    return est;
}

struct GaussianityConfig {
    double smoothing_exponent = 0.51;  ///< frequency-smoothing square side M = N^exponent
    double alpha = 0.05;
};

struct GaussianityResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool is_gaussian = true;
    std::size_t degrees_of_freedom = 0;
    std::size_t smoothing = 0;
};

/// Frequency-smoothed zero-bispectrum test. The bispectrum is estimated by
/// averaging Y(j) Y(k) conj(Y(j+k)) over M x M frequency squares that lie
/// fully inside the principal domain 0 < k < j, j + k < N/2. Each square gives
/// 2 |B|^2 / var(B), asymptotically chi-squared with 2 degrees of freedom
/// under Gaussianity.
inline auto gaussianity_test(const Signal& y, const GaussianityConfig& cfg = {}) -> GaussianityResult {
    if (y.size() < 256) throw std::invalid_argument("gaussianity_test: record too short (need >= 256 samples)");
    const std::size_t n = y.size();
    const double mu = mean(y);
    Signal z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = y[i] - mu;
    if (detail::squared_norm(z) == 0.0) throw DegenerateStatistics("constant record");
    const auto spec = fft::forward_real(z);
    std::vector<double> power(n);
    for (std::size_t i = 0; i < n; ++i) power[i] = std::norm(spec[i]);

    auto m = static_cast<std::size_t>(std::lround(std::pow(static_cast<double>(n), cfg.smoothing_exponent)));
    if (m % 2 == 0) ++m;
    const std::size_t half = n / 2;
    const std::size_t squares = half / m;

    double statistic = 0.0;
    std::size_t q = 0;
    for (std::size_t a = 0; a < squares; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
            const std::size_t j0 = a * m, k0 = b * m;
            // full square inside the domain: smallest k >= 1, largest k < smallest j,
            // largest j + largest k < half
            if (k0 < 1 || k0 + m - 1 >= j0 || (j0 + m - 1) + (k0 + m - 1) >= half) continue;
            fft::cplx sum{0.0, 0.0};
            double var = 0.0;
            for (std::size_t j = j0; j < j0 + m; ++j)
                for (std::size_t k = k0; k < k0 + m; ++k) {
                    sum += spec[j] * spec[k] * std::conj(spec[j + k]);
                    var += power[j] * power[k] * power[j + k];
                }
            const double cells = static_cast<double>(m * m);
            statistic += 2.0 * std::norm(sum / cells) / (var / cells) * cells;
            ++q;
        }
    }
    if (q == 0) throw std::invalid_argument("gaussianity_test: record too short for the smoothing window");
    boost::math::chi_squared dist(static_cast<double>(2 * q));
    GaussianityResult r;
    r.statistic = statistic;
    r.p_value = boost::math::cdf(boost::math::complement(dist, statistic));
    r.is_gaussian = r.p_value > cfg.alpha;
    r.degrees_of_freedom = 2 * q;
    r.smoothing = m;
    return r;
}

}  // namespace echodeconv
