#pragma once

// Evaluation metrics. Blind estimates are defined only up to gain, circular
// shift and sign, so comparisons first canonicalize: both signals are scaled
// to unit peak magnitude and the estimate is shifted/sign-flipped onto the
// truth at the maximum of |circular cross-correlation|.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "error.hpp"
#include "fft.hpp"
#include "signal.hpp"

namespace echodeconv {

struct Alignment {
    long shift = 0;              ///< circular shift applied to the estimate
    int sign = 1;
    double truth_scale = 1.0;    ///< divisor applied to the truth
    double estimate_scale = 1.0; ///< divisor applied to the estimate
};

struct AlignedMse {
    double mse = 0.0;
    Alignment alignment;
};

namespace detail {

inline auto peak_magnitude(const Signal& s) -> double {
    double m = 0.0;
    for (double v : s) m = std::max(m, std::abs(v));
    return m;
}

/// Shift k maximizing |sum_n a[n] b[n-k]| (circular) and the sign of that sum.
inline auto best_circular_lag(const Signal& a, const Signal& b) -> std::pair<long, int> {
    const auto fa = fft::forward_real(a);
    const auto fb = fft::forward_real(b);
    std::vector<fft::cplx> prod(fa.size());
    for (std::size_t i = 0; i < fa.size(); ++i) prod[i] = fa[i] * std::conj(fb[i]);
    const auto xc = fft::inverse_real(std::move(prod));
    std::size_t best = 0;
    for (std::size_t i = 1; i < xc.size(); ++i)
        if (std::abs(xc[i]) > std::abs(xc[best]) * (1.0 + 1e-12)) best = i;
    return {static_cast<long>(best), xc[best] < 0.0 ? -1 : 1};
}

inline auto circular_shift(const Signal& s, long k) -> Signal {
    const long n = static_cast<long>(s.size());
    Signal out(s.size());
    for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(((i + k) % n + n) % n)] = s[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace detail

/// Canonicalizes `estimate` onto `truth`; both are zero-padded to the longer
/// length. Returns the aligned, peak-normalized pair.
inline auto canonical_pair(const Signal& truth, const Signal& estimate, Alignment* alignment = nullptr)
    -> std::pair<Signal, Signal> {
    detail::require_nonempty(truth, "canonical_pair");
    detail::require_nonempty(estimate, "canonical_pair");
    const double st = detail::peak_magnitude(truth);
    const double se = detail::peak_magnitude(estimate);
    if (st == 0.0 || se == 0.0) throw std::invalid_argument("aligned comparison: zero-energy input");
    const std::size_t n = std::max(truth.size(), estimate.size());
    Signal a(n, 0.0), b(n, 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) a[i] = truth[i] / st;
    for (std::size_t i = 0; i < estimate.size(); ++i) b[i] = estimate[i] / se;
    const auto [lag, sign] = detail::best_circular_lag(a, b);
    b = detail::circular_shift(b, lag);
    if (sign < 0)
        for (auto& v : b) v = -v;
    if (alignment != nullptr) *alignment = Alignment{lag, sign, st, se};
    return {std::move(a), std::move(b)};
}

/// Mean squared difference after canonicalization.
inline auto aligned_mse(const Signal& truth, const Signal& estimate) -> AlignedMse {
    AlignedMse r;
    const auto [a, b] = canonical_pair(truth, estimate, &r.alignment);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    r.mse = acc / static_cast<double>(a.size());
    return r;
}

/// 10 log10(||x - y||^2 / ||x - x_est||^2) on canonicalized signals;
/// +infinity for a perfect estimate.
inline auto isnr_db(const Signal& y, const Signal& x_true, const Signal& x_est) -> double {
    if (y.size() != x_true.size() || x_est.size() != x_true.size())
        throw std::invalid_argument("isnr_db: length mismatch");
    const auto [xa, ya] = canonical_pair(x_true, y);
    const auto [xb, ea] = canonical_pair(x_true, x_est);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xa.size(); ++i) {
        num += (xa[i] - ya[i]) * (xa[i] - ya[i]);
        den += (xb[i] - ea[i]) * (xb[i] - ea[i]);
    }
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    if (num == den) return 0.0;
    return 10.0 * std::log10(num / den);
}

struct ResolutionReport {
    double width_before = 0.0;
    double width_after = 0.0;
    double gain = 1.0;
};

/// -drop_db width of the envelope autocovariance main lobe.
inline auto envelope_lobe_width(const Signal& s, double drop_db = 3.0) -> double {
    const auto env = envelope(s);
    const std::size_t max_lag = std::min<std::size_t>(s.size() - 1, std::max<std::size_t>(s.size() / 4, 1));
    return mainlobe_width_at_drop(autocovariance_normalized(env, max_lag), drop_db);
}

inline auto axial_resolution_gain(const Signal& before, const Signal& after, double drop_db = 3.0)
    -> ResolutionReport {
    ResolutionReport r;
    r.width_before = envelope_lobe_width(before, drop_db);
    r.width_after = envelope_lobe_width(after, drop_db);
    r.gain = r.width_before / r.width_after;
    return r;
}

struct MetricsReport {
    double mse = 0.0;
    double isnr_db = 0.0;
    double width_before_samples = 0.0;
    double width_after_samples = 0.0;
    double axial_resolution_gain = 1.0;
    Alignment alignment;
};

/// Full report for a reflectivity estimate against ground truth.
inline auto evaluate(const Signal& y, const Signal& x_true, const Signal& x_est, double drop_db = 3.0)
    -> MetricsReport {
    MetricsReport m;
    const auto mse = aligned_mse(x_true, x_est);
    m.mse = mse.mse;
    m.alignment = mse.alignment;
    m.isnr_db = isnr_db(y, x_true, x_est);
    const auto res = axial_resolution_gain(y, x_est, drop_db);
    m.width_before_samples = res.width_before;
    m.width_after_samples = res.width_after;
    m.axial_resolution_gain = res.gain;
    return m;
}

}  // namespace echodeconv
