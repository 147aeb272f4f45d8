#pragma once

// Periodic orthogonal multilevel DWT with Daubechies filters.
// "dbK" means K vanishing moments, 2K taps (db6: 12 taps, db12: 24 taps).

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "signal.hpp"

namespace echodeconv {

namespace detail {

// Synthesis lowpass filters, db1..db12.
inline const std::array<std::vector<double>, 12>& daubechies_table() {
    static const std::array<std::vector<double>, 12> table{{
    // db1
    {
        0.7071067811865476, 0.7071067811865476
    },
    // db2
    {
        0.48296291314453416, 0.8365163037378079, 0.2241438680420134, -0.12940952255126037
    },
    // db3
    {
        0.33267055295008263, 0.8068915093110925, 0.45987750211849154, -0.13501102001025458,
        -0.08544127388202666, 0.03522629188570953
    },
    // db4
    {
        0.2303778133088965, 0.7148465705529157, 0.6308807679298589, -0.027983769416859854,
        -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032
    },
    // db5
    {
        0.16010239797419293, 0.6038292697971896, 0.7243085284377729, 0.13842814590132074,
        -0.24229488706638203, -0.032244869584638375, 0.07757149384004572, -0.006241490212798274,
        -0.012580751999081999, 0.0033357252854737712
    },
    // db6
    {
        0.11154074335010947, 0.49462389039845306, 0.7511339080210954, 0.31525035170919763,
        -0.22626469396543983, -0.12976686756726194, 0.09750160558732304, 0.027522865530305727,
        -0.03158203931748603, 0.0005538422011614961, 0.004777257510945511, -0.0010773010853084796
    },
    // db7
    {
        0.07785205408500918, 0.3965393194819173, 0.7291320908462351, 0.4697822874051931,
        -0.14390600392856498, -0.22403618499387498, 0.07130921926683026, 0.08061260915108308,
        -0.03802993693501441, -0.01657454163066688, 0.01255099855609984, 0.0004295779729213665,
        -0.0018016407040474908, 0.00035371379997452024
    },
    // db8
    {
        0.05441584224310401, 0.31287159091429995, 0.6756307362972898, 0.5853546836542067,
        -0.015829105256349306, -0.2840155429615469, 0.0004724845739132828, 0.12874742662047847,
        -0.017369301001807547, -0.044088253930794755, 0.013981027917398282, 0.008746094047405777,
        -0.004870352993451574, -0.00039174037337694705, 0.0006754494064505693,
        -0.00011747678412476953
    },
    // db9
    {
        0.038077947363878345, 0.24383467461259034, 0.6048231236901112, 0.6572880780513005,
        0.13319738582500756, -0.2932737832791749, -0.09684078322297646, 0.14854074933810638,
        0.03072568147933338, -0.06763282906132997, 0.00025094711483145197, 0.022361662123679096,
        -0.004723204757751397, -0.00428150368246343, 0.0018476468830562265, 0.00023038576352319597,
        -0.0002519631889427101, 3.93473203162716e-05
    },
    // db10
    {
        0.026670057900555554, 0.1881768000776915, 0.5272011889317256, 0.6884590394536035,
        0.2811723436605775, -0.24984642432731538, -0.19594627437737705, 0.12736934033579325,
        0.09305736460357235, -0.07139414716639708, -0.029457536821875813, 0.033212674059341,
        0.0036065535669561697, -0.010733175483330575, 0.001395351747052901, 0.001992405295185056,
        -0.0006858566949597116, -0.00011646685512928545, 9.358867032006959e-05,
        -1.3264202894521244e-05
    },
    // db11
    {
        0.018694297761471083, 0.1440670211506245, 0.44989976435604534, 0.6856867749162006,
        0.41196436894790744, -0.16227524502749036, -0.27423084681794696, 0.0660435881966832,
        0.14981201246637849, -0.046479955116684187, -0.0664387856950252, 0.031335090219046076,
        0.020840904360181062, -0.0153648209062016, -0.0033408588730144454, 0.004928417656059041,
        -0.0003085928588151432, -0.0008930232506662646, 0.0002491525235528235,
        5.4439074699368475e-05, -3.4634984186984996e-05, 4.49427427723651e-06
    },
    // db12
    {
        0.013112257957229518, 0.10956627282118515, 0.37735513521421266, 0.6571987225793071,
        0.5158864784278157, -0.04476388565377463, -0.3161784537527855, -0.023779257256069726,
        0.18247860592757967, 0.00535956967435215, -0.09643212009650708, 0.010849130255822185,
        0.04154627749508444, -0.01221864906974828, -0.012840825198300683, 0.00671149900879551,
        0.0022486072409952378, -0.0021795036186277603, 6.545128212509596e-06,
        0.00038865306282093143, -8.850410920820432e-05, -2.4241545757030785e-05,
        1.2776952219379767e-05, -1.529071758068511e-06
    },
    }};
    return table;
}

}  // namespace detail

struct WaveletSpec {
    int vanishing_moments = 6;  ///< dbK, 1..12
    std::size_t levels = 5;

    [[nodiscard]] auto name() const -> std::string { return "db" + std::to_string(vanishing_moments); }
};

inline auto parse_wavelet_name(const std::string& s) -> int {
    if (s.size() < 3 || s.rfind("db", 0) != 0) throw std::invalid_argument("unknown wavelet '" + s + "' (expected db1..db12)");
    int k = 0;
    try {
        std::size_t used = 0;
        k = std::stoi(s.substr(2), &used);
        if (used != s.size() - 2) k = 0;
    } catch (const std::exception&) {
        k = 0;
    }
    if (k < 1 || k > 12) throw std::invalid_argument("unknown wavelet '" + s + "' (expected db1..db12)");
    return k;
}

/// Synthesis lowpass filter; sums to sqrt(2).
inline auto scaling_filter(int vanishing_moments) -> const std::vector<double>& {
    if (vanishing_moments < 1 || vanishing_moments > 12)
        throw std::invalid_argument("scaling_filter: only db1..db12 are tabulated");
    return detail::daubechies_table()[static_cast<std::size_t>(vanishing_moments - 1)];
}

/// Quadrature-mirror highpass, g[n] = (-1)^n h[L-1-n].
inline auto wavelet_filter(int vanishing_moments) -> std::vector<double> {
    const auto& h = scaling_filter(vanishing_moments);
    const std::size_t taps = h.size();
    std::vector<double> g(taps);
    for (std::size_t n = 0; n < taps; ++n) g[n] = (n % 2 == 0 ? 1.0 : -1.0) * h[taps - 1 - n];
    return g;
}

struct WaveletCoefficients {
    Signal approximation;         ///< coarsest level
    std::vector<Signal> details;  ///< details[0] is the finest level
    WaveletSpec spec;
    std::size_t original_length = 0;
};

namespace detail {

inline void analysis_step(const Signal& x, const std::vector<double>& h, const std::vector<double>& g,
                          Signal& approx, Signal& detail_out) {
    const std::size_t n = x.size();
    const std::size_t half = n / 2;
    approx.assign(half, 0.0);
    detail_out.assign(half, 0.0);
    for (std::size_t k = 0; k < half; ++k) {
        double a = 0.0, d = 0.0;
        for (std::size_t t = 0; t < h.size(); ++t) {
            const double v = x[(2 * k + t) % n];
            a += h[t] * v;
            d += g[t] * v;
        }
        approx[k] = a;
        detail_out[k] = d;
    }
}

inline auto synthesis_step(const Signal& approx, const Signal& detail_in, const std::vector<double>& h,
                           const std::vector<double>& g) -> Signal {
    const std::size_t n = 2 * approx.size();
    Signal x(n, 0.0);
    for (std::size_t k = 0; k < approx.size(); ++k)
        for (std::size_t t = 0; t < h.size(); ++t) x[(2 * k + t) % n] += h[t] * approx[k] + g[t] * detail_in[k];
    return x;
}

}  // namespace detail

inline auto dwt(const Signal& s, const WaveletSpec& spec) -> WaveletCoefficients {
    detail::require_nonempty(s, "dwt");
    if (spec.levels == 0) throw std::invalid_argument("dwt: levels must be positive");
    if (spec.levels >= 63 || s.size() % (std::size_t{1} << spec.levels) != 0)
        throw std::invalid_argument("dwt: length " + std::to_string(s.size()) + " not divisible by 2^" +
                                    std::to_string(spec.levels) + " (levels too deep)");
    const auto& h = scaling_filter(spec.vanishing_moments);
    const auto g = wavelet_filter(spec.vanishing_moments);
    WaveletCoefficients c{{}, {}, spec, s.size()};
    Signal current = s;
    for (std::size_t level = 0; level < spec.levels; ++level) {
        Signal a, d;
        detail::analysis_step(current, h, g, a, d);
        c.details.push_back(std::move(d));
        current = std::move(a);
    }
    c.approximation = std::move(current);
    return c;
}

inline auto idwt(const WaveletCoefficients& c) -> Signal {
    if (c.details.size() != c.spec.levels) throw std::invalid_argument("idwt: detail level count does not match spec");
    const auto& h = scaling_filter(c.spec.vanishing_moments);
    const auto g = wavelet_filter(c.spec.vanishing_moments);
    Signal current = c.approximation;
    for (std::size_t i = c.details.size(); i-- > 0;) {
        if (c.details[i].size() != current.size()) throw std::invalid_argument("idwt: coefficient shape mismatch");
        current = detail::synthesis_step(current, c.details[i], h, g);
    }
    if (current.size() != c.original_length) throw std::invalid_argument("idwt: coefficient shape mismatch");
    return current;
}

/// median(|d|) / 0.6745
inline auto mad_sigma(const Signal& d) -> double {
    if (d.empty()) throw std::invalid_argument("mad_sigma: empty sequence");
    Signal a(d.size());
    std::transform(d.begin(), d.end(), a.begin(), [](double v) { return std::abs(v); });
    const std::size_t mid = a.size() / 2;
    std::nth_element(a.begin(), a.begin() + static_cast<long>(mid), a.end());
    double med = a[mid];
    if (a.size() % 2 == 0) {
        const double lower = *std::max_element(a.begin(), a.begin() + static_cast<long>(mid));
        med = 0.5 * (med + lower);
    }
    return med / 0.6745;
}

enum class LogBase { natural, two, ten };

inline auto parse_log_base(const std::string& s) -> LogBase {
    if (s == "e" || s == "natural") return LogBase::natural;
    if (s == "2") return LogBase::two;
    if (s == "10") return LogBase::ten;
    throw std::invalid_argument("unknown threshold log base '" + s + "' (expected e|2|10)");
}

inline auto to_string(LogBase b) -> std::string {
    switch (b) {
        case LogBase::two: return "2";
        case LogBase::ten: return "10";
        default: return "e";
    }
}

/// sigma * sqrt(2 log N), natural log unless overridden.
inline auto level_threshold(double sigma, std::size_t n, LogBase base = LogBase::natural) -> double {
    if (sigma < 0.0) throw std::invalid_argument("level_threshold: negative sigma");
    if (n < 2) throw std::invalid_argument("level_threshold: N must be >= 2");
    const double ln = std::log(static_cast<double>(n));
    const double lg = base == LogBase::natural ? ln : base == LogBase::two ? std::log2(static_cast<double>(n))
                                                                             : std::log10(static_cast<double>(n));
    return sigma * std::sqrt(2.0 * lg);
}

/// Keeps entries with |d| > T, zeroes the rest.
inline auto hard_threshold(const Signal& d, double threshold) -> Signal {
    if (threshold < 0.0) throw std::invalid_argument("hard_threshold: negative threshold");
    Signal out(d.size());
    std::transform(d.begin(), d.end(), out.begin(), [threshold](double v) { return std::abs(v) > threshold ? v : 0.0; });
    return out;
}

/// MAD sigma of every detail level, finest first.
inline auto per_level_sigmas(const WaveletCoefficients& c) -> std::vector<double> {
    std::vector<double> sig;
    sig.reserve(c.details.size());
    for (const auto& d : c.details) sig.push_back(mad_sigma(d));
    return sig;
}

}  // namespace echodeconv
