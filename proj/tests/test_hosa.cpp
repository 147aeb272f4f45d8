#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include <echodeconv/hosa.hpp>
#include <echodeconv/metrics.hpp>
#include <echodeconv/simulator.hpp>

using namespace echodeconv;
using Catch::Approx;
using cplx = std::complex<double>;

namespace {

auto gaussian(std::size_t n, unsigned seed) -> Signal {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Signal s(n);
    for (auto& v : s) v = g(rng);
    return s;
}

auto triple_loop_cumulant(const Signal& y, long lag) -> std::vector<double> {
    const long n = static_cast<long>(y.size());
    double mu = 0.0;
    for (double v : y) mu += v;
    mu /= static_cast<double>(n);
    const long dim = 2 * lag + 1;
    std::vector<double> c(static_cast<std::size_t>(dim * dim), 0.0);
    for (long m1 = -lag; m1 <= lag; ++m1)
        for (long m2 = -lag; m2 <= lag; ++m2) {
            double acc = 0.0;
            for (long k = 0; k < n; ++k) {
                if (k + m1 < 0 || k + m1 >= n || k + m2 < 0 || k + m2 >= n) continue;
                acc += (y[k] - mu) * (y[k + m1] - mu) * (y[k + m2] - mu);
            }
            c[static_cast<std::size_t>((m1 + lag) * dim + (m2 + lag))] = acc / static_cast<double>(n);
        }
    return c;
}

// Mixed-phase test pulse defined by its zeros: inside-unit-circle zeros a_i
// (factors 1 - a z^-1) and maximum-phase factors 1 - b z.
const std::vector<cplx> inner_zeros{0.5, std::polar(0.4, 1.0), std::polar(0.4, -1.0), -0.3};
const std::vector<cplx> outer_factors{std::polar(0.6, 2.0), std::polar(0.6, -2.0), 0.45};

// Coefficients from z^-(#outer) .. z^(#inner), as a real sequence.
auto pulse_from_zeros() -> Signal {
    std::vector<cplx> poly{1.0};
    auto mul = [&](cplx c0, cplx c1) {  // multiply by (c0 + c1 z^-1)
        std::vector<cplx> out(poly.size() + 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            out[i] += c0 * poly[i];
            out[i + 1] += c1 * poly[i];
        }
        poly = out;
    };
    for (auto a : inner_zeros) mul(1.0, -a);
    // 1 - b z = z (z^-1 - b): the z factor is a pure advance, dropped (shift only)
    for (auto b : outer_factors) mul(-b, 1.0);
    Signal h(poly.size());
    for (std::size_t i = 0; i < poly.size(); ++i) h[i] = poly[i].real();
    return h;
}

// Complex cepstrum of the pulse above, evaluated from its zeros.
auto analytic_cepstrum(long n_max) -> Signal {
    Signal c(static_cast<std::size_t>(2 * n_max + 1), 0.0);
    for (long n = 1; n <= n_max; ++n) {
        cplx pos = 0.0, neg = 0.0;
        for (auto a : inner_zeros) pos += -std::pow(a, static_cast<double>(n)) / static_cast<double>(n);
        for (auto b : outer_factors) neg += -std::pow(b, static_cast<double>(n)) / static_cast<double>(n);
        c[static_cast<std::size_t>(n_max + n)] = pos.real();
        c[static_cast<std::size_t>(n_max - n)] = neg.real();
    }
    return c;
}

auto padded(const Signal& h, std::size_t n) -> Signal {
    Signal out(n, 0.0);
    std::copy(h.begin(), h.end(), out.begin());
    return out;
}

auto max_abs_diff(const Signal& a, const Signal& b) -> double {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Sum-of-squares error between unit-energy versions after best shift/sign.
auto energy_nmse(const Signal& truth, const Signal& est) -> double {
    const std::size_t n = std::max(truth.size(), est.size());
    const auto a = padded(truth, n), b = padded(est, n);
    const double na = norm(a), nb = norm(b);
    double best = 1e300;
    for (std::size_t s = 0; s < n; ++s)
        for (double sign : {1.0, -1.0}) {
            double e = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = a[i] / na - sign * b[(i + n - s) % n] / nb;
                e += d * d;
            }
            best = std::min(best, e);
        }
    return best;
}

}  // namespace

TEST_CASE("third_order_cumulant matches the triple-loop oracle") {
    const Signal hand{1.0, -2.0, 0.5, 3.0, 0.0, -1.0, 2.5, 0.25};
    const auto c = third_order_cumulant(hand, 3);
    const auto oracle = triple_loop_cumulant(hand, 3);
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(c.values[i] == Approx(oracle[i]).margin(1e-12));

    for (unsigned seed = 0; seed < 10; ++seed) {
        const auto y = gaussian(12 + 2 * seed, seed);
        const long lag = static_cast<long>(y.size() / 2 - 1);
        const auto cc = third_order_cumulant(y, static_cast<std::size_t>(lag));
        const auto oo = triple_loop_cumulant(y, lag);
        double scale = 0.0, diff = 0.0;
        for (std::size_t i = 0; i < oo.size(); ++i) {
            scale = std::max(scale, std::abs(oo[i]));
            diff = std::max(diff, std::abs(cc.values[i] - oo[i]));
        }
        CHECK(diff <= 1e-12 * scale);
    }
}

TEST_CASE("cumulant basics") {
    const auto z = third_order_cumulant(Signal(16, 0.0), 4);
    for (double v : z.values) CHECK(v == 0.0);
    CHECK_THROWS(third_order_cumulant(Signal(16, 1.0), 8));

    const auto c = third_order_cumulant(gaussian(200, 5), 10);
    for (long m1 = -10; m1 <= 10; ++m1)
        for (long m2 = -10; m2 <= 10; ++m2) CHECK(std::abs(c.at(m1, m2) - c.at(m2, m1)) <= 1e-12);
}

TEST_CASE("cumulant of Gaussian data vanishes") {
    const std::size_t m = 16384;
    const auto c = third_order_cumulant(gaussian(m, 21), 6);
    double worst = 0.0;
    for (double v : c.values) worst = std::max(worst, std::abs(v));
    CHECK(worst < 5.0 / std::sqrt(static_cast<double>(m)));
}

TEST_CASE("parzen lag window keeps symmetry") {
    const auto c = apply_lag_window(third_order_cumulant(gaussian(300, 8), 12), LagWindow::parzen);
    for (long m1 = -12; m1 <= 12; ++m1)
        for (long m2 = -12; m2 <= 12; ++m2) CHECK(std::abs(c.at(m1, m2) - c.at(m2, m1)) <= 1e-15);
    CHECK(parzen(0.0) == 1.0);
    CHECK(parzen(1.0) == 0.0);
    CHECK(parzen(0.5) == Approx(0.25));
}

TEST_CASE("bicepstrum rejects a zero cumulant") {
    const auto z = third_order_cumulant(Signal(64, 0.0), 8);
    CHECK_THROWS_AS(bicepstrum(z, 32), DegenerateStatistics);
    const auto c = third_order_cumulant(gaussian(64, 1), 8);
    CHECK_THROWS_AS(bicepstrum(c, 16), std::invalid_argument);
}

TEST_CASE("diagonal_cepstrum indexing") {
    auto c = third_order_cumulant(gaussian(256, 3), 15);
    const auto b = bicepstrum(c, 32);
    const auto cep = diagonal_cepstrum(b, 15);
    REQUIRE(cep.size() == 31);
    CHECK(cep[15] == 0.0);
    for (long n = 1; n <= 15; ++n) {
        CHECK(cep[static_cast<std::size_t>(15 + n)] == b.values[static_cast<std::size_t>((32 - n) * 32 + (32 - n))]);
        CHECK(cep[static_cast<std::size_t>(15 - n)] == b.values[static_cast<std::size_t>(n * 32 + n)]);
    }
    Bicepstrum zero{std::vector<double>(32 * 32, 0.0), 32, 0, 0.0};
    for (double v : diagonal_cepstrum(zero, 10)) CHECK(v == 0.0);
    CHECK_THROWS(diagonal_cepstrum(zero, 16));
    CHECK_THROWS(diagonal_cepstrum(zero, 0));
}

TEST_CASE("reconstruct_pulse from an analytic cepstrum") {
    const std::size_t out = 128;
    const auto est = reconstruct_pulse(analytic_cepstrum(63), out);
    const auto truth = canonicalize_pulse(padded(pulse_from_zeros(), out));
    CHECK(norm(est.pulse) == Approx(1.0).margin(1e-12));
    CHECK(max_abs_diff(est.pulse, truth) < 1e-6);
}

TEST_CASE("reconstruct_pulse identity and shift cases") {
    const auto imp = reconstruct_pulse(Signal(21, 0.0), 64);
    Signal expected(64, 0.0);
    expected[32] = 1.0;
    CHECK(max_abs_diff(imp.pulse, expected) < 1e-12);

    // A linear phase exp(-i w r) added to the log spectrum is a delay by r;
    // its cepstral form is real and odd. Even r keeps the Nyquist bin exact.
    const std::size_t n = 128;
    const long nm = 63, r = 6;
    std::vector<cplx> ramp(n, 0.0);
    for (long k = 1; k < static_cast<long>(n) / 2; ++k) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        ramp[static_cast<std::size_t>(k)] = cplx(0.0, -w * r);
        ramp[n - static_cast<std::size_t>(k)] = cplx(0.0, w * r);
    }
    const auto lin = fft::inverse(ramp);
    auto cep = analytic_cepstrum(nm);
    Signal shifted_cep(cep.size());
    Signal full(n);
    for (std::size_t i = 0; i < n; ++i) full[i] = lin[i].real();
    // the ramp cepstrum has full support; lay it out on an odd window covering the grid
    Signal wide(2 * (n / 2) - 1, 0.0);
    const long wm = static_cast<long>(wide.size() / 2);
    for (long k = -wm; k <= wm; ++k) wide[static_cast<std::size_t>(k + wm)] = full[static_cast<std::size_t>((k + static_cast<long>(n)) % static_cast<long>(n))];
    for (long k = -nm; k <= nm; ++k) wide[static_cast<std::size_t>(k + wm)] += cep[static_cast<std::size_t>(k + nm)];
    const auto base = reconstruct_pulse(cep, n);
    const auto moved = reconstruct_pulse(wide, n);
    CHECK(max_abs_diff(base.pulse, moved.pulse) < 1e-6);

    Signal huge(5, 0.0);
    huge[3] = 2000.0;
    CHECK_THROWS_AS(reconstruct_pulse(huge, 64), NumericalError);
    CHECK_THROWS(reconstruct_pulse(Signal(4, 0.0), 64));
    CHECK_THROWS(reconstruct_pulse(Signal(65, 0.0), 64));
}

TEST_CASE("exact triple correlation round trip through the bicepstrum") {
    const Signal h = pulse_from_zeros();
    const long len = static_cast<long>(h.size());
    const long lag = len - 1;
    CumulantMatrix c{std::vector<double>(static_cast<std::size_t>((2 * lag + 1) * (2 * lag + 1)), 0.0),
                     static_cast<std::size_t>(lag), 1};
    for (long m1 = -lag; m1 <= lag; ++m1)
        for (long m2 = -lag; m2 <= lag; ++m2) {
            double acc = 0.0;
            for (long k = 0; k < len; ++k) {
                if (k + m1 < 0 || k + m1 >= len || k + m2 < 0 || k + m2 >= len) continue;
                acc += h[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(k + m1)] * h[static_cast<std::size_t>(k + m2)];
            }
            c.at(m1, m2) = acc;
        }
    const auto b = bicepstrum(c, 128);
    const auto cep = diagonal_cepstrum(b, 63);
    const auto truth_cep = analytic_cepstrum(63);
    CHECK(max_abs_diff(cep, truth_cep) < 1e-9);

    const auto est = reconstruct_pulse(cep, 128);
    CHECK(max_abs_diff(est.pulse, canonicalize_pulse(padded(h, 128))) < 1e-6);

    // the anti-diagonal carries nothing for this model
    double anti = 0.0, diag = 0.0;
    for (long n = 1; n <= 63; ++n) {
        anti = std::max(anti, std::abs(b.at(-n, n)));
        diag = std::max(diag, std::abs(b.at(-n, -n)));
    }
    CHECK(anti < 1e-10 * diag);
}

TEST_CASE("estimate_pulse on noiseless data with a known minimum-phase pulse") {
    Signal h{1.0, -0.9, 0.45, -0.1};  // zeros inside the unit circle
    const auto x = generate_reflectivity(8192, 0.01, 77);
    const auto y = convolve(x, h);
    HosaConfig cfg;
    cfg.pulse_length = 32;
    const auto est = estimate_pulse(y, cfg);
    CHECK(energy_nmse(h, est.pulse) < 0.05);
}

TEST_CASE("estimate_pulse invariants") {
    SimulationConfig sim;
    sim.seed = 5;
    const auto obs = synthesize_observation(sim);
    const auto a = estimate_pulse(obs.observation);
    REQUIRE(a.pulse.size() == 64);
    CHECK(norm(a.pulse) == Approx(1.0).margin(1e-12));
    std::size_t peak = 0;
    for (std::size_t i = 0; i < a.pulse.size(); ++i)
        if (std::abs(a.pulse[i]) > std::abs(a.pulse[peak])) peak = i;
    CHECK(peak == 32);
    CHECK(a.diagnostics.at("segments") == 8.0);

    Signal scaled(obs.observation);
    for (auto& v : scaled) v *= 37.5;
    const auto b = estimate_pulse(scaled);
    CHECK(max_abs_diff(a.pulse, b.pulse) < 1e-6);

    const auto c = estimate_pulse(Signal(obs.observation.begin(), obs.observation.begin() + 2048 / 8));
    CHECK(c.diagnostics.at("segments") == 2.0);
    CHECK_THROWS(estimate_pulse(Signal(obs.observation.begin(), obs.observation.begin() + 255)));
}

TEST_CASE("estimate_pulse reports 16 segments for 2048 samples") {
    SimulationConfig sim;
    sim.signal_length = 2048;
    const auto est = estimate_pulse(synthesize_observation(sim).observation);
    CHECK(est.diagnostics.at("segments") == 16.0);
}

TEST_CASE("estimate_pulse is consistent on long noiseless records") {
    const auto truth = generate_pulse(64);
    std::vector<double> mse;
    for (std::size_t n : {2048u, 4096u, 8192u, 16384u}) {
        double acc = 0.0;
        for (std::uint64_t seed = 100; seed < 120; ++seed) {
            SimulationConfig sim;
            sim.signal_length = n;
            sim.snr_db = infinite_snr;
            sim.seed = seed;
            acc += aligned_mse(truth, estimate_pulse(synthesize_observation(sim).observation).pulse).mse;
        }
        mse.push_back(acc / 20.0);
    }
    CHECK(mse.back() < 0.02);
    CHECK(mse.back() < mse.front());
}

TEST_CASE("gaussianity_test calibration on white noise") {
    const auto r = gaussianity_test(gaussian(4096, 2024));
    CHECK(r.is_gaussian);
    CHECK(r.p_value > 0.05);
    CHECK(r.degrees_of_freedom > 0);
    CHECK(r.smoothing % 2 == 1);
    CHECK_THROWS(gaussianity_test(gaussian(255, 1)));
}

TEST_CASE("gaussianity_test has roughly nominal size") {
    int rejections = 0;
    for (unsigned seed = 0; seed < 100; ++seed)
        if (!gaussianity_test(gaussian(2048, 1000 + seed)).is_gaussian) ++rejections;
    CHECK(rejections <= 12);
}

TEST_CASE("gaussianity_test detects a skewed process") {
    std::mt19937_64 rng(9);
    std::exponential_distribution<double> e(1.0);
    Signal s(4096);
    for (auto& v : s) v = e(rng);
    CHECK_FALSE(gaussianity_test(s).is_gaussian);
}
