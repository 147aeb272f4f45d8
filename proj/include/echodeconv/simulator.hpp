#pragma once

// Synthetic observations: damped-sine pulse, Bernoulli-Gaussian reflectivity,
// white Gaussian noise at an exact realized SNR.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

#include "rng.hpp"
#include "signal.hpp"

namespace echodeconv {

struct SimulationConfig {
    std::size_t pulse_length = 64;
    std::size_t signal_length = 1024;
    double rho = 0.03;               ///< reflector density, probability of a nonzero sample
    double snr_db = 14.0;            ///< infinite_snr for a noiseless observation
    std::uint64_t seed = 1;

    void validate() const {
        if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("SimulationConfig: rho outside [0,1]");
        if (pulse_length >= signal_length)
            throw std::invalid_argument("SimulationConfig: pulse_length must be below signal_length");
        if (std::isnan(snr_db)) throw std::invalid_argument("SimulationConfig: snr_db is NaN");
    }
};

/// h(k) = k sin(2 pi 0.07 k) exp(-0.005 (k - P/2)^2), k = 1..P.
inline auto generate_pulse(std::size_t length) -> Signal {
    if (length < 8) throw std::invalid_argument("generate_pulse: length must be >= 8");
    Signal h(length);
    const double centre = static_cast<double>(length) / 2.0;
    for (std::size_t i = 0; i < length; ++i) {
        const double k = static_cast<double>(i + 1);
        h[i] = k * std::sin(2.0 * std::numbers::pi * 0.07 * k) * std::exp(-0.005 * (k - centre) * (k - centre));
    }
    return h;
}

/// Bernoulli(rho) gate times N(0,1) amplitude, each from its own stream.
inline auto generate_reflectivity(std::size_t length, double rho, std::uint64_t seed) -> Signal {
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("generate_reflectivity: rho outside [0,1]");
    Rng gate_rng(derive_seed(seed, stream::gate));
    Rng amp_rng(derive_seed(seed, stream::amplitude));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Signal x(length, 0.0);
    for (auto& v : x) {
        const bool on = uniform(gate_rng) < rho;
        const double a = gauss(amp_rng);  // drawn every sample so positions and amplitudes stay decoupled
        if (on) v = a;
    }
    return x;
}

struct Observation {
    Signal observation;
    Signal clean;  ///< noiseless convolution
    Signal pulse;
    Signal reflectivity;
    double noise_sigma = 0.0;
};

inline auto synthesize_observation(const SimulationConfig& cfg) -> Observation {
    cfg.validate();
    Observation out;
    out.pulse = generate_pulse(cfg.pulse_length);
    out.reflectivity = generate_reflectivity(cfg.signal_length, cfg.rho, cfg.seed);
    out.clean = convolve(out.reflectivity, out.pulse);
    // No reflectors means no signal energy to reference the SNR against.
    if ((std::isinf(cfg.snr_db) && cfg.snr_db > 0) || norm(out.clean) == 0.0) {
        out.observation = out.clean;
        return out;
    }
    auto noisy = add_noise_at_snr(out.clean, cfg.snr_db, derive_seed(cfg.seed, stream::noise));
    out.observation = std::move(noisy.samples);
    out.noise_sigma = noisy.noise_sigma;
    return out;
}

}  // namespace echodeconv
