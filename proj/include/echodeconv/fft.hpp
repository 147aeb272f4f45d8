#pragma once

// Thin FFTW3 wrappers. Planning is not thread-safe in FFTW, so plan creation
// and destruction go through one process-wide mutex; execution is lock-free.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace echodeconv::fft {

using cplx = std::complex<double>;

namespace detail {

inline auto planner_mutex() -> std::mutex& {
    static std::mutex m;
    return m;
}

inline auto as_fftw(cplx* p) -> fftw_complex* { return reinterpret_cast<fftw_complex*>(p); }

// Plan and run a complex transform of the given rank/shape in place.
inline void run_c2c(std::vector<cplx>& data, const std::vector<int>& dims, int sign) {
    fftw_plan plan = nullptr;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), as_fftw(data.data()),
                             as_fftw(data.data()), sign, FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw std::runtime_error("fftw: plan creation failed");
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

}  // namespace detail

/// Unnormalized forward DFT, X[k] = sum x[n] exp(-2 pi i k n / N).
inline auto forward(std::vector<cplx> data) -> std::vector<cplx> {
    if (data.empty()) throw std::invalid_argument("fft::forward: empty input");
    detail::run_c2c(data, {static_cast<int>(data.size())}, FFTW_FORWARD);
    return data;
}

/// Inverse DFT including the 1/N factor.
inline auto inverse(std::vector<cplx> data) -> std::vector<cplx> {
    if (data.empty()) throw std::invalid_argument("fft::inverse: empty input");
    detail::run_c2c(data, {static_cast<int>(data.size())}, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= scale;
    return data;
}

/// Forward DFT of a real sequence zero-padded (or truncated) to n points.
inline auto forward_real(const std::vector<double>& x, std::size_t n) -> std::vector<cplx> {
    std::vector<cplx> buf(n, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < std::min(n, x.size()); ++i) buf[i] = x[i];
    return forward(std::move(buf));
}

inline auto forward_real(const std::vector<double>& x) -> std::vector<cplx> {
    return forward_real(x, x.size());
}

/// Real part of the inverse DFT.
inline auto inverse_real(std::vector<cplx> spectrum) -> std::vector<double> {
    auto t = inverse(std::move(spectrum));
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i].real();
    return out;
}

/// Row-major 2D transforms on an n0 x n1 grid.
inline auto forward2d(std::vector<cplx> data, std::size_t n0, std::size_t n1) -> std::vector<cplx> {
    if (data.size() != n0 * n1) throw std::invalid_argument("fft::forward2d: shape mismatch");
    detail::run_c2c(data, {static_cast<int>(n0), static_cast<int>(n1)}, FFTW_FORWARD);
    return data;
}

inline auto inverse2d(std::vector<cplx> data, std::size_t n0, std::size_t n1) -> std::vector<cplx> {
    if (data.size() != n0 * n1) throw std::invalid_argument("fft::inverse2d: shape mismatch");
    detail::run_c2c(data, {static_cast<int>(n0), static_cast<int>(n1)}, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(n0 * n1);
    for (auto& v : data) v *= scale;
    return data;
}

}  // namespace echodeconv::fft
