#pragma once

// Burg's method for complex autoregressive models.
// Model convention: x[n] + sum_{i=1..p} a[i] x[n-i] = e[n]; a[0] = 1.

#include <complex>
#include <stdexcept>
#include <vector>

namespace echodeconv {

struct ArModel {
    std::vector<std::complex<double>> coefficients;  ///< a[0..p], a[0] = 1
    double error_power = 0.0;                        ///< final prediction error variance
};

template <class T>
auto burg(const std::vector<T>& data, std::size_t order) -> ArModel {
    using C = std::complex<double>;
    const std::size_t n = data.size();
    if (order < 1) throw std::invalid_argument("burg: order must be >= 1");
    if (order >= n) throw std::invalid_argument("burg: order must be below the sequence length");

    std::vector<C> f(data.begin(), data.end());
    std::vector<C> b = f;
    std::vector<C> a(order + 1, C{0.0, 0.0});
    a[0] = 1.0;
    double power = 0.0;
    for (const auto& v : f) power += std::norm(v);
    power /= static_cast<double>(n);

    for (std::size_t m = 1; m <= order; ++m) {
        // forward errors f[m..n-1], backward errors b[m-1..n-2]
        C num{0.0, 0.0};
        double den = 0.0;
        for (std::size_t k = m; k < n; ++k) {
            num += f[k] * std::conj(b[k - 1]);
            den += std::norm(f[k]) + std::norm(b[k - 1]);
        }
        const C refl = den > 0.0 ? -2.0 * num / den : C{0.0, 0.0};

        const auto prev = a;
        for (std::size_t i = 1; i <= m; ++i) a[i] = prev[i] + refl * std::conj(prev[m - i]);

        for (std::size_t k = n - 1; k >= m; --k) {
            const C fk = f[k];
            const C bk = b[k - 1];
            f[k] = fk + refl * bk;
            b[k] = bk + std::conj(refl) * fk;
            if (k == m) break;
        }
        power *= 1.0 - std::norm(refl);
    }
    return {std::move(a), power};
}

}  // namespace echodeconv
