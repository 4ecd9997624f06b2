#include "comlab/fft.hpp"

#include <cmath>
#include <numbers>

#include "comlab/errors.hpp"

namespace comlab {

bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

int log2_exact(std::size_t n) {
    if (!is_pow2(n)) throw ConfigError("length must be a power of two, got " + std::to_string(n));
    int k = 0;
    while ((std::size_t{1} << k) < n) ++k;
    return k;
}

void fft_inplace(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    log2_exact(n);

    // Bit reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<cplx> fft(std::vector<cplx> a) {
    fft_inplace(a, -1);
    return a;
}

std::vector<cplx> ifft(std::vector<cplx> a) {
    fft_inplace(a, +1);
    const double inv = 1.0 / static_cast<double>(a.size());
    for (auto& z : a) z *= inv;
    return a;
}

}  // namespace comlab
