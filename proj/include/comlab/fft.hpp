#pragma once

// Iterative radix-2 FFT for power-of-two lengths.  Small sizes only; no
// external dependency wanted for grids of at most a few thousand points.

#include <complex>
#include <cstddef>
#include <vector>

namespace comlab {

using cplx = std::complex<double>;

bool is_pow2(std::size_t n);
int log2_exact(std::size_t n);  // throws ConfigError if n is not a power of two

// In-place transform; sign = -1 forward, +1 backward.  Unscaled.
void fft_inplace(std::vector<cplx>& a, int sign);

std::vector<cplx> fft(std::vector<cplx> a);   // forward, unscaled
std::vector<cplx> ifft(std::vector<cplx> a);  // backward, scaled by 1/N

}  // namespace comlab
