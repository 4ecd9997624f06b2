#pragma once

// Commutator multiplier symbols.
//
// The one-parameter symbol is the unit-cube average
//     m_{1,d}(xi; xi_1..xi_d) = avg_{alpha in [0,1]^d} sgn(xi + sum_i alpha_i xi_i),
// the two-parameter symbol is the product of two independent copies.  Exact
// evaluation integrates sgn iteratively: with S_0 = sgn and S_j the j-th
// antiderivative vanishing at 0 (S_j(u) = u^{j-1}|u| / j!),
//     m_{1,d} = (prod_i Delta_{xi_i}/xi_i) S_d (xi)
// which expands into an alternating sum of S_d over subset sums.  Zero xi_i
// drop out exactly (the integrand does not depend on alpha_i).  The subset
// expansion cancels catastrophically as d grows, hence the exact path is
// limited to d <= 3; beyond that callers must use Monte Carlo.
//
// Monte Carlo sampling is chunked with one RNG substream per fixed-size chunk
// and a chunk-ordered reduction, so results are bit-identical for a given
// seed regardless of the execution policy.

#include <complex>
#include <cstdint>
#include <vector>

#include "comlab/bumps.hpp"
#include "comlab/parallel.hpp"

namespace comlab {

// sgn with sgn(0) = 0, the symmetric-average convention used throughout.
inline double sign_of(double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); }

enum class SymbolMethod { exact_piecewise, monte_carlo };

struct SymbolQuery {
    int d = 1;
    double xi = 0.0;
    std::vector<double> xi_parts;  // xi_1..xi_d
    double eta = 0.0;              // second parameter (m2d only)
    std::vector<double> eta_parts; // eta_1..eta_d (m2d only)
    SymbolMethod method = SymbolMethod::exact_piecewise;
    std::int64_t samples = 1 << 17; // monte_carlo only; >= 1
    std::uint64_t seed = 1;         // monte_carlo only
};

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;  // sample standard error of the mean
    std::int64_t samples = 0;
};

// Closed-form m_{1,d}; parts may contain zeros (they drop out); throws
// UnsupportedExactError when more than three parts are given.
double m1d_exact(double xi, const std::vector<double>& parts);

// Monte Carlo estimate of m_{1,d} for any d >= 0.
McEstimate m1d_mc(double xi, const std::vector<double>& parts, std::int64_t samples,
                  std::uint64_t seed, Exec exec = Exec::serial);

// Dispatch on query.method; |result| <= 1 always.
double m1d(const SymbolQuery& q, Exec exec = Exec::serial);

// Two-parameter symbol: the product of the xi-side and eta-side m1d values.
double m2d(const SymbolQuery& q, Exec exec = Exec::serial);

// Double Fourier coefficients of the windowed symbol
//     W(u, v) = m_{1,1}(u, v) * WPhi^(u / 2^{r1-S}) * WPsi^(v / 2^{r1})
// on the periodization box [-2^{r1+1}, 2^{r1+1}]^2, so that
//     W(u, v) = sum_{n,n1} C_{n,n1} e^{2 pi i n u / L} e^{2 pi i n1 v / L},
// L = 2^{r1+2}.  The windows must be compact-frequency families so W is
// supported strictly inside the box.
//
// The low-frequency window sits S = 3 octaves below the annular window: its
// support |u| <= (3/32) 2^{r1} then stays clear of the annulus |v| >= 2^{r1}/8,
// so the kink line u = -v of m_{1,1} never meets the support and the only
// singular line left is the axis-parallel u = 0.  That is what produces the
// quadratic decay in n together with superpolynomial decay in n1 that the
// table's decay constant measures.
inline constexpr int kSymbolWindowSeparation = 3;
struct CoeffTable {
    int r1 = 0;
    int lattice_bound = 0;  // coefficients kept for |n|, |n1| <= lattice_bound
    int grid_n = 0;         // DFT grid used per axis
    double box_half = 0.0;  // 2^{r1+1}
    std::vector<cplx> coeff;  // (2b+1)^2 row-major over (n + b, n1 + b)
    double decay_constant = 0.0;  // sup |C_{n,n1}| <n>^2 <n1>^3, <m> = 2+|m|

    cplx at(int n, int n1) const;
    double period() const { return 2.0 * box_half; }
};

CoeffTable symbol_fourier_coeffs(int r1, const BumpFamily& window_phi,
                                 const BumpFamily& window_psi, int lattice_bound,
                                 int grid_n = 1024, Exec exec = Exec::serial);

}  // namespace comlab
