#pragma once

// Shifted dyadic maximal / square operators, bi-parameter hybrids, and the
// Calderon-Zygmund stopping-time decomposition built on them.
//
// Exactness discipline: every dyadic average in this module is read off one
// shared pairwise sum tree (DyadicSums).  Block sizes are powers of two, so
// sum / size is an exact floating-point operation, and the averaged pieces
// g_k take the value (tree sum) / size on each selected interval.  Pairwise
// trees over 2^m equal values are again exact, which makes the decomposition
// invariants -- maximality, F <= alpha off Omega, the coverage inclusion and
// the pointwise domination M_n f'' <= M_n g -- hold bitwise on the grid, not
// merely up to rounding.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "comlab/bumps.hpp"
#include "comlab/dyadic.hpp"
#include "comlab/parallel.hpp"

namespace comlab {

// Pairwise block-sum tree over the |samples| of a grid function.
// level(m)[b] is the sum over the 2^m cells starting at cell b 2^m.
class DyadicSums {
  public:
    static DyadicSums build(const GridFunction1D& f);        // sums of |f|
    static DyadicSums build_raw(const std::vector<double>& cells);

    int levels() const { return static_cast<int>(level_.size()); }  // log2 n + 1
    std::size_t size() const { return n_; }
    double block_sum(int m, std::size_t b) const { return level_[static_cast<std::size_t>(m)][b]; }
    // exact: division by a power of two
    double block_avg(int m, std::size_t b) const {
        return block_sum(m, b) / static_cast<double>(std::size_t{1} << m);
    }

  private:
    std::size_t n_ = 0;
    std::vector<std::vector<double>> level_;
};

// M_n f(x) = sup over dyadic J containing x (block sizes 2^m cells for m in
// [min_block_log2, max_block_log2]) of the average of |f| over J + n|J|.
// max_block_log2 = -1 means the full resolvable range up to the torus.
GridFunction1D shifted_maximal(const GridFunction1D& f, std::int64_t n,
                               int min_block_log2 = 0, int max_block_log2 = -1,
                               Exec exec = Exec::serial);

// sup_{|k| <= K} |f * F_k^{n/2^k}| for a Phi-type family (the "M part").
GridFunction1D scale_sup(const GridFunction1D& f, const BumpFamily& family, std::int64_t n,
                         int K, Exec exec = Exec::serial);

// S_n f = (sum_{|k| <= K} |f * Psi_k^{n/2^k}|^2)^{1/2}; family must be Psi-type.
GridFunction1D shifted_square(const GridFunction1D& f, const BumpFamily& family,
                              std::int64_t n, int K, Exec exec = Exec::serial);

enum class HybridKind { MM, SS, MS, SM };

// Bi-parameter combination over the shifted two-parameter family
// (F^{n1/2^{k1}}_{k1} tensor G^{n2/2^{k2}}_{k2}), |k1|,|k2| <= K:
//   MM: sup_{k1,k2} | . |        (both families Phi-type)
//   SS: l2 over (k1,k2)          (both families Psi-type)
//   MS: sup_{k1} l2_{k2}         (fam1 Phi, fam2 Psi)
//   SM: l2_{k1} sup_{k2}         (fam1 Psi, fam2 Phi)
GridFunction2D hybrid(const GridFunction2D& f, HybridKind kind, const BumpFamily& fam1,
                      const BumpFamily& fam2, ShiftPair shifts, int K,
                      Exec exec = Exec::serial);

// The weighted-maximal sum  sum_{k=0}^{[log2 n]} M_{-2^k} f  (n >= 1).
GridFunction1D curly_mn(const GridFunction1D& f, std::int64_t n, Exec exec = Exec::serial);

struct CZDecomposition {
    double alpha = 0.0;
    std::int64_t n = 0;

    std::vector<DyadicInterval> selected;   // maximal intervals, avg F > alpha
    std::vector<AlignedSpan> selected_spans;
    // Companion spans I - (n/2^k)|I| for k = 0..min([log2|n|], block log2),
    // flattened over all selected intervals; exact cell arithmetic.
    std::vector<AlignedSpan> companions;

    std::vector<std::uint8_t> omega_mask;        // per cell
    std::vector<std::uint8_t> omega_tilde_mask;  // 3-dilates of intervals+companions
    double omega_measure = 0.0;
    double omega_tilde_measure = 0.0;

    std::vector<GridFunction1D> f_prime;   // f_k restricted to Omega^c
    std::vector<GridFunction1D> f_second;  // f_k restricted to Omega
    std::vector<GridFunction1D> g;         // averaged pieces
    GridFunction1D big_f;                  // F = (sum |f_k|^2)^{1/2}
    GridFunction1D big_g;                  // G = (sum |g_k|^2)^{1/2}
};

// Stopping-time decomposition at threshold alpha > 0 for the vector f.
// Requires the torus period to be a power of two (dyadic selection).
CZDecomposition cz_decompose(const std::vector<GridFunction1D>& fs, std::int64_t n,
                             double alpha);

// || (sum |M_n f_j|^2)^{1/2} ||_p  /  || (sum |f_j|^2)^{1/2} ||_p.
double fefferman_stein_ratio(const std::vector<GridFunction1D>& fs, std::int64_t n,
                             double p, int max_block_log2 = -1, Exec exec = Exec::serial);

// Empirical lower bound for ||T||_{p->p}: max of ||Tf||_p / ||f||_p over a
// deterministic seeded mix of band-limited noise, spikes, indicator combs and
// pure Fourier modes.  Monotone in `trials` for a fixed seed by construction.
double estimate_opnorm(const std::function<GridFunction1D(const GridFunction1D&)>& op,
                       std::size_t grid_n, double period, double p, int trials,
                       std::uint64_t seed, Exec exec = Exec::serial);

// h * (periodised shifted kernel samples) for F_k^{n/2^k}; the tap array used
// by the space-domain convolutions (exposed for oracle tests).
std::vector<double> shift_kernel_taps(const BumpFamily& family, int k, std::int64_t n,
                                      std::size_t grid_n, double period);

struct MaximalReport {
    std::string input_id;
    std::int64_t n = 0;
    GridFunction1D output;
    std::vector<std::pair<double, double>> norm_estimates;  // (p, ||M_n f||_p / ||f||_p)
    std::vector<DyadicInterval> selected;
};

MaximalReport maximal_report(const GridFunction1D& f, std::int64_t n,
                             const std::vector<double>& ps, const std::string& input_id,
                             Exec exec = Exec::serial);

}  // namespace comlab
