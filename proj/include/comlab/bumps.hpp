#pragma once

// Mother bump profiles and Littlewood-Paley families.
//
// The mother pair is (Phi, Psi) with Psi(x) = Phi(x) - Phi(x/2)/2, so that the
// dilates Psi_k = 2^k Psi(2^k .) telescope:  sum_{k<=k0} Psi_k = Phi_{k0}  and
// sum_k Psi^(xi/2^k) = 1 for xi != 0.  Two profile kinds are provided:
//   * gaussian:          Phi(x) = e^{-pi x^2}; everything in closed form;
//   * compact_frequency: Phi^ smooth, supported in [-3/4, 3/4] with Phi^(0)=1
//     exactly (mollified indicator), space samples by quadrature.

#include <cstdint>
#include <memory>
#include <vector>

#include "comlab/dyadic.hpp"

namespace comlab {

enum class MotherKind { gaussian, compact_frequency };
enum class BumpType { phi, psi };  // phi: unit mass; psi: mean zero

class BumpProfile {
  public:
    explicit BumpProfile(MotherKind kind);

    MotherKind kind() const { return kind_; }

    double phi(double x) const;
    double psi(double x) const;
    double phi_hat(double xi) const;
    double psi_hat(double xi) const { return phi_hat(xi) - phi_hat(2.0 * xi); }

    double value(BumpType t, double x) const { return t == BumpType::phi ? phi(x) : psi(x); }
    double hat(BumpType t, double xi) const {
        return t == BumpType::phi ? phi_hat(xi) : psi_hat(xi);
    }

    // d^order/dx^order of the mother Phi (order <= 6).
    double phi_deriv(double x, int order) const;
    double psi_deriv(double x, int order) const;
    double deriv(BumpType t, double x, int order) const {
        return t == BumpType::phi ? phi_deriv(x, order) : psi_deriv(x, order);
    }

    // L^q norm of the mother profile (reference quadrature, cached).
    double lq_norm(BumpType t, double q) const;

    // Effective support radius: |value| and low derivatives below 1e-14 outside.
    double support_radius() const;

  private:
    MotherKind kind_;
    // compact_frequency bookkeeping: CDF table of the mollifier.
    std::vector<double> cdf_;       // on [-1/4, 1/4]
    double cdf_step_ = 0.0;
    double rho_cdf(double y) const; // normalised CDF of the mollifier
    double compact_space_value(double x, int deriv_order) const;
    mutable std::vector<double> norm_cache_key_;
    mutable std::vector<double> norm_cache_val_;
};

// A dilated/shifted family built on a shared mother profile.  The member of
// the family at scale k (kernel L^1-normalised) is
//     F_k^{n/2^k}(x) = 2^k F(2^k (x - n 2^{-k}))
// i.e. the unit-mass dilate shifted n scale units to the right.
struct BumpFamily {
    std::shared_ptr<const BumpProfile> profile;
    BumpType type = BumpType::psi;
    std::int64_t shift = 0;  // n in the shift law a(k) = n / 2^k

    double kernel_value(int k, double x) const;      // F_k^{n/2^k}(x), one period
    double kernel_hat(int k, double xi) const;       // its Fourier transform
};

BumpFamily make_family(MotherKind kind, BumpType type, std::int64_t shift = 0);

struct MotherPair {
    std::shared_ptr<const BumpProfile> profile;
    BumpFamily phi_family() const { return {profile, BumpType::phi, 0}; }
    BumpFamily psi_family() const { return {profile, BumpType::psi, 0}; }
};

MotherPair make_mother_pair(MotherKind kind);

// sup_xi |sum_{|k| <= K} Psi^(xi / 2^k) - 1| over the given frequencies.
double lp_partition_residual(const BumpProfile& profile, int K,
                             const std::vector<double>& frequencies);

// L^q-normalised bump adapted to I (shifted by the family's n):
//     |I|^{-1/q} (F / ||F||_q)((x - c(I_n)) / |I|)
// sampled on the grid described by `like` (periodised over the torus).
GridFunction1D adapted_bump(const DyadicInterval& I, const BumpFamily& family, double q,
                            const GridFunction1D& like);

// Measured decay constant sup_x |d^a F_I(x)| |I|^{a+1/q} (1 + dist(x,I)/|I|)^M
// over derivative orders a <= max_order; scale-invariant for true bumps.
double adapted_decay_constant(const DyadicInterval& I, const BumpFamily& family, double q, int M,
                              int max_order, const GridFunction1D& like);

// Decomposition of a bump-like grid function phi adapted to J into
//     phi = sum_{k=0..K} 2^{-kappa k} phi_k,   supp phi_k inside 2^k J,
// with each phi_k mean-zero whenever phi is (exactly, in grid arithmetic).
struct TailSplit {
    std::vector<GridFunction1D> pieces;  // phi_k, k = 0..K
    double kappa;
    GridFunction1D reconstruction() const;  // sum 2^{-kappa k} phi_k
};

TailSplit bump_tail_split(const GridFunction1D& phi, const DyadicInterval& J, double kappa,
                          int K);

// Cells of the concentric dilate 2^k J on the grid of `like` (k >= 0); used by
// the tail split and by the stopping-time machinery.  Throws ResolutionError
// if endpoints fall between samples.
AlignedSpan dilate_span(const GridFunction1D& like, const DyadicInterval& J, int k);

}  // namespace comlab
