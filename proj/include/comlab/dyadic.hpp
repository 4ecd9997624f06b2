#pragma once

// Dyadic geometry and periodic grid functions.
//
// Conventions used throughout the library:
//   * an interval at scale k has length 2^-k and is [j 2^-k, (j+1) 2^-k);
//   * grid functions are sampled on the torus [0, L) at x_i = i L / N with N a
//     power of two; all index arithmetic is periodic;
//   * the Fourier transform convention is  f^(xi) = Int f(x) e^{-2 pi i x xi} dx,
//     discretised as  f^(m/L) = h * DFT(f)  on modes m in [-N/2, N/2).

#include <complex>
#include <cstdint>
#include <vector>

#include "comlab/fft.hpp"
#include "comlab/parallel.hpp"

namespace comlab {

struct DyadicInterval {
    int scale = 0;         // |I| = 2^-scale
    std::int64_t pos = 0;  // left endpoint = pos * 2^-scale

    double length() const;
    double left() const;
    double right() const;
    double center() const;
    DyadicInterval parent() const;
    DyadicInterval child(int which) const;  // 0 = left, 1 = right

    bool operator==(const DyadicInterval&) const = default;
};

// I_n = I + n |I|.
DyadicInterval shift_interval(const DyadicInterval& I, std::int64_t n);

// True if inner is contained in outer (as subsets of the line).
bool dyadic_contains(const DyadicInterval& outer, const DyadicInterval& inner);
// Exactly one of: a contains b, b contains a (strictly or equal), or disjoint.
enum class Nesting { a_contains_b, b_contains_a, equal, disjoint };
Nesting dyadic_nesting(const DyadicInterval& a, const DyadicInterval& b);

struct DyadicRectangle {
    DyadicInterval x;  // first coordinate
    DyadicInterval y;  // second coordinate
    double area() const { return x.length() * y.length(); }
    bool operator==(const DyadicRectangle&) const = default;
};

struct ShiftPair {
    std::int64_t n1 = 0;
    std::int64_t n2 = 0;
    bool operator==(const ShiftPair&) const = default;
};

// <m> = 2 + |m|, the shift weight appearing in all shifted-operator bounds.
double shift_weight(std::int64_t m);

// ------------------------------------------------------------------ 1D grid

class GridFunction1D {
  public:
    GridFunction1D() = default;
    GridFunction1D(std::size_t n, double period);  // zero-initialised
    static GridFunction1D from_samples(std::vector<cplx> samples, double period);

    std::size_t size() const { return v_.size(); }
    double period() const { return period_; }
    double spacing() const { return period_ / static_cast<double>(v_.size()); }
    double x(std::size_t i) const { return spacing() * static_cast<double>(i); }

    cplx& operator[](std::size_t i) { return v_[i]; }
    const cplx& operator[](std::size_t i) const { return v_[i]; }
    // Periodic access for signed indices.
    cplx at(std::int64_t i) const;

    std::vector<cplx>& samples() { return v_; }
    const std::vector<cplx>& samples() const { return v_; }

    // Continuous-normalisation spectrum: entry m (FFT order) approximates
    // f^(m/L); inverse of spectrum() up to rounding.
    std::vector<cplx> spectrum() const;
    static GridFunction1D from_spectrum(const std::vector<cplx>& hat, double period);

    // Signed frequency of FFT bin i: m in [-N/2, N/2).
    std::int64_t signed_mode(std::size_t i) const;

    double norm_p(double p) const;  // (h sum |f|^p)^{1/p}; p = inf -> sup norm
    double norm_sup() const;
    cplx mean() const;

    GridFunction1D& operator+=(const GridFunction1D& g);
    GridFunction1D& operator-=(const GridFunction1D& g);
    GridFunction1D& operator*=(cplx c);

  private:
    std::vector<cplx> v_;
    double period_ = 1.0;
};

// Number of grid cells spanned by I; throws AlignmentError if I does not align
// with the sample lattice, ResolutionError if it is finer than one cell.
struct AlignedSpan {
    std::int64_t start_cell;  // may be any integer; reduce mod N
    std::int64_t cells;
};
AlignedSpan aligned_span(const GridFunction1D& f, const DyadicInterval& I);

cplx average_signed(const GridFunction1D& f, const DyadicInterval& I);
double average_abs(const GridFunction1D& f, const DyadicInterval& I);

// translate(f, a)(x) = f(x + a); exact sample rotation when a is a multiple of
// the grid spacing, spectral phase law otherwise.
GridFunction1D translate(const GridFunction1D& f, double a);

// ------------------------------------------------------------------ 2D grid

class GridFunction2D {
  public:
    GridFunction2D() = default;
    GridFunction2D(std::size_t n1, std::size_t n2, double period1, double period2);
    static GridFunction2D tensor_product(const GridFunction1D& fx, const GridFunction1D& fy);

    std::size_t size1() const { return n1_; }
    std::size_t size2() const { return n2_; }
    double period1() const { return l1_; }
    double period2() const { return l2_; }
    double spacing1() const { return l1_ / static_cast<double>(n1_); }
    double spacing2() const { return l2_ / static_cast<double>(n2_); }
    double x1(std::size_t i) const { return spacing1() * static_cast<double>(i); }
    double x2(std::size_t j) const { return spacing2() * static_cast<double>(j); }

    cplx& operator()(std::size_t i, std::size_t j) { return v_[i * n2_ + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return v_[i * n2_ + j]; }
    cplx at(std::int64_t i, std::int64_t j) const;

    std::vector<cplx>& samples() { return v_; }
    const std::vector<cplx>& samples() const { return v_; }

    std::vector<cplx> spectrum() const;  // row-major, both axes in FFT order
    static GridFunction2D from_spectrum(const std::vector<cplx>& hat, std::size_t n1,
                                        std::size_t n2, double l1, double l2);

    double norm_p(double p) const;
    double norm_sup() const;
    cplx mean() const;

    GridFunction2D& operator+=(const GridFunction2D& g);
    GridFunction2D& operator-=(const GridFunction2D& g);
    GridFunction2D& operator*=(cplx c);

  private:
    std::size_t n1_ = 0, n2_ = 0;
    double l1_ = 1.0, l2_ = 1.0;
    std::vector<cplx> v_;
};

cplx average_signed(const GridFunction2D& f, const DyadicRectangle& R);
double average_abs(const GridFunction2D& f, const DyadicRectangle& R);
GridFunction2D translate(const GridFunction2D& f, double a1, double a2);

// If f factorises as g(x1) h(x2), returns the relative Frobenius residual of
// the best rank-one approximation (0 for exact tensor products).
double tensor_residual(const GridFunction2D& f);

// In-place 2D FFT helpers on row-major data (n1 rows, n2 columns).
void fft2_inplace(std::vector<cplx>& a, std::size_t n1, std::size_t n2, int sign);

}  // namespace comlab
