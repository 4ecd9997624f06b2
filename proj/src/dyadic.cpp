#include "comlab/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "comlab/errors.hpp"

namespace comlab {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t mod_pos(std::int64_t a, std::int64_t n) {
    std::int64_t r = a % n;
    return r < 0 ? r + n : r;
}

}  // namespace

double DyadicInterval::length() const { return std::ldexp(1.0, -scale); }
double DyadicInterval::left() const { return std::ldexp(static_cast<double>(pos), -scale); }
double DyadicInterval::right() const { return std::ldexp(static_cast<double>(pos + 1), -scale); }
double DyadicInterval::center() const {
    return std::ldexp(static_cast<double>(2 * pos + 1), -scale - 1);
}
DyadicInterval DyadicInterval::parent() const { return {scale - 1, floor_div(pos, 2)}; }
DyadicInterval DyadicInterval::child(int which) const { return {scale + 1, 2 * pos + which}; }

DyadicInterval shift_interval(const DyadicInterval& I, std::int64_t n) {
    return {I.scale, I.pos + n};
}

bool dyadic_contains(const DyadicInterval& outer, const DyadicInterval& inner) {
    if (inner.scale < outer.scale) return false;
    return floor_div(inner.pos, std::int64_t{1} << (inner.scale - outer.scale)) == outer.pos;
}

Nesting dyadic_nesting(const DyadicInterval& a, const DyadicInterval& b) {
    if (a == b) return Nesting::equal;
    if (dyadic_contains(a, b)) return Nesting::a_contains_b;
    if (dyadic_contains(b, a)) return Nesting::b_contains_a;
    return Nesting::disjoint;
}

double shift_weight(std::int64_t m) { return 2.0 + static_cast<double>(m < 0 ? -m : m); }

// ------------------------------------------------------------------ 1D grid

GridFunction1D::GridFunction1D(std::size_t n, double period) : v_(n), period_(period) {
    log2_exact(n);
    if (!(period > 0.0)) throw ConfigError("period must be positive");
}

GridFunction1D GridFunction1D::from_samples(std::vector<cplx> samples, double period) {
    GridFunction1D f(samples.size(), period);
    f.v_ = std::move(samples);
    return f;
}

cplx GridFunction1D::at(std::int64_t i) const {
    return v_[static_cast<std::size_t>(mod_pos(i, static_cast<std::int64_t>(v_.size())))];
}

std::vector<cplx> GridFunction1D::spectrum() const {
    std::vector<cplx> hat = fft(v_);
    const double h = spacing();
    for (auto& z : hat) z *= h;
    return hat;
}

GridFunction1D GridFunction1D::from_spectrum(const std::vector<cplx>& hat, double period) {
    std::vector<cplx> a = ifft(hat);
    GridFunction1D f(a.size(), period);
    const double inv_h = static_cast<double>(a.size()) / period;
    for (auto& z : a) z *= inv_h;
    f.v_ = std::move(a);
    return f;
}

std::int64_t GridFunction1D::signed_mode(std::size_t i) const {
    const std::int64_t n = static_cast<std::int64_t>(v_.size());
    const std::int64_t m = static_cast<std::int64_t>(i);
    return m < n / 2 ? m : m - n;
}

double GridFunction1D::norm_p(double p) const {
    if (std::isinf(p)) return norm_sup();
    if (!(p > 0.0)) throw ConfigError("norm exponent must be positive");
    double s = 0.0;
    for (const auto& z : v_) s += std::pow(std::abs(z), p);
    return std::pow(s * spacing(), 1.0 / p);
}

double GridFunction1D::norm_sup() const {
    double s = 0.0;
    for (const auto& z : v_) s = std::max(s, std::abs(z));
    return s;
}

cplx GridFunction1D::mean() const {
    cplx s{0.0, 0.0};
    for (const auto& z : v_) s += z;
    return s / static_cast<double>(v_.size());
}

GridFunction1D& GridFunction1D::operator+=(const GridFunction1D& g) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += g.v_[i];
    return *this;
}
GridFunction1D& GridFunction1D::operator-=(const GridFunction1D& g) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= g.v_[i];
    return *this;
}
GridFunction1D& GridFunction1D::operator*=(cplx c) {
    for (auto& z : v_) z *= c;
    return *this;
}

AlignedSpan aligned_span(const GridFunction1D& f, const DyadicInterval& I) {
    const double h = f.spacing();
    const double len = I.length();
    const double cells_d = len / h;
    const double start_d = I.left() / h;
    if (cells_d < 1.0 - 1e-9) throw ResolutionError("interval finer than one grid cell");
    const double cells_r = std::round(cells_d);
    const double start_r = std::round(start_d);
    if (std::abs(cells_d - cells_r) > 1e-9 * std::max(1.0, cells_d) ||
        std::abs(start_d - start_r) > 1e-9 * std::max(1.0, std::abs(start_d))) {
        throw AlignmentError("interval does not align with the sample lattice");
    }
    return {static_cast<std::int64_t>(start_r), static_cast<std::int64_t>(cells_r)};
}

cplx average_signed(const GridFunction1D& f, const DyadicInterval& I) {
    const AlignedSpan s = aligned_span(f, I);
    cplx acc{0.0, 0.0};
    for (std::int64_t c = 0; c < s.cells; ++c) acc += f.at(s.start_cell + c);
    return acc / static_cast<double>(s.cells);
}

double average_abs(const GridFunction1D& f, const DyadicInterval& I) {
    const AlignedSpan s = aligned_span(f, I);
    double acc = 0.0;
    for (std::int64_t c = 0; c < s.cells; ++c) acc += std::abs(f.at(s.start_cell + c));
    return acc / static_cast<double>(s.cells);
}

GridFunction1D translate(const GridFunction1D& f, double a) {
    const std::size_t n = f.size();
    const double h = f.spacing();
    const double steps_d = a / h;
    const double steps_r = std::round(steps_d);
    if (std::abs(steps_d - steps_r) < 1e-9) {
        // Exact rotation: out[i] = f[i + steps].
        const auto steps = static_cast<std::int64_t>(steps_r);
        std::vector<cplx> out(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = f.at(static_cast<std::int64_t>(i) + steps);
        return GridFunction1D::from_samples(std::move(out), f.period());
    }
    std::vector<cplx> hat = fft(f.samples());
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = static_cast<double>(f.signed_mode(i)) / f.period();
        const double ang = 2.0 * std::numbers::pi * a * xi;
        hat[i] *= cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> out = ifft(std::move(hat));
    return GridFunction1D::from_samples(std::move(out), f.period());
}

// ------------------------------------------------------------------ 2D grid

GridFunction2D::GridFunction2D(std::size_t n1, std::size_t n2, double period1, double period2)
    : n1_(n1), n2_(n2), l1_(period1), l2_(period2), v_(n1 * n2) {
    log2_exact(n1);
    log2_exact(n2);
    if (!(period1 > 0.0) || !(period2 > 0.0)) throw ConfigError("periods must be positive");
}

GridFunction2D GridFunction2D::tensor_product(const GridFunction1D& fx, const GridFunction1D& fy) {
    GridFunction2D g(fx.size(), fy.size(), fx.period(), fy.period());
    for (std::size_t i = 0; i < fx.size(); ++i)
        for (std::size_t j = 0; j < fy.size(); ++j) g(i, j) = fx[i] * fy[j];
    return g;
}

cplx GridFunction2D::at(std::int64_t i, std::int64_t j) const {
    const std::int64_t n1 = static_cast<std::int64_t>(n1_);
    const std::int64_t n2 = static_cast<std::int64_t>(n2_);
    return v_[static_cast<std::size_t>(mod_pos(i, n1)) * n2_ +
              static_cast<std::size_t>(mod_pos(j, n2))];
}

void fft2_inplace(std::vector<cplx>& a, std::size_t n1, std::size_t n2, int sign) {
    std::vector<cplx> row(n2), col(n1);
    for (std::size_t i = 0; i < n1; ++i) {
        std::copy(a.begin() + static_cast<std::ptrdiff_t>(i * n2),
                  a.begin() + static_cast<std::ptrdiff_t>((i + 1) * n2), row.begin());
        fft_inplace(row, sign);
        std::copy(row.begin(), row.end(), a.begin() + static_cast<std::ptrdiff_t>(i * n2));
    }
    for (std::size_t j = 0; j < n2; ++j) {
        for (std::size_t i = 0; i < n1; ++i) col[i] = a[i * n2 + j];
        fft_inplace(col, sign);
        for (std::size_t i = 0; i < n1; ++i) a[i * n2 + j] = col[i];
    }
}

std::vector<cplx> GridFunction2D::spectrum() const {
    std::vector<cplx> hat = v_;
    fft2_inplace(hat, n1_, n2_, -1);
    const double w = spacing1() * spacing2();
    for (auto& z : hat) z *= w;
    return hat;
}

GridFunction2D GridFunction2D::from_spectrum(const std::vector<cplx>& hat, std::size_t n1,
                                             std::size_t n2, double l1, double l2) {
    GridFunction2D f(n1, n2, l1, l2);
    std::vector<cplx> a = hat;
    fft2_inplace(a, n1, n2, +1);
    const double scale = 1.0 / (l1 / static_cast<double>(n1)) / (l2 / static_cast<double>(n2)) /
                         static_cast<double>(n1 * n2);
    for (auto& z : a) z *= scale;
    f.v_ = std::move(a);
    return f;
}

double GridFunction2D::norm_p(double p) const {
    if (std::isinf(p)) return norm_sup();
    if (!(p > 0.0)) throw ConfigError("norm exponent must be positive");
    double s = 0.0;
    for (const auto& z : v_) s += std::pow(std::abs(z), p);
    return std::pow(s * spacing1() * spacing2(), 1.0 / p);
}

double GridFunction2D::norm_sup() const {
    double s = 0.0;
    for (const auto& z : v_) s = std::max(s, std::abs(z));
    return s;
}

cplx GridFunction2D::mean() const {
    cplx s{0.0, 0.0};
    for (const auto& z : v_) s += z;
    return s / static_cast<double>(v_.size());
}

GridFunction2D& GridFunction2D::operator+=(const GridFunction2D& g) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += g.v_[i];
    return *this;
}
GridFunction2D& GridFunction2D::operator-=(const GridFunction2D& g) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= g.v_[i];
    return *this;
}
GridFunction2D& GridFunction2D::operator*=(cplx c) {
    for (auto& z : v_) z *= c;
    return *this;
}

namespace {

struct AlignedSpan2 {
    AlignedSpan sx, sy;
};

AlignedSpan2 aligned_span2(const GridFunction2D& f, const DyadicRectangle& R) {
    GridFunction1D probe_x(f.size1(), f.period1());
    GridFunction1D probe_y(f.size2(), f.period2());
    return {aligned_span(probe_x, R.x), aligned_span(probe_y, R.y)};
}

}  // namespace

cplx average_signed(const GridFunction2D& f, const DyadicRectangle& R) {
    const AlignedSpan2 s = aligned_span2(f, R);
    cplx acc{0.0, 0.0};
    for (std::int64_t a = 0; a < s.sx.cells; ++a)
        for (std::int64_t b = 0; b < s.sy.cells; ++b)
            acc += f.at(s.sx.start_cell + a, s.sy.start_cell + b);
    return acc / static_cast<double>(s.sx.cells * s.sy.cells);
}

double average_abs(const GridFunction2D& f, const DyadicRectangle& R) {
    const AlignedSpan2 s = aligned_span2(f, R);
    double acc = 0.0;
    for (std::int64_t a = 0; a < s.sx.cells; ++a)
        for (std::int64_t b = 0; b < s.sy.cells; ++b)
            acc += std::abs(f.at(s.sx.start_cell + a, s.sy.start_cell + b));
    return acc / static_cast<double>(s.sx.cells * s.sy.cells);
}

GridFunction2D translate(const GridFunction2D& f, double a1, double a2) {
    const double h1 = f.spacing1();
    const double h2 = f.spacing2();
    const double s1 = a1 / h1, s2 = a2 / h2;
    if (std::abs(s1 - std::round(s1)) < 1e-9 && std::abs(s2 - std::round(s2)) < 1e-9) {
        const auto st1 = static_cast<std::int64_t>(std::round(s1));
        const auto st2 = static_cast<std::int64_t>(std::round(s2));
        GridFunction2D out(f.size1(), f.size2(), f.period1(), f.period2());
        for (std::size_t i = 0; i < f.size1(); ++i)
            for (std::size_t j = 0; j < f.size2(); ++j)
                out(i, j) = f.at(static_cast<std::int64_t>(i) + st1,
                                 static_cast<std::int64_t>(j) + st2);
        return out;
    }
    std::vector<cplx> hat = f.samples();
    fft2_inplace(hat, f.size1(), f.size2(), -1);
    const auto n1 = static_cast<std::int64_t>(f.size1());
    const auto n2 = static_cast<std::int64_t>(f.size2());
    for (std::int64_t i = 0; i < n1; ++i) {
        const std::int64_t m1 = i < n1 / 2 ? i : i - n1;
        for (std::int64_t j = 0; j < n2; ++j) {
            const std::int64_t m2 = j < n2 / 2 ? j : j - n2;
            const double ang = 2.0 * std::numbers::pi *
                               (a1 * static_cast<double>(m1) / f.period1() +
                                a2 * static_cast<double>(m2) / f.period2());
            hat[static_cast<std::size_t>(i * n2 + j)] *= cplx(std::cos(ang), std::sin(ang));
        }
    }
    fft2_inplace(hat, f.size1(), f.size2(), +1);
    GridFunction2D out(f.size1(), f.size2(), f.period1(), f.period2());
    const double inv = 1.0 / static_cast<double>(f.size1() * f.size2());
    for (std::size_t idx = 0; idx < hat.size(); ++idx) out.samples()[idx] = hat[idx] * inv;
    return out;
}

double tensor_residual(const GridFunction2D& f) {
    // One round of power iteration on f f* gives the dominant singular pair;
    // iterate a few times for safety.  Matrix is n1 x n2, row-major.
    const std::size_t n1 = f.size1(), n2 = f.size2();
    std::vector<cplx> v(n2, cplx(1.0, 0.0)), u(n1);
    double sigma = 0.0;
    for (int it = 0; it < 40; ++it) {
        for (std::size_t i = 0; i < n1; ++i) {
            cplx s{0.0, 0.0};
            for (std::size_t j = 0; j < n2; ++j) s += f(i, j) * v[j];
            u[i] = s;
        }
        double nu = 0.0;
        for (const auto& z : u) nu += std::norm(z);
        nu = std::sqrt(nu);
        if (nu == 0.0) return 0.0;
        for (auto& z : u) z /= nu;
        for (std::size_t j = 0; j < n2; ++j) {
            cplx s{0.0, 0.0};
            for (std::size_t i = 0; i < n1; ++i) s += std::conj(f(i, j)) * u[i];
            v[j] = std::conj(s);
        }
        double nv = 0.0;
        for (const auto& z : v) nv += std::norm(z);
        nv = std::sqrt(nv);
        if (nv == 0.0) return 0.0;
        sigma = nv;
        for (auto& z : v) z /= nv;
    }
    double total = 0.0;
    for (const auto& z : f.samples()) total += std::norm(z);
    if (total == 0.0) return 0.0;
    double resid2 = 0.0;
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) resid2 += std::norm(f(i, j) - sigma * u[i] * v[j]);
    return std::sqrt(std::max(0.0, resid2) / total);
}

}  // namespace comlab
