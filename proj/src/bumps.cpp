#include "comlab/bumps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "comlab/errors.hpp"

namespace comlab {

namespace {

constexpr double kPi = std::numbers::pi;

// Quintic smoothstep: 0 for t<=0, 1 for t>=1, C^2 in between.
double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

// Simpson integration of f on [a,b] with n panels (n even).
template <typename F>
double simpson(F&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

double torus_dist(double x, double c, double period) {
    double d = std::fmod(std::abs(x - c), period);
    if (d > period / 2.0) d = period - d;
    return d;
}

}  // namespace

// ----------------------------------------------------------------- profile

BumpProfile::BumpProfile(MotherKind kind) : kind_(kind) {
    if (kind_ == MotherKind::compact_frequency) {
        // CDF of the mollifier rho(y) = exp(-1/(1-(4y)^2)) on |y| < 1/4.
        const int n = 8192;
        cdf_.resize(n + 1);
        cdf_step_ = 0.5 / n;
        auto rho = [](double y) {
            const double u = 4.0 * y;
            const double d = 1.0 - u * u;
            return d > 0.0 ? std::exp(-1.0 / d) : 0.0;
        };
        cdf_[0] = 0.0;
        for (int i = 1; i <= n; ++i) {
            const double y0 = -0.25 + cdf_step_ * (i - 1);
            const double y1 = -0.25 + cdf_step_ * i;
            cdf_[i] = cdf_[i - 1] + 0.5 * (rho(y0) + rho(y1)) * cdf_step_;
        }
        const double total = cdf_[n];
        for (auto& v : cdf_) v /= total;
    }
}

double BumpProfile::rho_cdf(double y) const {
    if (y <= -0.25) return 0.0;
    if (y >= 0.25) return 1.0;
    const double t = (y + 0.25) / cdf_step_;
    const auto i = static_cast<std::size_t>(t);
    const double frac = t - static_cast<double>(i);
    if (i + 1 >= cdf_.size()) return cdf_.back();
    return cdf_[i] * (1.0 - frac) + cdf_[i + 1] * frac;
}

double BumpProfile::phi_hat(double xi) const {
    if (kind_ == MotherKind::gaussian) return std::exp(-kPi * xi * xi);
    const double hi = std::min(xi + 0.5, 0.25);
    const double lo = std::max(xi - 0.5, -0.25);
    if (hi <= lo) return 0.0;
    return rho_cdf(hi) - rho_cdf(lo);
}

double BumpProfile::compact_space_value(double x, int deriv_order) const {
    // Phi(x) = Int Phi^(xi) (2 pi i xi)^r e^{2 pi i x xi} dxi over [-3/4, 3/4];
    // real part survives by symmetry.
    const int n = 3072;
    const double a = -0.75, b = 0.75;
    const double step = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double xi = a + step * i;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double ang = 2.0 * kPi * x * xi;
        const double base = phi_hat(xi);
        // (2 pi i xi)^r e^{i ang}: real part.
        const double mag = std::pow(2.0 * kPi * std::abs(xi), deriv_order);
        const double phase = ang + deriv_order * (kPi / 2.0) * (xi < 0.0 ? -1.0 : 1.0);
        acc += w * base * mag * std::cos(phase);
    }
    return acc * step / 3.0;
}

double BumpProfile::phi(double x) const {
    if (kind_ == MotherKind::gaussian) return std::exp(-kPi * x * x);
    if (std::abs(x) > 96.0) return 0.0;
    return compact_space_value(x, 0);
}

double BumpProfile::psi(double x) const { return phi(x) - 0.5 * phi(0.5 * x); }

double BumpProfile::phi_deriv(double x, int order) const {
    if (order < 0 || order > 6) throw ConfigError("derivative order out of range");
    if (order == 0) return phi(x);
    if (kind_ == MotherKind::gaussian) {
        // d^n/dx^n e^{-pi x^2} = P_n(x) e^{-pi x^2}, P_{n+1} = P_n' - 2 pi x P_n.
        std::vector<double> p{1.0};
        for (int n = 0; n < order; ++n) {
            std::vector<double> q(p.size() + 1, 0.0);
            for (std::size_t i = 1; i < p.size(); ++i) q[i - 1] += p[i] * static_cast<double>(i);
            for (std::size_t i = 0; i < p.size(); ++i) q[i + 1] -= 2.0 * kPi * p[i];
            p = std::move(q);
        }
        double poly = 0.0;
        for (std::size_t i = p.size(); i-- > 0;) poly = poly * x + p[i];
        return poly * std::exp(-kPi * x * x);
    }
    if (std::abs(x) > 96.0) return 0.0;
    return compact_space_value(x, order);
}

double BumpProfile::psi_deriv(double x, int order) const {
    return phi_deriv(x, order) - std::ldexp(phi_deriv(0.5 * x, order), -order - 1);
}

double BumpProfile::support_radius() const {
    return kind_ == MotherKind::gaussian ? 20.0 : 128.0;
}

double BumpProfile::lq_norm(BumpType t, double q) const {
    if (!(q > 0.0) || std::isinf(q)) throw ConfigError("q must be finite positive");
    const double key = (t == BumpType::phi ? 1000.0 : 2000.0) + q;
    for (std::size_t i = 0; i < norm_cache_key_.size(); ++i)
        if (norm_cache_key_[i] == key) return norm_cache_val_[i];
    const double R = support_radius();
    const int panels = kind_ == MotherKind::gaussian ? 4096 : 8192;
    const double integral =
        simpson([&](double x) { return std::pow(std::abs(value(t, x)), q); }, -R, R, panels);
    const double result = std::pow(integral, 1.0 / q);
    norm_cache_key_.push_back(key);
    norm_cache_val_.push_back(result);
    return result;
}

// ----------------------------------------------------------------- families

double BumpFamily::kernel_value(int k, double x) const {
    const double scale = std::ldexp(1.0, k);
    return scale * profile->value(type, scale * x - static_cast<double>(shift));
}

double BumpFamily::kernel_hat(int k, double xi) const {
    return profile->hat(type, std::ldexp(xi, -k));
}

namespace {
std::shared_ptr<const BumpProfile> shared_profile(MotherKind kind) {
    static const auto gaussian = std::make_shared<const BumpProfile>(MotherKind::gaussian);
    static const auto compact = std::make_shared<const BumpProfile>(MotherKind::compact_frequency);
    return kind == MotherKind::gaussian ? gaussian : compact;
}
}  // namespace

BumpFamily make_family(MotherKind kind, BumpType type, std::int64_t shift) {
    return {shared_profile(kind), type, shift};
}

MotherPair make_mother_pair(MotherKind kind) { return {shared_profile(kind)}; }

double lp_partition_residual(const BumpProfile& profile, int K,
                             const std::vector<double>& frequencies) {
    double worst = 0.0;
    for (const double xi : frequencies) {
        double s = 0.0;
        for (int k = -K; k <= K; ++k) s += profile.psi_hat(std::ldexp(xi, -k));
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

GridFunction1D adapted_bump(const DyadicInterval& I, const BumpFamily& family, double q,
                            const GridFunction1D& like) {
    const double len = I.length();
    const double L = like.period();
    const double c = I.center() + static_cast<double>(family.shift) * len;
    const double amp = std::pow(len, -1.0 / q) / family.profile->lq_norm(family.type, q);
    const double R = family.profile->support_radius() * (family.type == BumpType::psi ? 2.0 : 1.0);
    const auto images = static_cast<int>(std::ceil(R * len / L)) + 1;
    GridFunction1D out(like.size(), L);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = out.x(i);
        double v = 0.0;
        for (int r = -images; r <= images; ++r) {
            const double u = (x + L * r - c) / len;
            if (std::abs(u) <= R) v += family.profile->value(family.type, u);
        }
        out[i] = cplx(amp * v, 0.0);
    }
    return out;
}

double adapted_decay_constant(const DyadicInterval& I, const BumpFamily& family, double q, int M,
                              int max_order, const GridFunction1D& like) {
    const double len = I.length();
    const double L = like.period();
    const DyadicInterval In = shift_interval(I, family.shift);
    const double c = In.center();
    const double nq = family.profile->lq_norm(family.type, q);
    double worst = 0.0;
    for (std::size_t i = 0; i < like.size(); ++i) {
        const double x = like.x(i);
        // Periodic distance from x to the interval I_n, in units of |I|.
        const double dc = torus_dist(x, c, L);
        const double dist = std::max(0.0, dc - 0.5 * len) / len;
        const double u = (x - c) / len;  // principal image is enough: others are tiny
        for (int a = 0; a <= max_order; ++a) {
            const double deriv =
                family.profile->deriv(family.type, u, a) / nq * std::pow(len, -1.0 / q - a);
            const double weight = std::pow(len, static_cast<double>(a) + 1.0 / q) *
                                  std::pow(1.0 + dist, static_cast<double>(M));
            worst = std::max(worst, std::abs(deriv) * weight);
        }
    }
    return worst;
}

AlignedSpan dilate_span(const GridFunction1D& like, const DyadicInterval& J, int k) {
    if (k < 0) throw ConfigError("dilate exponent must be non-negative");
    if (k == 0) return aligned_span(like, J);
    const double h = like.spacing();
    const double w = std::ldexp(J.length(), k - 1);  // half width of 2^k J
    const double left = J.center() - w;
    const double cells_d = 2.0 * w / h;
    const double start_d = left / h;
    if (cells_d < 1.0 - 1e-9) throw ResolutionError("dilate finer than one grid cell");
    const double cells_r = std::round(cells_d);
    const double start_r = std::round(start_d);
    if (std::abs(cells_d - cells_r) > 1e-9 * std::max(1.0, cells_d) ||
        std::abs(start_d - start_r) > 1e-9 * std::max(1.0, std::abs(start_d))) {
        throw ResolutionError("dilate endpoints fall between samples; need |J| >= 2h");
    }
    return {static_cast<std::int64_t>(start_r), static_cast<std::int64_t>(cells_r)};
}

GridFunction1D TailSplit::reconstruction() const {
    GridFunction1D acc(pieces.front().size(), pieces.front().period());
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        const double weight = std::pow(2.0, -kappa * static_cast<double>(k));
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weight * pieces[k][i];
    }
    return acc;
}

TailSplit bump_tail_split(const GridFunction1D& phi, const DyadicInterval& J, double kappa,
                          int K) {
    if (K < 0) throw ConfigError("tail split needs K >= 0");
    const std::size_t n = phi.size();
    const double L = phi.period();
    const double h = phi.spacing();
    const double c = J.center();
    const double w0 = 0.5 * J.length();

    // Mean-one corrector supported strictly inside J (vanishes at dist = w0).
    std::vector<double> rho(n, 0.0);
    double rho_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = torus_dist(phi.x(i), c, L);
        if (d < w0) {
            const double cs = std::cos(0.5 * kPi * d / w0);
            rho[i] = cs * cs;
            rho_sum += rho[i];
        }
    }
    if (rho_sum == 0.0) throw DegenerateInputError("interval too small for tail corrector");
    for (auto& v : rho) v /= rho_sum * h;  // h * sum rho = 1

    // Cutoffs eta_k: 1 for dist <= w_k/2, 0 for dist >= (7/8) w_k; the
    // transition width is w_k * 3/8, i.e. of order 2^{k-2}|J|.
    auto eta = [&](int k, double dist) {
        const double wk = std::ldexp(w0, k);
        const double a = 0.5 * wk;
        const double b = 0.875 * wk;
        return smoothstep((b - dist) / (b - a));
    };

    TailSplit split;
    split.kappa = kappa;
    std::vector<double> s(static_cast<std::size_t>(K) + 1, 0.0);
    std::vector<std::vector<double>> etav(static_cast<std::size_t>(K) + 1,
                                          std::vector<double>(n));
    for (int k = 0; k <= K; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            etav[static_cast<std::size_t>(k)][i] = eta(k, torus_dist(phi.x(i), c, L));
            acc += (phi[i] * etav[static_cast<std::size_t>(k)][i]).real();
        }
        s[static_cast<std::size_t>(k)] = acc * h;
    }

    // Mean-zero inputs get an exact per-piece mean compensation (the corrector
    // rho lives inside J, so supports are unaffected).
    double phi_mean = 0.0, phi_l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        phi_mean += phi[i].real();
        phi_l1 += std::abs(phi[i].real());
    }
    const bool mean_zero = std::abs(phi_mean) <= 1e-12 * std::max(1.0, phi_l1);

    for (int k = 0; k <= K; ++k) {
        GridFunction1D piece(n, L);
        const double sk = s[static_cast<std::size_t>(k)];
        const double skm1 = k == 0 ? 0.0 : s[static_cast<std::size_t>(k - 1)];
        const double amp = std::pow(2.0, kappa * static_cast<double>(k));
        for (std::size_t i = 0; i < n; ++i) {
            const double cut = etav[static_cast<std::size_t>(k)][i] -
                               (k == 0 ? 0.0 : etav[static_cast<std::size_t>(k - 1)][i]);
            double v = (phi[i] * cut).real() + (skm1 - sk) * rho[i];
            if (k == K) v += sk * rho[i];
            piece[i] = cplx(amp * v, 0.0);
        }
        if (mean_zero) {
            // Pieces proportional to rho contract only by one rounding factor
            // per pass, so iterate.
            for (int pass = 0; pass < 3; ++pass) {
                double mu = 0.0;
                for (std::size_t i = 0; i < n; ++i) mu += piece[i].real();
                mu *= h;
                if (mu == 0.0) break;
                for (std::size_t i = 0; i < n; ++i)
                    if (rho[i] != 0.0) piece[i] -= cplx(mu * rho[i], 0.0);
            }
        }
        split.pieces.push_back(std::move(piece));
    }
    return split;
}

}  // namespace comlab
