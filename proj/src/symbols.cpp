#include "comlab/symbols.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>

#include "comlab/errors.hpp"
#include "comlab/rng.hpp"

namespace comlab {

namespace {

// S_d: d-th antiderivative of sgn vanishing at 0, S_d(u) = u^{d-1}|u| / d!.
double sgn_antideriv(int d, double u) {
    switch (d) {
        case 0: return sign_of(u);
        case 1: return std::abs(u);
        case 2: return u * std::abs(u) / 2.0;
        case 3: return u * u * std::abs(u) / 6.0;
        default: throw UnsupportedExactError("sgn antiderivative implemented for d <= 3");
    }
}

void check_one_parameter(const SymbolQuery& q) {
    if (q.d < 1) throw ConfigError("symbol query needs d >= 1");
    if (q.xi_parts.size() != static_cast<std::size_t>(q.d))
        throw ConfigError("symbol query: xi_parts must have length d");
    if (q.method == SymbolMethod::monte_carlo && q.samples < 1)
        throw ConfigError("symbol query: monte_carlo needs samples >= 1");
}

}  // namespace

double m1d_exact(double xi, const std::vector<double>& parts) {
    if (parts.size() > 3)
        throw UnsupportedExactError("exact-piecewise symbol evaluation supports d <= 3");
    std::vector<double> nz;
    nz.reserve(parts.size());
    for (double p : parts)
        if (p != 0.0) nz.push_back(p);
    const int dp = static_cast<int>(nz.size());
    if (dp == 0) return sign_of(xi);

    double acc = 0.0;
    const unsigned nsub = 1u << dp;
    for (unsigned mask = 0; mask < nsub; ++mask) {
        double u = xi;
        for (int i = 0; i < dp; ++i)
            if (mask & (1u << i)) u += nz[static_cast<std::size_t>(i)];
        const int missing = dp - std::popcount(mask);
        const double sign = (missing % 2 == 0) ? 1.0 : -1.0;
        acc += sign * sgn_antideriv(dp, u);
    }
    double denom = 1.0;
    for (double p : nz) denom *= p;
    // The true value is an average of sgn samples, so |m| <= 1 exactly; the
    // subset expansion can overshoot by roundoff, which the clamp removes
    // (and clamping preserves odd symmetry).
    return std::clamp(acc / denom, -1.0, 1.0);
}

McEstimate m1d_mc(double xi, const std::vector<double>& parts, std::int64_t samples,
                  std::uint64_t seed, Exec exec) {
    if (samples < 1) throw ConfigError("monte_carlo needs samples >= 1");
    const int d = static_cast<int>(parts.size());

    constexpr std::int64_t kChunk = 1 << 14;  // fixed: reduction order never changes
    const std::int64_t n_chunks = (samples + kChunk - 1) / kChunk;
    std::vector<double> part_sum(static_cast<std::size_t>(n_chunks), 0.0);
    std::vector<double> part_sumsq(static_cast<std::size_t>(n_chunks), 0.0);

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        const std::int64_t lo = c * kChunk;
        const std::int64_t hi = std::min(samples, lo + kChunk);
        double s = 0.0, s2 = 0.0;
        for (std::int64_t t = lo; t < hi; ++t) {
            double u = xi;
            for (int i = 0; i < d; ++i)
                u += rng.uniform() * parts[static_cast<std::size_t>(i)];
            const double v = sign_of(u);
            s += v;
            s2 += v * v;
        }
        part_sum[static_cast<std::size_t>(c)] = s;
        part_sumsq[static_cast<std::size_t>(c)] = s2;
    }

    double total = 0.0, total_sq = 0.0;
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        total += part_sum[static_cast<std::size_t>(c)];
        total_sq += part_sumsq[static_cast<std::size_t>(c)];
    }
    McEstimate est;
    est.samples = samples;
    est.mean = total / static_cast<double>(samples);
    if (samples > 1) {
        const double n = static_cast<double>(samples);
        const double var = std::max(0.0, (total_sq - n * est.mean * est.mean) / (n - 1.0));
        est.stderr_ = std::sqrt(var / n);
    }
    return est;
}

double m1d(const SymbolQuery& q, Exec exec) {
    check_one_parameter(q);
    if (q.method == SymbolMethod::exact_piecewise) {
        if (q.d > 3)
            throw UnsupportedExactError("exact-piecewise symbol evaluation supports d <= 3");
        return m1d_exact(q.xi, q.xi_parts);
    }
    return m1d_mc(q.xi, q.xi_parts, q.samples, q.seed, exec).mean;
}

double m2d(const SymbolQuery& q, Exec exec) {
    check_one_parameter(q);
    if (q.eta_parts.size() != static_cast<std::size_t>(q.d))
        throw ConfigError("symbol query: eta_parts must have length d");

    SymbolQuery qx = q;
    qx.eta = 0.0;
    qx.eta_parts.clear();
    SymbolQuery qe = qx;
    qe.xi = q.eta;
    qe.xi_parts = q.eta_parts;
    if (q.method == SymbolMethod::monte_carlo) {
        // independent substreams for the two factors
        qx.seed = derive_seed(q.seed, 0xA1u);
        qe.seed = derive_seed(q.seed, 0xA2u);
    }
    return m1d(qx, exec) * m1d(qe, exec);
}

cplx CoeffTable::at(int n, int n1) const {
    if (std::abs(n) > lattice_bound || std::abs(n1) > lattice_bound)
        throw ConfigError("coefficient index outside lattice bound");
    const std::size_t w = static_cast<std::size_t>(2 * lattice_bound + 1);
    const std::size_t i = static_cast<std::size_t>(n + lattice_bound);
    const std::size_t j = static_cast<std::size_t>(n1 + lattice_bound);
    return coeff[i * w + j];
}

CoeffTable symbol_fourier_coeffs(int r1, const BumpFamily& window_phi,
                                 const BumpFamily& window_psi, int lattice_bound,
                                 int grid_n, Exec exec) {
    if (window_phi.profile->kind() != MotherKind::compact_frequency ||
        window_psi.profile->kind() != MotherKind::compact_frequency)
        throw ConfigError("symbol windows must be compact-frequency families");
    if (lattice_bound < 0) throw ConfigError("lattice bound must be nonnegative");
    (void)log2_exact(static_cast<std::size_t>(grid_n));  // power of two required
    if (2 * lattice_bound >= grid_n)
        throw ResolutionError("lattice bound exceeds the DFT grid Nyquist index");

    const int n = grid_n;
    const double box_half = std::ldexp(1.0, r1 + 1);
    const double period = 2.0 * box_half;
    const double h = period / static_cast<double>(n);

    // Separable window samples along each axis; u_i = -B + i h.
    std::vector<double> wphi(static_cast<std::size_t>(n)), wpsi(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = -box_half + h * static_cast<double>(i);
        wphi[static_cast<std::size_t>(i)] =
            window_phi.kernel_hat(r1 - kSymbolWindowSeparation, u);
        wpsi[static_cast<std::size_t>(i)] = window_psi.kernel_hat(r1, u);
    }

    GridFunction2D w(static_cast<std::size_t>(n), static_cast<std::size_t>(n), period, period);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int i = 0; i < n; ++i) {
        const double u = -box_half + h * static_cast<double>(i);
        const double wu = wphi[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
            if (wu == 0.0) {
                w(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 0.0;
                continue;
            }
            const double v = -box_half + h * static_cast<double>(j);
            const double m = (v == 0.0) ? sign_of(u) : (std::abs(u + v) - std::abs(u)) / v;
            w(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                m * wu * wpsi[static_cast<std::size_t>(j)];
        }
    }

    const std::vector<cplx> spec = w.spectrum();  // h^2-weighted, FFT index order

    CoeffTable table;
    table.r1 = r1;
    table.lattice_bound = lattice_bound;
    table.grid_n = n;
    table.box_half = box_half;
    const int b = lattice_bound;
    const std::size_t width = static_cast<std::size_t>(2 * b + 1);
    table.coeff.assign(width * width, cplx(0.0));
    const double inv_l2 = 1.0 / (period * period);
    for (int m = -b; m <= b; ++m) {
        const std::size_t im = static_cast<std::size_t>((m % n + n) % n);
        for (int m1 = -b; m1 <= b; ++m1) {
            const std::size_t jm = static_cast<std::size_t>((m1 % n + n) % n);
            // Samples start at -B, not 0: re-centre with the alternating phase.
            const double parity = ((m + m1) % 2 == 0) ? 1.0 : -1.0;
            const cplx c = spec[im * static_cast<std::size_t>(n) + jm] * (parity * inv_l2);
            table.coeff[static_cast<std::size_t>(m + b) * width +
                        static_cast<std::size_t>(m1 + b)] = c;
            const double weight = shift_weight(m) * shift_weight(m) * shift_weight(m1) *
                                  shift_weight(m1) * shift_weight(m1);
            table.decay_constant = std::max(table.decay_constant, std::abs(c) * weight);
        }
    }
    return table;
}

}  // namespace comlab
