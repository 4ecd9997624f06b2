#include "comlab/shifted.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "comlab/errors.hpp"
#include "comlab/fft.hpp"
#include "comlab/rng.hpp"

namespace comlab {

namespace {

bool is_pow2_sz(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

int exact_log2_period(double period) {
    // period must be 2^p for dyadic selection on the torus
    int e = 0;
    const double m = std::frexp(period, &e);
    if (m != 0.5) throw ConfigError("torus period must be a power of two for dyadic machinery");
    return e - 1;
}

std::size_t mod_cell(std::int64_t i, std::size_t n) {
    const std::int64_t nn = static_cast<std::int64_t>(n);
    std::int64_t r = i % nn;
    if (r < 0) r += nn;
    return static_cast<std::size_t>(r);
}

int floor_log2_u(std::uint64_t v) { return std::bit_width(v) - 1; }

}  // namespace

// ------------------------------------------------------------------ sum tree

DyadicSums DyadicSums::build_raw(const std::vector<double>& cells) {
    if (!is_pow2_sz(cells.size())) throw ConfigError("dyadic sums need a power-of-two grid");
    DyadicSums s;
    s.n_ = cells.size();
    const int levels = floor_log2_u(cells.size()) + 1;
    s.level_.resize(static_cast<std::size_t>(levels));
    s.level_[0] = cells;
    for (int m = 1; m < levels; ++m) {
        const auto& prev = s.level_[static_cast<std::size_t>(m - 1)];
        auto& cur = s.level_[static_cast<std::size_t>(m)];
        cur.resize(prev.size() / 2);
        for (std::size_t b = 0; b < cur.size(); ++b) cur[b] = prev[2 * b] + prev[2 * b + 1];
    }
    return s;
}

DyadicSums DyadicSums::build(const GridFunction1D& f) {
    std::vector<double> cells(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) cells[i] = std::abs(f[i]);
    return build_raw(cells);
}

// ------------------------------------------------------------------- maximal

GridFunction1D shifted_maximal(const GridFunction1D& f, std::int64_t n, int min_block_log2,
                               int max_block_log2, Exec exec) {
    const std::size_t N = f.size();
    if (!is_pow2_sz(N)) throw ConfigError("shifted_maximal needs a power-of-two grid");
    const int top = floor_log2_u(N);
    if (max_block_log2 < 0) max_block_log2 = top;
    if (min_block_log2 < 0 || max_block_log2 > top || min_block_log2 > max_block_log2)
        throw ConfigError("shifted_maximal scale range outside grid resolution");

    const DyadicSums sums = DyadicSums::build(f);
    GridFunction1D out(N, f.period());
    const std::int64_t in = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t i = 0; i < in; ++i) {
        double best = 0.0;
        for (int m = min_block_log2; m <= max_block_log2; ++m) {
            const std::size_t blocks = N >> m;
            const std::size_t b = static_cast<std::size_t>(i) >> m;
            const std::size_t bs = mod_cell(static_cast<std::int64_t>(b) + n,
                                            blocks);
            best = std::max(best, sums.block_avg(m, bs));
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

// ---------------------------------------------------------------------- taps

std::vector<double> shift_kernel_taps(const BumpFamily& family, int k, std::int64_t n,
                                      std::size_t grid_n, double period) {
    const double h = period / static_cast<double>(grid_n);
    std::vector<double> taps(grid_n, 0.0);
    const BumpFamily fam{family.profile, family.type, n};
    const bool compact = family.profile->kind() == MotherKind::compact_frequency;
    const double radius = family.profile->support_radius();
    const double width = std::ldexp(radius, -k);  // one-sided space support

    if (!compact && width <= 16.0 * period) {
        // space-domain periodisation: few images
        const double center = std::ldexp(static_cast<double>(n), -k);
        const auto m_lo =
            static_cast<std::int64_t>(std::floor((center - width) / period)) - 1;
        const auto m_hi = static_cast<std::int64_t>(std::ceil((center + width) / period)) + 1;
        for (std::size_t j = 0; j < grid_n; ++j) {
            const double x = h * static_cast<double>(j);
            double acc = 0.0;
            for (std::int64_t m = m_lo; m <= m_hi; ++m)
                acc += fam.kernel_value(k, x + period * static_cast<double>(m));
            taps[j] = h * acc;
        }
        return taps;
    }

    // frequency synthesis: exact periodisation via the kernel transform
    const double cut = compact ? 0.75 : 6.0;  // hat support / negligibility radius
    const double scale = period * std::ldexp(1.0, k);
    const auto modes = static_cast<std::int64_t>(std::floor(cut * scale)) + (compact ? 0 : 1);
    const double center = std::ldexp(static_cast<double>(n), -k);
    for (std::size_t j = 0; j < grid_n; ++j) {
        const double x = h * static_cast<double>(j) - center;
        double acc = family.profile->hat(family.type, 0.0);
        for (std::int64_t q = 1; q <= modes; ++q) {
            const double xi = static_cast<double>(q) / scale;
            const double w = family.profile->hat(family.type, xi);
            if (w == 0.0) continue;
            acc += 2.0 * w * std::cos(2.0 * std::numbers::pi * static_cast<double>(q) * x /
                                      period);
        }
        taps[j] = h / period * acc;
    }
    return taps;
}

namespace {

// out[i] = sum_j taps[j] f(i-j); real taps, complex samples.
GridFunction1D conv_taps(const GridFunction1D& f, const std::vector<double>& taps,
                         Exec exec) {
    const std::size_t N = f.size();
    GridFunction1D out(N, f.period());
    bool any = false;
    for (double t : taps)
        if (t != 0.0) { any = true; break; }
    if (!any) return out;
    const std::int64_t in = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t i = 0; i < in; ++i) {
        cplx acc(0.0);
        for (std::size_t j = 0; j < N; ++j)
            acc += taps[j] * f.at(i - static_cast<std::int64_t>(j));
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

}  // namespace

GridFunction1D scale_sup(const GridFunction1D& f, const BumpFamily& family, std::int64_t n,
                         int K, Exec exec) {
    if (family.type != BumpType::phi)
        throw ConfigError("scale_sup requires a Phi-type family");
    const std::size_t N = f.size();
    GridFunction1D out(N, f.period());
    for (int k = -K; k <= K; ++k) {
        const auto taps = shift_kernel_taps(family, k, n, N, f.period());
        const GridFunction1D c = conv_taps(f, taps, exec);
        for (std::size_t i = 0; i < N; ++i)
            out[i] = std::max(out[i].real(), std::abs(c[i]));
    }
    return out;
}

GridFunction1D shifted_square(const GridFunction1D& f, const BumpFamily& family,
                              std::int64_t n, int K, Exec exec) {
    if (family.type != BumpType::psi)
        throw ConfigError("shifted_square requires a Psi-type family");
    const std::size_t N = f.size();
    std::vector<double> acc(N, 0.0);
    for (int k = -K; k <= K; ++k) {
        const auto taps = shift_kernel_taps(family, k, n, N, f.period());
        const GridFunction1D c = conv_taps(f, taps, exec);
        for (std::size_t i = 0; i < N; ++i) acc[i] += std::norm(c[i]);
    }
    GridFunction1D out(N, f.period());
    for (std::size_t i = 0; i < N; ++i) out[i] = std::sqrt(acc[i]);
    return out;
}

// -------------------------------------------------------------------- hybrid

namespace {

GridFunction2D conv_axis1(const GridFunction2D& f, const std::vector<double>& taps,
                          Exec exec) {
    const std::size_t n1 = f.size1(), n2 = f.size2();
    GridFunction2D out(n1, n2, f.period1(), f.period2());
    const std::int64_t in1 = static_cast<std::int64_t>(n1);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t i = 0; i < in1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            cplx acc(0.0);
            for (std::size_t t = 0; t < n1; ++t) {
                const double w = taps[t];
                if (w == 0.0) continue;
                acc += w * f(mod_cell(i - static_cast<std::int64_t>(t), n1), j);
            }
            out(static_cast<std::size_t>(i), j) = acc;
        }
    }
    return out;
}

GridFunction2D conv_axis2(const GridFunction2D& f, const std::vector<double>& taps,
                          Exec exec) {
    const std::size_t n1 = f.size1(), n2 = f.size2();
    GridFunction2D out(n1, n2, f.period1(), f.period2());
    const std::int64_t in1 = static_cast<std::int64_t>(n1);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t i = 0; i < in1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            cplx acc(0.0);
            for (std::size_t t = 0; t < n2; ++t) {
                const double w = taps[t];
                if (w == 0.0) continue;
                acc += w * f(static_cast<std::size_t>(i),
                             mod_cell(static_cast<std::int64_t>(j) - static_cast<std::int64_t>(t),
                                      n2));
            }
            out(static_cast<std::size_t>(i), j) = acc;
        }
    }
    return out;
}

}  // namespace

GridFunction2D hybrid(const GridFunction2D& f, HybridKind kind, const BumpFamily& fam1,
                      const BumpFamily& fam2, ShiftPair shifts, int K, Exec exec) {
    const bool sup1 = (kind == HybridKind::MM || kind == HybridKind::MS);
    const bool sup2 = (kind == HybridKind::MM || kind == HybridKind::SM);
    if ((sup1 && fam1.type != BumpType::phi) || (!sup1 && fam1.type != BumpType::psi) ||
        (sup2 && fam2.type != BumpType::phi) || (!sup2 && fam2.type != BumpType::psi))
        throw ConfigError("hybrid kind and family types are inconsistent");

    const std::size_t n1 = f.size1(), n2 = f.size2();
    GridFunction2D out(n1, n2, f.period1(), f.period2());

    // accumulators (meaning depends on kind)
    std::vector<double> outer(n1 * n2, 0.0);
    std::vector<double> inner(n1 * n2, 0.0);

    for (int k1 = -K; k1 <= K; ++k1) {
        const auto taps1 = shift_kernel_taps(fam1, k1, shifts.n1, n1, f.period1());
        const GridFunction2D a = conv_axis1(f, taps1, exec);
        std::fill(inner.begin(), inner.end(), 0.0);
        for (int k2 = -K; k2 <= K; ++k2) {
            const auto taps2 = shift_kernel_taps(fam2, k2, shifts.n2, n2, f.period2());
            const GridFunction2D u = conv_axis2(a, taps2, exec);
            for (std::size_t idx = 0; idx < n1 * n2; ++idx) {
                const double v = std::abs(u.samples()[idx]);
                if (sup2)
                    inner[idx] = std::max(inner[idx], v);
                else
                    inner[idx] += v * v;
            }
        }
        for (std::size_t idx = 0; idx < n1 * n2; ++idx) {
            // per-k1 scalar: sup2 -> sup_{k2}| |;   else (l2_{k2})^2
            if (sup1) {
                const double v = sup2 ? inner[idx] : std::sqrt(inner[idx]);
                outer[idx] = std::max(outer[idx], v);
            } else {
                const double v = sup2 ? inner[idx] * inner[idx] : inner[idx];
                outer[idx] += v;
            }
        }
    }
    for (std::size_t idx = 0; idx < n1 * n2; ++idx)
        out.samples()[idx] = sup1 ? outer[idx] : std::sqrt(outer[idx]);
    return out;
}

// ------------------------------------------------------------------ curly Mn

GridFunction1D curly_mn(const GridFunction1D& f, std::int64_t n, Exec exec) {
    if (n < 1) throw ConfigError("curly_mn needs n >= 1");
    GridFunction1D out(f.size(), f.period());
    const int kmax = floor_log2_u(static_cast<std::uint64_t>(n));
    for (int k = 0; k <= kmax; ++k) {
        const GridFunction1D term = shifted_maximal(f, -(std::int64_t{1} << k), 0, -1, exec);
        out += term;
    }
    return out;
}

// ------------------------------------------------------------ CZ decomposition

CZDecomposition cz_decompose(const std::vector<GridFunction1D>& fs, std::int64_t n,
                             double alpha) {
    if (fs.empty()) throw ConfigError("cz_decompose needs at least one function");
    if (!(alpha > 0.0)) throw ConfigError("cz_decompose needs alpha > 0");
    const std::size_t N = fs[0].size();
    const double L = fs[0].period();
    for (const auto& f : fs)
        if (f.size() != N || f.period() != L)
            throw ConfigError("cz_decompose: inputs live on different grids");
    if (!is_pow2_sz(N)) throw ConfigError("cz_decompose needs a power-of-two grid");
    const int p = exact_log2_period(L);
    const int top = floor_log2_u(N);

    CZDecomposition d;
    d.alpha = alpha;
    d.n = n;
    d.big_f = GridFunction1D(N, L);
    for (std::size_t i = 0; i < N; ++i) {
        double s2 = 0.0;
        for (const auto& f : fs) s2 += std::norm(f[i]);
        d.big_f[i] = std::sqrt(s2);
    }
    const DyadicSums sums = DyadicSums::build(d.big_f);

    // top-down maximal selection: avg > alpha, no selected ancestor
    std::vector<std::uint8_t> blocked(1, 0);  // covered flags at the parent level
    std::vector<std::pair<int, std::size_t>> picks;  // (block log2 m, block index)
    for (int m = top; m >= 0; --m) {
        const std::size_t blocks = N >> m;
        std::vector<std::uint8_t> blocked_here(blocks, 0);
        for (std::size_t b = 0; b < blocks; ++b) {
            // at m == top the single root has b == 0, so b >> 1 hits the seed entry
            const std::uint8_t anc = blocked[b >> 1];
            blocked_here[b] = anc;
            if (!anc && sums.block_avg(m, b) > alpha) {
                picks.emplace_back(m, b);
                blocked_here[b] = 1;
            }
        }
        blocked = std::move(blocked_here);
    }

    d.omega_mask.assign(N, 0);
    d.omega_tilde_mask.assign(N, 0);
    auto mark = [&N](std::vector<std::uint8_t>& mask, std::int64_t start, std::size_t len) {
        if (len >= N) { std::fill(mask.begin(), mask.end(), 1); return; }
        for (std::size_t t = 0; t < len; ++t) mask[mod_cell(start + static_cast<std::int64_t>(t), N)] = 1;
    };

    const int log_n = (n == 0) ? -1 : floor_log2_u(static_cast<std::uint64_t>(std::llabs(n)));
    for (auto [m, b] : picks) {
        const std::size_t c = std::size_t{1} << m;
        const std::int64_t start = static_cast<std::int64_t>(b) << m;
        d.selected.push_back(DyadicInterval{top - m - p, static_cast<std::int64_t>(b)});
        d.selected_spans.push_back(
            AlignedSpan{static_cast<std::int64_t>(b) << m, static_cast<std::int64_t>(c)});
        mark(d.omega_mask, start, c);
        mark(d.omega_tilde_mask, start - static_cast<std::int64_t>(c), 3 * c);
        const int kmax = std::min(log_n, m);
        for (int k = 0; k <= kmax; ++k) {
            const std::int64_t off = n * (std::int64_t{1} << (m - k));
            const std::int64_t cs = start - off;
            d.companions.push_back(
                AlignedSpan{static_cast<std::int64_t>(mod_cell(cs, N)),
                            static_cast<std::int64_t>(c)});
            mark(d.omega_tilde_mask, cs - static_cast<std::int64_t>(c), 3 * c);
        }
    }

    const double h = L / static_cast<double>(N);
    std::size_t om = 0, omt = 0;
    for (std::size_t i = 0; i < N; ++i) {
        om += d.omega_mask[i];
        omt += d.omega_tilde_mask[i];
    }
    d.omega_measure = h * static_cast<double>(om);
    d.omega_tilde_measure = h * static_cast<double>(omt);

    // splits and averaged pieces
    d.big_g = GridFunction1D(N, L);
    std::vector<double> g2(N, 0.0);
    for (const auto& f : fs) {
        GridFunction1D fp(N, L), fsnd(N, L), gk(N, L);
        for (std::size_t i = 0; i < N; ++i) {
            if (d.omega_mask[i]) fsnd[i] = f[i];
            else fp[i] = f[i];
        }
        const DyadicSums sk = DyadicSums::build(f);
        for (auto [m, b] : picks) {
            const double v = sk.block_avg(m, b);  // exact division by 2^m
            const std::size_t c = std::size_t{1} << m;
            const std::size_t start = b << m;
            for (std::size_t t = 0; t < c; ++t) gk[start + t] = v;
        }
        for (std::size_t i = 0; i < N; ++i) g2[i] += std::norm(gk[i]);
        d.f_prime.push_back(std::move(fp));
        d.f_second.push_back(std::move(fsnd));
        d.g.push_back(std::move(gk));
    }
    for (std::size_t i = 0; i < N; ++i) d.big_g[i] = std::sqrt(g2[i]);
    return d;
}

// --------------------------------------------------------- Fefferman--Stein

double fefferman_stein_ratio(const std::vector<GridFunction1D>& fs, std::int64_t n,
                             double p, int max_block_log2, Exec exec) {
    if (fs.empty()) throw ConfigError("fefferman_stein_ratio needs input functions");
    if (!(p > 1.0) || std::isinf(p)) throw ConfigError("fefferman_stein_ratio needs 1 < p < inf");
    const std::size_t N = fs[0].size();
    const double L = fs[0].period();
    GridFunction1D num(N, L), den(N, L);
    std::vector<double> acc_num(N, 0.0), acc_den(N, 0.0);
    for (const auto& f : fs) {
        const GridFunction1D m = shifted_maximal(f, n, 0, max_block_log2, exec);
        for (std::size_t i = 0; i < N; ++i) {
            acc_num[i] += std::norm(m[i]);
            acc_den[i] += std::norm(f[i]);
        }
    }
    for (std::size_t i = 0; i < N; ++i) {
        num[i] = std::sqrt(acc_num[i]);
        den[i] = std::sqrt(acc_den[i]);
    }
    const double dn = den.norm_p(p);
    if (dn == 0.0) throw DegenerateInputError("fefferman_stein_ratio: zero input vector");
    return num.norm_p(p) / dn;
}

// ------------------------------------------------------------- opnorm probe

namespace {

GridFunction1D trial_input(std::size_t n, double period, std::uint64_t seed) {
    Rng rng(seed);
    GridFunction1D f(n, period);
    switch (rng.below(5)) {
        case 0: {  // band-limited noise
            const std::size_t band = std::max<std::size_t>(2, n / 8);
            std::vector<cplx> hat(n, cplx(0.0));
            for (std::size_t m = 1; m <= band; ++m) {
                const cplx z(rng.normal(), rng.normal());
                hat[m] = z;
                hat[n - m] = std::conj(z);
            }
            hat[0] = cplx(rng.normal(), 0.0);
            f = GridFunction1D::from_spectrum(hat, period);
            break;
        }
        case 1: {  // spikes
            const std::uint64_t count = 1 + rng.below(4);
            for (std::uint64_t s = 0; s < count; ++s)
                f[static_cast<std::size_t>(rng.below(n))] += rng.uniform(-2.0, 2.0);
            if (f.norm_p(2.0) == 0.0) f[0] = 1.0;
            break;
        }
        case 2: {  // indicator comb
            const int lg = std::max(1, static_cast<int>(std::bit_width(static_cast<std::uint64_t>(n))) - 3);
            const std::size_t step = std::size_t{1} << (1 + rng.below(static_cast<std::uint64_t>(lg)));
            const std::size_t off = static_cast<std::size_t>(rng.below(step));
            for (std::size_t i = off; i < n; i += step) f[i] = 1.0;
            break;
        }
        case 3: {  // pure Fourier mode
            const auto m = static_cast<double>(rng.below(n / 2));
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            for (std::size_t i = 0; i < n; ++i)
                f[i] = std::cos(2.0 * std::numbers::pi * m * static_cast<double>(i) /
                                    static_cast<double>(n) +
                                phase);
            break;
        }
        default: {  // aligned dyadic block indicator (maximal-growth witness)
            const int top = std::bit_width(n) - 1;
            const int m = static_cast<int>(rng.below(static_cast<std::uint64_t>(top)));
            const auto b = static_cast<std::size_t>(rng.below(n >> m));
            for (std::size_t t = 0; t < (std::size_t{1} << m); ++t) f[(b << m) + t] = 1.0;
            break;
        }
    }
    return f;
}

}  // namespace

double estimate_opnorm(const std::function<GridFunction1D(const GridFunction1D&)>& op,
                       std::size_t grid_n, double period, double p, int trials,
                       std::uint64_t seed, Exec exec) {
    if (trials < 1) throw ConfigError("estimate_opnorm needs trials >= 1");
    std::vector<double> ratios(static_cast<std::size_t>(trials), 0.0);
    const std::int64_t t_count = trials;
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t t = 0; t < t_count; ++t) {
        const GridFunction1D f =
            trial_input(grid_n, period, derive_seed(seed, static_cast<std::uint64_t>(t)));
        const double dn = f.norm_p(p);
        if (dn == 0.0) continue;
        const GridFunction1D g = op(f);
        ratios[static_cast<std::size_t>(t)] = g.norm_p(p) / dn;
    }
    double best = 0.0;
    for (double r : ratios) best = std::max(best, r);
    return best;
}

MaximalReport maximal_report(const GridFunction1D& f, std::int64_t n,
                             const std::vector<double>& ps, const std::string& input_id,
                             Exec exec) {
    MaximalReport r;
    r.input_id = input_id;
    r.n = n;
    r.output = shifted_maximal(f, n, 0, -1, exec);
    for (double p : ps) {
        const double dn = f.norm_p(p);
        r.norm_estimates.emplace_back(p, dn == 0.0 ? 0.0 : r.output.norm_p(p) / dn);
    }
    return r;
}

}  // namespace comlab
