#include "comlab/commutator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "comlab/errors.hpp"
#include "comlab/fft.hpp"
#include "comlab/rng.hpp"
#include "comlab/symbols.hpp"

namespace comlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::int64_t signed_of(std::size_t i, std::size_t n) {
    return (i < n / 2) ? static_cast<std::int64_t>(i)
                       : static_cast<std::int64_t>(i) - static_cast<std::int64_t>(n);
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_k.
std::vector<std::pair<double, double>> legendre_rule(int k) {
    std::vector<std::pair<double, double>> rule(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(k) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 64; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= k; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(k) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule[static_cast<std::size_t>(k - 1 - i)] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
    }
    return rule;
}

void validate_spec(const CommutatorSpec& spec, int want_n) {
    if (spec.n != want_n)
        throw ConfigError("commutator spec parameter count does not match the grid arity");
    if (spec.d < 0) throw ConfigError("commutator degree must be nonnegative");
    if (spec.a.size() != static_cast<std::size_t>(spec.n))
        throw ConfigError("scale vector length must equal the parameter count");
    for (double ai : spec.a)
        if (ai == 0.0) throw ConfigError("scale vector entries must be nonzero");
}

cplx pow_int(cplx z, int d) {
    cplx p(1.0, 0.0);
    for (int j = 0; j < d; ++j) p *= z;
    return p;
}

}  // namespace

// ------------------------------------------------------------- quadrature

PVQuadrature default_pv(const GridFunction1D& f) {
    return {f.spacing() / 16.0, f.period() / 2.0, 8, true};
}

PVQuadrature default_pv(const GridFunction2D& f) {
    return {f.spacing1() / 16.0, f.period1() / 2.0, 8, true};
}

double pv_kernel(double t, double period, int power) {
    if (power < 1) throw ConfigError("pv_kernel: power must be >= 1");
    // sum_j 1/(t + j period)^power via derivatives of the cotangent:
    //   sum_j 1/(t + jL) = (pi/L) cot(pi t/L)   and   (d/du) cot u = -(1 + cot^2 u),
    // so sum_j 1/(t+jL)^m = (pi/L)^m p_{m-1}(cot(pi t/L)) / (m-1)! with the
    // polynomial recurrence p_0(c) = c, p_{k+1}(c) = (1 + c^2) p_k'(c).
    const double c = 1.0 / std::tan(std::numbers::pi * t / period);
    std::vector<double> p = {0.0, 1.0};  // p_0(c) = c
    double factorial = 1.0;
    for (int k = 1; k < power; ++k) {
        std::vector<double> dp(p.size() >= 2 ? p.size() - 1 : 1, 0.0);
        for (std::size_t j = 1; j < p.size(); ++j)
            dp[j - 1] = static_cast<double>(j) * p[j];
        std::vector<double> np(dp.size() + 2, 0.0);
        for (std::size_t j = 0; j < dp.size(); ++j) {
            np[j] += dp[j];
            np[j + 2] += dp[j];
        }
        p = std::move(np);
        factorial *= static_cast<double>(k);
    }
    double val = 0.0;
    for (std::size_t j = p.size(); j-- > 0;) val = val * c + p[j];
    return val * std::pow(std::numbers::pi / period, power) / factorial;
}

std::vector<std::pair<double, double>> pv_positive_nodes(const PVQuadrature& pv) {
    if (!(pv.eps > 0.0) || !(pv.eps < pv.outer))
        throw ConfigError("principal-value cutoffs need 0 < eps < outer");
    if (pv.nodes_per_shell < 1) throw ConfigError("need at least one node per shell");
    if (!pv.symmetric) throw ConfigError("only the symmetric principal-value rule exists");
    const auto base = legendre_rule(pv.nodes_per_shell);
    std::vector<std::pair<double, double>> nodes;
    for (double lo = pv.eps; lo < pv.outer;) {
        const double hi = std::min(2.0 * lo, pv.outer);
        const double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
        for (const auto& [x, w] : base) nodes.emplace_back(mid + half * x, half * w);
        lo = hi;
    }
    return nodes;
}

// ------------------------------------------------- pointwise finite difference

namespace {

cplx eval_trig2(const std::vector<cplx>& hat, std::size_t n1, std::size_t n2, double l1,
                double l2, double x1, double x2) {
    // hat holds spectrum() values; reconstruct (1/(L1 L2)) sum hat e^{2 pi i m.x/L}
    std::vector<cplx> e1(n1), e2(n2);
    for (std::size_t i = 0; i < n1; ++i) {
        const double ang = kTwoPi * static_cast<double>(signed_of(i, n1)) * x1 / l1;
        e1[i] = cplx(std::cos(ang), std::sin(ang));
    }
    for (std::size_t j = 0; j < n2; ++j) {
        const double ang = kTwoPi * static_cast<double>(signed_of(j, n2)) * x2 / l2;
        e2[j] = cplx(std::cos(ang), std::sin(ang));
    }
    cplx acc(0.0);
    for (std::size_t i = 0; i < n1; ++i) {
        cplx row(0.0);
        for (std::size_t j = 0; j < n2; ++j) row += hat[i * n2 + j] * e2[j];
        acc += row * e1[i];
    }
    return acc / (l1 * l2);
}

}  // namespace

cplx finite_diff_avg(const GridFunction2D& A, std::array<double, 2> x,
                     std::array<double, 2> t, const std::vector<double>& a) {
    if (t[0] == 0.0 || t[1] == 0.0)
        throw DegenerateInputError("finite difference step must be nonzero");
    if (a.size() != 2 || a[0] == 0.0 || a[1] == 0.0)
        throw ConfigError("finite_diff_avg needs two nonzero scales");
    const auto hat = A.spectrum();
    const std::size_t n1 = A.size1(), n2 = A.size2();
    const double l1 = A.period1(), l2 = A.period2();
    const double s1 = a[0] * t[0], s2 = a[1] * t[1];
    const cplx v11 = eval_trig2(hat, n1, n2, l1, l2, x[0] + s1, x[1] + s2);
    const cplx v10 = eval_trig2(hat, n1, n2, l1, l2, x[0] + s1, x[1]);
    const cplx v01 = eval_trig2(hat, n1, n2, l1, l2, x[0], x[1] + s2);
    const cplx v00 = eval_trig2(hat, n1, n2, l1, l2, x[0], x[1]);
    return (v11 - v10 - v01 + v00) / (t[0] * t[1]);
}

// ----------------------------------------------------------- time side, 1D

namespace {

// f(. + tau) through the spectrum phase law; always spectral, so every node
// takes the same code path.
GridFunction1D translate_spectral(const GridFunction1D& f, double tau) {
    std::vector<cplx> hat = fft(f.samples());
    const std::size_t n = hat.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double ang = kTwoPi * static_cast<double>(signed_of(i, n)) * tau / f.period();
        hat[i] *= cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> out = ifft(std::move(hat));
    return GridFunction1D::from_samples(std::move(out), f.period());
}

}  // namespace

GridFunction1D commutator_time(const GridFunction1D& f, const GridFunction1D& A,
                               const CommutatorSpec& spec, const PVQuadrature& pv,
                               Exec exec) {
    validate_spec(spec, 1);
    if (f.size() != A.size() || f.period() != A.period())
        throw ConfigError("f and A must share one grid");
    const auto nodes = pv_positive_nodes(pv);
    const std::size_t N = f.size();
    GridFunction1D out(N, f.period());
    const std::int64_t in = static_cast<std::int64_t>(N);
    for (const auto& [t, w] : nodes) {
        for (double s : {1.0, -1.0}) {
            const double tau = s * t;
            // the d finite-difference denominators join the kernel, so the
            // image sum periodizes the full 1/t^{d+1} power
            const double ker = w * pv_kernel(tau, f.period(), spec.d + 1);
            const GridFunction1D ft = translate_spectral(f, tau);
            if (spec.d == 0) {
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
                for (std::int64_t i = 0; i < in; ++i)
                    out[static_cast<std::size_t>(i)] +=
                        ker * ft[static_cast<std::size_t>(i)];
                continue;
            }
            const GridFunction1D At = translate_spectral(A, spec.a[0] * tau);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
            for (std::int64_t i = 0; i < in; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                const cplx fd = At[ui] - A[ui];
                out[ui] += ker * ft[ui] * pow_int(fd, spec.d);
            }
        }
    }
    return out;
}

// ----------------------------------------------------------- time side, 2D

namespace {

// Stage 1 of the shifted inverse transform: U[j1, m2] =
// (1/L1) sum_m1 S[m1, m2] e^{2 pi i m1 (x_{j1} + tau1)/L1}.
std::vector<cplx> stage1(const std::vector<cplx>& S, std::size_t n1, std::size_t n2,
                         double l1, double tau1) {
    std::vector<cplx> out(n1 * n2);
    std::vector<cplx> col(n1);
    std::vector<cplx> phase(n1);
    for (std::size_t m1 = 0; m1 < n1; ++m1) {
        const double ang = kTwoPi * static_cast<double>(signed_of(m1, n1)) * tau1 / l1;
        phase[m1] = cplx(std::cos(ang), std::sin(ang));
    }
    for (std::size_t m2 = 0; m2 < n2; ++m2) {
        for (std::size_t m1 = 0; m1 < n1; ++m1) col[m1] = S[m1 * n2 + m2] * phase[m1];
        fft_inplace(col, +1);  // unscaled inverse along axis 1
        for (std::size_t j1 = 0; j1 < n1; ++j1) out[j1 * n2 + m2] = col[j1] / l1;
    }
    return out;
}

// Stage 2, one row: given U[j1, m2] produce samples over j2 with shift tau2.
void stage2_row(const cplx* urow, std::size_t n2, double l2, double tau2, cplx* out) {
    std::vector<cplx> v(n2);
    for (std::size_t m2 = 0; m2 < n2; ++m2) {
        const double ang = kTwoPi * static_cast<double>(signed_of(m2, n2)) * tau2 / l2;
        v[m2] = urow[m2] * cplx(std::cos(ang), std::sin(ang));
    }
    fft_inplace(v, +1);
    for (std::size_t j2 = 0; j2 < n2; ++j2) out[j2] = v[j2] / l2;
}

std::vector<cplx> finish_grid(const std::vector<cplx>& U, std::size_t n1, std::size_t n2,
                              double l2, double tau2) {
    std::vector<cplx> g(n1 * n2);
    for (std::size_t j1 = 0; j1 < n1; ++j1)
        stage2_row(U.data() + j1 * n2, n2, l2, tau2, g.data() + j1 * n2);
    return g;
}

}  // namespace

GridFunction2D commutator_time(const GridFunction2D& f, const GridFunction2D& A,
                               const CommutatorSpec& spec, const PVQuadrature& pv,
                               Exec exec) {
    validate_spec(spec, 2);
    if (f.size1() != A.size1() || f.size2() != A.size2() || f.period1() != A.period1() ||
        f.period2() != A.period2())
        throw ConfigError("f and A must share one grid");
    const auto nodes = pv_positive_nodes(pv);
    const std::size_t n1 = f.size1(), n2 = f.size2();
    const double l1 = f.period1(), l2 = f.period2();
    const auto hatf = f.spectrum();
    const auto hatA = A.spectrum();

    // signed node list, fixed order: positive nodes ascending, + before -
    std::vector<std::pair<double, double>> signed_nodes;  // (tau, weight)
    for (const auto& [t, w] : nodes) {
        signed_nodes.emplace_back(t, w);
        signed_nodes.emplace_back(-t, w);
    }
    const std::size_t K = signed_nodes.size();

    // per-tau1 intermediates and completed single-shift grids
    std::vector<std::vector<cplx>> Tf(K), TA(K), A1grid(K), A2grid(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double tau1 = signed_nodes[k].first;
        Tf[k] = stage1(hatf, n1, n2, l1, tau1);
        TA[k] = stage1(hatA, n1, n2, l1, spec.a[0] * tau1);
        A1grid[k] = finish_grid(TA[k], n1, n2, l2, 0.0);
    }
    const std::vector<cplx> T0A = stage1(hatA, n1, n2, l1, 0.0);
    for (std::size_t k = 0; k < K; ++k)
        A2grid[k] = finish_grid(T0A, n1, n2, l2, spec.a[1] * signed_nodes[k].first);
    const std::vector<cplx> A00 = finish_grid(T0A, n1, n2, l2, 0.0);

    GridFunction2D out(n1, n2, l1, l2);
    const std::int64_t in1 = static_cast<std::int64_t>(n1);
    for (std::size_t k1 = 0; k1 < K; ++k1) {
        const double tau1 = signed_nodes[k1].first, w1 = signed_nodes[k1].second;
        for (std::size_t k2 = 0; k2 < K; ++k2) {
            const double tau2 = signed_nodes[k2].first, w2 = signed_nodes[k2].second;
            const double wk = w1 * pv_kernel(tau1, l1, spec.d + 1) * w2 *
                              pv_kernel(tau2, l2, spec.d + 1);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
            for (std::int64_t j1 = 0; j1 < in1; ++j1) {
                const auto r = static_cast<std::size_t>(j1) * n2;
                std::vector<cplx> frow(n2), arow(n2);
                stage2_row(Tf[k1].data() + r, n2, l2, tau2, frow.data());
                if (spec.d == 0) {
                    for (std::size_t j2 = 0; j2 < n2; ++j2)
                        out(static_cast<std::size_t>(j1), j2) += wk * frow[j2];
                    continue;
                }
                stage2_row(TA[k1].data() + r, n2, l2, spec.a[1] * tau2, arow.data());
                for (std::size_t j2 = 0; j2 < n2; ++j2) {
                    const cplx fd = arow[j2] - A1grid[k1][r + j2] -
                                    A2grid[k2][r + j2] + A00[r + j2];
                    out(static_cast<std::size_t>(j1), j2) +=
                        wk * frow[j2] * pow_int(fd, spec.d);
                }
            }
        }
    }
    return out;
}

// ------------------------------------------------------------ frequency side

// Spectral support threshold: modes below this fraction of the peak magnitude
// are treated as roundtrip noise, not data.  A band-limited function pushed
// through sample space picks up O(1e-16) relative junk in every mode; summing
// over those would explode the lattice-sum cost for no numerical gain.
constexpr double kSupportRelTol = 1e-13;

GridFunction1D commutator_freq(const GridFunction1D& f, const GridFunction1D& deriv,
                               const CommutatorSpec& spec, double cost_ceiling, Exec exec) {
    validate_spec(spec, 1);
    if (spec.d < 1) throw ConfigError("frequency route needs degree d >= 1");
    if (f.size() != deriv.size() || f.period() != deriv.period())
        throw ConfigError("f and deriv must share one grid");
    const std::size_t N = f.size();
    const auto fhat = f.spectrum();
    const auto ahat = deriv.spectrum();

    double amax = 0.0;
    for (const cplx& z : ahat) amax = std::max(amax, std::abs(z));
    const double floor_mag = kSupportRelTol * amax;
    std::vector<std::pair<std::int64_t, cplx>> active;  // (signed mode, value)
    for (std::size_t i = 0; i < N; ++i)
        if (std::abs(ahat[i]) > floor_mag) active.emplace_back(signed_of(i, N), ahat[i]);

    const double predicted = static_cast<double>(N) *
                             std::pow(static_cast<double>(active.size()), spec.d) *
                             static_cast<double>(2 * spec.d + 4);
    if (predicted > cost_ceiling)
        throw BudgetError(predicted, cost_ceiling,
                          "frequency sum would need ~" + std::to_string(predicted) +
                              " ops, over the ceiling " + std::to_string(cost_ceiling));

    const double pref = std::pow(spec.a[0], spec.d) / std::pow(f.period(), spec.d);
    const int d = spec.d;
    std::vector<cplx> outhat(N, cplx(0.0));
    const std::int64_t in = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t mu = 0; mu < in; ++mu) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
        std::vector<double> parts(static_cast<std::size_t>(d));
        cplx acc(0.0);
        // odometer over d-tuples of active modes, fixed lexicographic order
        for (;;) {
            std::int64_t msum = 0;
            cplx prod(1.0, 0.0);
            for (int j = 0; j < d; ++j) {
                const auto& [mode, val] = active[idx[static_cast<std::size_t>(j)]];
                msum += mode;
                prod *= val;
                parts[static_cast<std::size_t>(j)] =
                    spec.a[0] * static_cast<double>(mode);
            }
            const std::int64_t fi =
                ((mu - msum) % static_cast<std::int64_t>(N) + static_cast<std::int64_t>(N)) %
                static_cast<std::int64_t>(N);
            const double mval = m1d_exact(
                static_cast<double>(signed_of(static_cast<std::size_t>(fi), N)), parts);
            acc += mval * fhat[static_cast<std::size_t>(fi)] * prod;
            int j = d - 1;
            for (; j >= 0; --j) {
                if (++idx[static_cast<std::size_t>(j)] < active.size()) break;
                idx[static_cast<std::size_t>(j)] = 0;
            }
            if (j < 0) break;
        }
        outhat[static_cast<std::size_t>(mu)] = pref * acc;
    }
    return GridFunction1D::from_spectrum(outhat, f.period());
}

GridFunction2D commutator_freq(const GridFunction2D& f, const GridFunction2D& deriv,
                               const CommutatorSpec& spec, double cost_ceiling, Exec exec) {
    validate_spec(spec, 2);
    if (spec.d < 1) throw ConfigError("frequency route needs degree d >= 1");
    if (f.size1() != deriv.size1() || f.size2() != deriv.size2() ||
        f.period1() != deriv.period1() || f.period2() != deriv.period2())
        throw ConfigError("f and deriv must share one grid");
    const std::size_t n1 = f.size1(), n2 = f.size2();
    const auto fhat = f.spectrum();
    const auto ahat = deriv.spectrum();

    struct Mode {
        std::int64_t m1, m2;
        cplx val;
    };
    double amax = 0.0;
    for (const cplx& z : ahat) amax = std::max(amax, std::abs(z));
    const double floor_mag = kSupportRelTol * amax;
    std::vector<Mode> active;
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
            if (std::abs(ahat[i * n2 + j]) > floor_mag)
                active.push_back({signed_of(i, n1), signed_of(j, n2), ahat[i * n2 + j]});

    const double predicted = static_cast<double>(n1 * n2) *
                             std::pow(static_cast<double>(active.size()), spec.d) *
                             static_cast<double>(4 * spec.d + 6);
    if (predicted > cost_ceiling)
        throw BudgetError(predicted, cost_ceiling,
                          "frequency sum would need ~" + std::to_string(predicted) +
                              " ops, over the ceiling " + std::to_string(cost_ceiling));

    const double pref = std::pow(spec.a[0] * spec.a[1], spec.d) /
                        std::pow(f.period1() * f.period2(), spec.d);
    const int d = spec.d;
    std::vector<cplx> outhat(n1 * n2, cplx(0.0));
    const std::int64_t in1 = static_cast<std::int64_t>(n1);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t mu1 = 0; mu1 < in1; ++mu1) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
        std::vector<double> parts1(static_cast<std::size_t>(d)),
            parts2(static_cast<std::size_t>(d));
        for (std::size_t mu2 = 0; mu2 < n2; ++mu2) {
            std::fill(idx.begin(), idx.end(), 0);
            cplx acc(0.0);
            for (;;) {
                std::int64_t s1 = 0, s2 = 0;
                cplx prod(1.0, 0.0);
                for (int j = 0; j < d; ++j) {
                    const Mode& mo = active[idx[static_cast<std::size_t>(j)]];
                    s1 += mo.m1;
                    s2 += mo.m2;
                    prod *= mo.val;
                    parts1[static_cast<std::size_t>(j)] =
                        spec.a[0] * static_cast<double>(mo.m1);
                    parts2[static_cast<std::size_t>(j)] =
                        spec.a[1] * static_cast<double>(mo.m2);
                }
                const std::int64_t fi1 =
                    ((mu1 - s1) % static_cast<std::int64_t>(n1) +
                     static_cast<std::int64_t>(n1)) %
                    static_cast<std::int64_t>(n1);
                const std::int64_t fi2 =
                    ((static_cast<std::int64_t>(mu2) - s2) % static_cast<std::int64_t>(n2) +
                     static_cast<std::int64_t>(n2)) %
                    static_cast<std::int64_t>(n2);
                const double m1 = m1d_exact(
                    static_cast<double>(signed_of(static_cast<std::size_t>(fi1), n1)),
                    parts1);
                const double m2v = m1d_exact(
                    static_cast<double>(signed_of(static_cast<std::size_t>(fi2), n2)),
                    parts2);
                acc += (m1 * m2v) *
                       fhat[static_cast<std::size_t>(fi1) * n2 +
                            static_cast<std::size_t>(fi2)] *
                       prod;
                int j = d - 1;
                for (; j >= 0; --j) {
                    if (++idx[static_cast<std::size_t>(j)] < active.size()) break;
                    idx[static_cast<std::size_t>(j)] = 0;
                }
                if (j < 0) break;
            }
            outhat[static_cast<std::size_t>(mu1) * n2 + mu2] = pref * acc;
        }
    }
    return GridFunction2D::from_spectrum(outhat, n1, n2, f.period1(), f.period2());
}

// ------------------------------------------------------------------ fitting

cplx complex_ratio_fit(const std::vector<cplx>& x, const std::vector<cplx>& y) {
    if (x.size() != y.size()) throw ConfigError("ratio fit needs equal lengths");
    cplx num(0.0);
    double den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += x[i] * std::conj(y[i]);
        den += std::norm(y[i]);
    }
    if (den == 0.0) throw DegenerateInputError("ratio fit against the zero vector");
    return num / den;
}

cplx complex_ratio_fit(const GridFunction1D& x, const GridFunction1D& y) {
    return complex_ratio_fit(x.samples(), y.samples());
}

cplx complex_ratio_fit(const GridFunction2D& x, const GridFunction2D& y) {
    return complex_ratio_fit(x.samples(), y.samples());
}

// ------------------------------------------------------------------- series

std::vector<cplx> cauchy_coefficients(int d_max) {
    if (d_max < 0) throw ConfigError("need d_max >= 0");
    std::vector<cplx> c(static_cast<std::size_t>(d_max) + 1);
    const cplx mi(0.0, -1.0);
    cplx cur(1.0, 0.0);
    for (int d = 0; d <= d_max; ++d) {
        c[static_cast<std::size_t>(d)] = cur;
        cur *= mi;
    }
    return c;
}

GridFunction1D antiderivative(const GridFunction1D& deriv) {
    auto hat = deriv.spectrum();
    const std::size_t N = hat.size();
    const double tol = 1e-10 * deriv.norm_p(std::numeric_limits<double>::infinity());
    if (std::abs(hat[0]) > tol * deriv.period())
        throw DegenerateInputError("antiderivative needs a zero-mean input");
    hat[0] = cplx(0.0);
    for (std::size_t i = 1; i < N; ++i) {
        const double xi = static_cast<double>(signed_of(i, N)) / deriv.period();
        hat[i] /= cplx(0.0, kTwoPi * xi);
    }
    return GridFunction1D::from_spectrum(hat, deriv.period());
}

GridFunction2D antiderivative_mixed(const GridFunction2D& deriv) {
    auto hat = deriv.spectrum();
    const std::size_t n1 = deriv.size1(), n2 = deriv.size2();
    double peak = 0.0;
    for (const auto& z : hat) peak = std::max(peak, std::abs(z));
    const double tol = 1e-10 * peak;
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            cplx& z = hat[i * n2 + j];
            if (i == 0 || j == 0) {
                if (std::abs(z) > tol)
                    throw DegenerateInputError(
                        "mixed antiderivative needs no frequency-axis modes");
                z = cplx(0.0);
                continue;
            }
            const double xi1 = static_cast<double>(signed_of(i, n1)) / deriv.period1();
            const double xi2 = static_cast<double>(signed_of(j, n2)) / deriv.period2();
            z /= cplx(0.0, kTwoPi * xi1) * cplx(0.0, kTwoPi * xi2);
        }
    }
    return GridFunction2D::from_spectrum(hat, n1, n2, deriv.period1(), deriv.period2());
}

SeriesResult analytic_series(const GridFunction1D& f, const GridFunction1D& A,
                             const CommutatorSpec& spec, int d_max,
                             const std::vector<double>& chat, const PVQuadrature& pv,
                             Exec exec) {
    validate_spec(spec, 1);
    if (spec.coeffs.empty()) throw ConfigError("analytic_series needs F coefficients");
    if (d_max < 0 || static_cast<std::size_t>(d_max) >= spec.coeffs.size())
        throw ConfigError("d_max outside the supplied coefficient range");
    if (chat.empty()) throw ConfigError("analytic_series needs measured per-degree norms");

    // ||A'||_inf against the radius implied by the coefficients (root test on
    // the upper half of the supplied sequence)
    auto hat = A.spectrum();
    for (std::size_t i = 0; i < hat.size(); ++i) {
        const double xi = static_cast<double>(signed_of(i, hat.size())) / A.period();
        hat[i] *= cplx(0.0, kTwoPi * xi);
    }
    const GridFunction1D a = GridFunction1D::from_spectrum(hat, A.period());
    const double anorm = a.norm_p(std::numeric_limits<double>::infinity());
    const std::size_t D = spec.coeffs.size() - 1;
    double inv_radius = 0.0;
    for (std::size_t d = std::max<std::size_t>(1, (D + 1) / 2); d <= D; ++d) {
        const double cd = std::abs(spec.coeffs[d]);
        if (cd > 0.0)
            inv_radius = std::max(inv_radius, std::pow(cd, 1.0 / static_cast<double>(d)));
    }
    if (inv_radius > 0.0 && anorm >= 1.0 / inv_radius)
        throw DivergenceRiskError("||A'||_inf = " + std::to_string(anorm) +
                                  " reaches the coefficient radius " +
                                  std::to_string(1.0 / inv_radius));

    SeriesResult res;
    res.sum = GridFunction1D(f.size(), f.period());
    res.terms_used = d_max + 1;
    for (int d = 0; d <= d_max; ++d) {
        const cplx cd = spec.coeffs[static_cast<std::size_t>(d)];
        if (cd == cplx(0.0)) continue;
        CommutatorSpec one = spec;
        one.d = d;
        GridFunction1D term = commutator_time(f, A, one, pv, exec);
        for (std::size_t i = 0; i < term.size(); ++i) res.sum[i] += cd * term[i];
    }

    // reported tail: supplied coefficients first, then geometric extrapolation
    const auto chat_at = [&chat](std::size_t d) {
        return chat[std::min(d, chat.size() - 1)];
    };
    double tail = 0.0;
    for (std::size_t d = static_cast<std::size_t>(d_max) + 1; d <= D; ++d)
        tail += std::abs(spec.coeffs[d]) * chat_at(d) * std::pow(anorm, static_cast<double>(d));
    double rho = 1.0;
    if (D >= 1 && std::abs(spec.coeffs[D - 1]) > 0.0)
        rho = std::abs(spec.coeffs[D]) / std::abs(spec.coeffs[D - 1]);
    const double q = rho * anorm;
    const double head = std::abs(spec.coeffs[D]) * chat.back() *
                        std::pow(anorm, static_cast<double>(D));
    tail += (q < 1.0) ? head * q / (1.0 - q) : std::numeric_limits<double>::infinity();
    res.tail_bound = tail;
    return res;
}

namespace {

GridFunction1D probe_band_limited(std::size_t n, double period, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t band = std::max<std::size_t>(2, n / 8);
    std::vector<cplx> hat(n, cplx(0.0));
    for (std::size_t m = 1; m <= band; ++m) {
        const double amp = std::exp(-0.4 * static_cast<double>(m));
        const cplx z(rng.normal(), rng.normal());
        hat[m] = amp * z;
        hat[n - m] = std::conj(hat[m]);
    }
    return GridFunction1D::from_spectrum(hat, period);
}

}  // namespace

double measure_chat(int d, std::size_t grid_n, double period, int trials,
                    std::uint64_t seed, Exec exec) {
    if (trials < 1) throw ConfigError("measure_chat needs trials >= 1");
    if (d < 0) throw ConfigError("measure_chat needs d >= 0");
    double best = 0.0;
    for (int t = 0; t < trials; ++t) {
        const GridFunction1D f =
            probe_band_limited(grid_n, period, derive_seed(seed, 2 * static_cast<std::uint64_t>(t)));
        GridFunction1D a = probe_band_limited(
            grid_n, period, derive_seed(seed, 2 * static_cast<std::uint64_t>(t) + 1));
        const double sup = a.norm_p(std::numeric_limits<double>::infinity());
        if (sup == 0.0) continue;
        for (auto& z : a.samples()) z /= sup;  // ||A'||_inf = 1
        const GridFunction1D A = antiderivative(a);
        CommutatorSpec spec;
        spec.d = d;
        const GridFunction1D C = commutator_time(f, A, spec, default_pv(f), exec);
        const double dn = f.norm_p(2.0);
        if (dn > 0.0) best = std::max(best, C.norm_p(2.0) / dn);
    }
    return best;
}

// ------------------------------------------------------- nested commutator

GridFunction2D abs_derivative(const GridFunction2D& f, int axis) {
    if (axis != 1 && axis != 2) throw ConfigError("axis must be 1 or 2");
    auto hat = f.spectrum();
    const std::size_t n1 = f.size1(), n2 = f.size2();
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            const double xi =
                (axis == 1) ? static_cast<double>(signed_of(i, n1)) / f.period1()
                            : static_cast<double>(signed_of(j, n2)) / f.period2();
            hat[i * n2 + j] *= std::abs(xi);
        }
    }
    return GridFunction2D::from_spectrum(hat, n1, n2, f.period1(), f.period2());
}

GridFunction2D double_commutator_freq(const GridFunction2D& f, const GridFunction2D& A,
                                      Exec exec) {
    if (f.size1() != A.size1() || f.size2() != A.size2() || f.period1() != A.period1() ||
        f.period2() != A.period2())
        throw ConfigError("f and A must share one grid");
    const std::size_t total = f.samples().size();
    const auto mul = [&](const GridFunction2D& g) {
        GridFunction2D out = g;
        const std::int64_t it = static_cast<std::int64_t>(total);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
        for (std::int64_t i = 0; i < it; ++i)
            out.samples()[static_cast<std::size_t>(i)] =
                A.samples()[static_cast<std::size_t>(i)] *
                g.samples()[static_cast<std::size_t>(i)];
        return out;
    };
    const auto inner = [&](const GridFunction2D& g) {
        // [|D1|, A] g = |D1|(A g) - A |D1| g
        GridFunction2D t1 = abs_derivative(mul(g), 1);
        t1 -= mul(abs_derivative(g, 1));
        return t1;
    };
    GridFunction2D out = abs_derivative(inner(f), 2);
    out -= inner(abs_derivative(f, 2));
    return out;
}

}  // namespace comlab
