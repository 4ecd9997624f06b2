#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "comlab/bumps.hpp"
#include "comlab/dyadic.hpp"
#include "comlab/errors.hpp"
#include "comlab/fft.hpp"
#include "comlab/rng.hpp"
#include "comlab/shifted.hpp"
#include "test_util.hpp"

using namespace comlab;

namespace {

// Independent O(N^2 log N) reference for the shifted maximal function: plain
// left-to-right sums, no pairwise tree.
GridFunction1D naive_shifted_maximal(const GridFunction1D& f, std::int64_t n) {
    const std::size_t N = f.size();
    const int top = static_cast<int>(std::bit_width(N)) - 1;
    GridFunction1D out(N, f.period());
    for (std::size_t i = 0; i < N; ++i) {
        double best = 0.0;
        for (int m = 0; m <= top; ++m) {
            const std::size_t blocks = N >> m;
            const std::int64_t b =
                ((static_cast<std::int64_t>(i >> m) + n) % static_cast<std::int64_t>(blocks) +
                 static_cast<std::int64_t>(blocks)) %
                static_cast<std::int64_t>(blocks);
            double s = 0.0;
            for (std::size_t t = 0; t < (std::size_t{1} << m); ++t)
                s += std::abs(f[(static_cast<std::size_t>(b) << m) + t]);
            best = std::max(best, s / static_cast<double>(std::size_t{1} << m));
        }
        out[i] = best;
    }
    return out;
}

GridFunction1D translate_cells(const GridFunction1D& f, std::int64_t s) {
    GridFunction1D out(f.size(), f.period());
    for (std::size_t i = 0; i < f.size(); ++i)
        out[i] = f.at(static_cast<std::int64_t>(i) - s);
    return out;
}

GridFunction1D abs_of(const GridFunction1D& f) {
    GridFunction1D out(f.size(), f.period());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = std::abs(f[i]);
    return out;
}

}  // namespace

TEST_CASE("shifted maximal matches a naive reference") {
    const auto f = testutil::random_band_limited(64, 2.0, 12, 911);
    for (std::int64_t n : {std::int64_t{0}, std::int64_t{3}, std::int64_t{-5}}) {
        const GridFunction1D a = shifted_maximal(f, n);
        const GridFunction1D b = naive_shifted_maximal(f, n);
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(std::abs(a[i].real() - b[i].real()) <= 1e-12);
    }
}

TEST_CASE("shifted maximal of an indicator is exact where a block lines up") {
    // f = 1 on [0,1) of the period-4 torus at h = 1/4.
    GridFunction1D f(16, 4.0);
    for (std::size_t i = 0; i < 4; ++i) f[i] = 1.0;
    const GridFunction1D m0 = shifted_maximal(f, 0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(m0[i].real() == 1.0);
    // shift by one block: cells 12..15 see [0,1) through J + |J| at block size 4
    const GridFunction1D m1 = shifted_maximal(f, 1);
    for (std::size_t i = 12; i < 16; ++i) CHECK(m1[i].real() == 1.0);
    for (std::size_t i = 0; i < 16; ++i) CHECK(m1[i].real() >= 0.0);
}

TEST_CASE("shifted maximal is monotone under pointwise domination, bitwise") {
    const auto f = testutil::random_band_limited(128, 1.0, 20, 77);
    GridFunction1D g = abs_of(f);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 0.25;  // |g| >= |f|
    const GridFunction1D mf = shifted_maximal(f, 7);
    const GridFunction1D mg = shifted_maximal(g, 7);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(mf[i].real() <= mg[i].real());
}

TEST_CASE("shifted maximal: serial and parallel agree bitwise; scale range validated") {
    const auto f = testutil::random_band_limited(128, 1.0, 20, 5);
    const GridFunction1D a = shifted_maximal(f, 9, 0, -1, Exec::serial);
    const GridFunction1D b = shifted_maximal(f, 9, 0, -1, Exec::parallel);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(a[i] == b[i]);
    CHECK_THROWS_AS(shifted_maximal(f, 1, 0, 8), ConfigError);   // top is 7
    CHECK_THROWS_AS(shifted_maximal(f, 1, 5, 3), ConfigError);
}

TEST_CASE("translation covariance on grid-aligned shifts") {
    const auto f = testutil::random_band_limited(64, 1.0, 10, 4242);
    const std::int64_t s = 32;  // multiple of every block size below the torus scale
    const int top_minus_1 = 5;
    const GridFunction1D lhs = shifted_maximal(translate_cells(f, s), 3, 0, top_minus_1);
    const GridFunction1D rhs = translate_cells(shifted_maximal(f, 3, 0, top_minus_1), s);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(lhs[i] == rhs[i]);
}

TEST_CASE("kernel taps: frequency synthesis matches the kernel transform") {
    // The DFT of the tap array recovers hat(q / (L 2^k)) e^{-2 pi i q c / L}.
    const BumpFamily fam = make_family(MotherKind::compact_frequency, BumpType::psi, 3);
    const std::size_t N = 64;
    const double L = 2.0;
    const int k = 2;
    const auto taps = shift_kernel_taps(fam, k, fam.shift, N, L);
    std::vector<cplx> v(taps.begin(), taps.end());
    fft_inplace(v, -1);
    const double center = std::ldexp(static_cast<double>(fam.shift), -k);
    for (std::int64_t q = -static_cast<std::int64_t>(N) / 2; q < static_cast<std::int64_t>(N) / 2;
         ++q) {
        const double xi = static_cast<double>(q) / (L * std::ldexp(1.0, k));
        const double phase = -2.0 * std::numbers::pi * static_cast<double>(q) * center / L;
        const cplx expect =
            fam.profile->hat(fam.type, xi) * cplx(std::cos(phase), std::sin(phase));
        const cplx got = v[static_cast<std::size_t>((q + static_cast<std::int64_t>(N)) %
                                                    static_cast<std::int64_t>(N))];
        CHECK(std::abs(got - expect) <= 1e-12);
    }
}

TEST_CASE("kernel taps: space and frequency periodisations agree (gaussian)") {
    const BumpFamily fam = make_family(MotherKind::gaussian, BumpType::phi, 1);
    const std::size_t N = 64;
    const double L = 1.0;
    const int k = 3;  // width 20/8 = 2.5 <= 16 L, so the library takes the space path
    const auto taps = shift_kernel_taps(fam, k, fam.shift, N, L);
    const double h = L / static_cast<double>(N);
    const double scale = L * std::ldexp(1.0, k);
    const auto modes = static_cast<std::int64_t>(std::ceil(8.0 * scale));
    const double center = std::ldexp(static_cast<double>(fam.shift), -k);
    for (std::size_t j = 0; j < N; ++j) {
        const double x = h * static_cast<double>(j) - center;
        double acc = fam.profile->hat(fam.type, 0.0);
        for (std::int64_t q = 1; q <= modes; ++q) {
            const double xi = static_cast<double>(q) / scale;
            acc += 2.0 * fam.profile->hat(fam.type, xi) *
                   std::cos(2.0 * std::numbers::pi * static_cast<double>(q) * x / L);
        }
        CHECK(std::abs(taps[j] - h / L * acc) <= 1e-12);
    }
}

TEST_CASE("scale_sup of a constant is the constant; square function kills it") {
    for (MotherKind kind : {MotherKind::compact_frequency, MotherKind::gaussian}) {
        GridFunction1D f(256, 1.0);
        for (auto& z : f.samples()) z = 0.7;
        const auto pair = make_mother_pair(kind);
        const GridFunction1D m = scale_sup(f, pair.phi_family(), 0, 4);
        const GridFunction1D s = shifted_square(f, pair.psi_family(), 0, 4);
        for (std::size_t i = 0; i < f.size(); ++i) {
            CHECK(m[i].real() == doctest::Approx(0.7).epsilon(1e-9));
            CHECK(s[i].real() <= 1e-9);
        }
    }
}

TEST_CASE("scale_sup / shifted_square validate the family type") {
    const auto pair = make_mother_pair(MotherKind::gaussian);
    GridFunction1D f(32, 1.0);
    CHECK_THROWS_AS(scale_sup(f, pair.psi_family(), 0, 2), ConfigError);
    CHECK_THROWS_AS(shifted_square(f, pair.phi_family(), 0, 2), ConfigError);
}

TEST_CASE("convolution-based operators are exactly translation covariant") {
    const auto pair = make_mother_pair(MotherKind::compact_frequency);
    const auto f = testutil::random_band_limited(128, 1.0, 20, 31);
    const std::int64_t s = 37;  // arbitrary cell shift
    {
        const GridFunction1D lhs = scale_sup(translate_cells(f, s), pair.phi_family(), 2, 3);
        const GridFunction1D rhs = translate_cells(scale_sup(f, pair.phi_family(), 2, 3), s);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(lhs[i] == rhs[i]);
    }
    {
        const GridFunction1D lhs =
            shifted_square(translate_cells(f, s), pair.psi_family(), 2, 3);
        const GridFunction1D rhs =
            translate_cells(shifted_square(f, pair.psi_family(), 2, 3), s);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(lhs[i] == rhs[i]);
    }
}

TEST_CASE("hybrid operators factor on separable inputs") {
    const std::size_t N = 32;
    const double L = 1.0;
    const auto u = testutil::random_band_limited(N, L, 6, 1001);
    const auto v = testutil::random_band_limited(N, L, 6, 1002);
    GridFunction2D f(N, N, L, L);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) f(i, j) = u[i] * v[j];

    const auto pair = make_mother_pair(MotherKind::compact_frequency);
    const BumpFamily phi1{pair.profile, BumpType::phi, 2};
    const BumpFamily phi2{pair.profile, BumpType::phi, -1};
    const BumpFamily psi1{pair.profile, BumpType::psi, 2};
    const BumpFamily psi2{pair.profile, BumpType::psi, -1};
    const ShiftPair sh{2, -1};
    const int K = 2;

    const GridFunction1D mu = scale_sup(u, phi1, sh.n1, K);
    const GridFunction1D mv = scale_sup(v, phi2, sh.n2, K);
    const GridFunction1D su = shifted_square(u, psi1, sh.n1, K);
    const GridFunction1D sv = shifted_square(v, psi2, sh.n2, K);

    struct Case {
        HybridKind kind;
        const BumpFamily *f1, *f2;
        const GridFunction1D *a, *b;
    };
    const Case cases[] = {
        {HybridKind::MM, &phi1, &phi2, &mu, &mv},
        {HybridKind::SS, &psi1, &psi2, &su, &sv},
        {HybridKind::MS, &phi1, &psi2, &mu, &sv},
        {HybridKind::SM, &psi1, &phi2, &su, &mv},
    };
    for (const auto& c : cases) {
        const GridFunction2D got = hybrid(f, c.kind, *c.f1, *c.f2, sh, K);
        GridFunction2D want(N, N, L, L);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j)
                want(i, j) = (*c.a)[i].real() * (*c.b)[j].real();
        CHECK(testutil::rel_l2_diff(got, want) <= 1e-8);
    }
}

TEST_CASE("hybrid validates family types against the kind") {
    const auto pair = make_mother_pair(MotherKind::compact_frequency);
    GridFunction2D f(8, 8, 1.0, 1.0);
    CHECK_THROWS_AS(hybrid(f, HybridKind::MM, pair.psi_family(), pair.phi_family(), {0, 0}, 1),
                    ConfigError);
    CHECK_THROWS_AS(hybrid(f, HybridKind::SS, pair.psi_family(), pair.phi_family(), {0, 0}, 1),
                    ConfigError);
    CHECK_THROWS_AS(hybrid(f, HybridKind::MS, pair.psi_family(), pair.psi_family(), {0, 0}, 1),
                    ConfigError);
    CHECK_THROWS_AS(hybrid(f, HybridKind::SM, pair.phi_family(), pair.phi_family(), {0, 0}, 1),
                    ConfigError);
}

TEST_CASE("curly_mn: base case, domination of each term, input validation") {
    const auto f = testutil::random_band_limited(128, 1.0, 16, 606);
    const GridFunction1D base = curly_mn(f, 1);
    const GridFunction1D m1 = shifted_maximal(f, -1);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(base[i] == m1[i]);

    const GridFunction1D big = curly_mn(f, 5);  // terms k = 0..2
    for (std::int64_t sh : {std::int64_t{1}, std::int64_t{2}, std::int64_t{4}}) {
        const GridFunction1D term = shifted_maximal(f, -sh);
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(big[i].real() >= term[i].real());
    }
    CHECK_THROWS_AS(curly_mn(f, 0), ConfigError);
}

TEST_CASE("weighted weak-type bound for the shifted maximal function") {
    // alpha |{M_n f > alpha}|_w  <=  C0 Int |f| (curly M_n w),  w >= 0.
    // C0 frozen after calibration over this seeded family.
    const double C0 = 8.0;
    const std::size_t N = 256;
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const auto f = testutil::random_band_limited(N, 1.0, 24, 9000 + trial);
        auto w = abs_of(testutil::random_band_limited(N, 1.0, 12, 700 + trial));
        for (std::size_t i = 0; i < N; ++i) w[i] += 0.05;  // keep the weight positive
        const std::int64_t n = (trial % 2 == 0) ? 4 : 16;
        const GridFunction1D mf = shifted_maximal(f, n);
        const GridFunction1D mw = curly_mn(w, n);
        double fmax = 0.0;
        for (std::size_t i = 0; i < N; ++i) fmax = std::max(fmax, mf[i].real());
        const double alpha = 0.3 * fmax;
        const double h = 1.0 / static_cast<double>(N);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            if (mf[i].real() > alpha) lhs += w[i].real();
            rhs += std::abs(f[i]) * mw[i].real();
        }
        lhs *= alpha * h;
        rhs *= h;
        REQUIRE(rhs > 0.0);
        worst = std::max(worst, lhs / rhs);
        CHECK(lhs <= C0 * rhs);
    }
    CHECK(worst > 0.05);  // the bound is not vacuous on this family
}

namespace {

struct CzCheckOptions {
    bool integer_cells = false;   // all-exact aggregate checks available
    bool check_aggregates = true;
};

// Verify every structural invariant of a decomposition.  Atomic comparisons
// are bitwise; aggregate ones use long-double accumulation of bitwise pieces
// (exact when integer_cells).
void check_cz(const std::vector<GridFunction1D>& fs, const CZDecomposition& d,
              const CzCheckOptions& opt) {
    const std::size_t N = fs[0].size();
    const int top = static_cast<int>(std::bit_width(N)) - 1;
    const double alpha = d.alpha;
    const std::int64_t n = d.n;
    const int log_n =
        (n == 0) ? -1 : static_cast<int>(std::bit_width(static_cast<std::uint64_t>(std::llabs(n)))) - 1;

    // ---- selection geometry: disjoint aligned spans matching the intervals
    REQUIRE(d.selected.size() == d.selected_spans.size());
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (const auto& s : d.selected_spans) {
        CHECK(s.cells > 0);
        CHECK(s.start_cell >= 0);
        CHECK(s.start_cell % s.cells == 0);  // aligned dyadic block
        spans.emplace_back(s.start_cell, s.start_cell + s.cells);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) CHECK(spans[i - 1].second <= spans[i].first);

    // ---- maximality at the selection threshold (bitwise via the sum tree)
    const DyadicSums sums = DyadicSums::build(d.big_f);
    for (const auto& s : d.selected_spans) {
        const int m = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(s.cells))) - 1;
        const auto b = static_cast<std::size_t>(s.start_cell >> m);
        CHECK(sums.block_avg(m, b) > alpha);
        CHECK(sums.block_avg(m, b) <= 2.0 * alpha);
        if (m < top) CHECK(sums.block_avg(m + 1, b >> 1) <= alpha);
    }

    // ---- masks and measures
    std::size_t om = 0, omt = 0;
    for (std::size_t i = 0; i < N; ++i) {
        om += d.omega_mask[i];
        omt += d.omega_tilde_mask[i];
        if (d.omega_mask[i]) CHECK(d.omega_tilde_mask[i]);  // coverage inclusion
        if (!d.omega_mask[i]) CHECK(d.big_f[i].real() <= alpha);  // F <= alpha off Omega
    }
    const double h = fs[0].period() / static_cast<double>(N);
    CHECK(d.omega_measure == h * static_cast<double>(om));
    CHECK(d.omega_tilde_measure == h * static_cast<double>(omt));
    if (n != 0 && !d.selected.empty())
        CHECK(omt <= 3 * static_cast<std::size_t>(2 + log_n) * om);

    // ---- splits: f = f' + f'' with the advertised supports
    for (std::size_t k = 0; k < fs.size(); ++k) {
        for (std::size_t i = 0; i < N; ++i) {
            if (d.omega_mask[i]) {
                CHECK(d.f_prime[k][i] == cplx(0.0));
                CHECK(d.f_second[k][i] == fs[k][i]);
            } else {
                CHECK(d.f_prime[k][i] == fs[k][i]);
                CHECK(d.f_second[k][i] == cplx(0.0));
            }
        }
    }

    // ---- averaged pieces: value (tree sum)/2^m on each block, zero elsewhere;
    //      G <= 2 alpha on the selected blocks
    for (std::size_t k = 0; k < fs.size(); ++k) {
        const DyadicSums sk = DyadicSums::build(fs[k]);
        std::vector<std::uint8_t> covered(N, 0);
        for (const auto& s : d.selected_spans) {
            const int m = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(s.cells))) - 1;
            const double v = sk.block_avg(m, static_cast<std::size_t>(s.start_cell >> m));
            for (std::int64_t t = 0; t < s.cells; ++t) {
                CHECK(d.g[k][static_cast<std::size_t>(s.start_cell + t)].real() == v);
                covered[static_cast<std::size_t>(s.start_cell + t)] = 1;
            }
        }
        for (std::size_t i = 0; i < N; ++i)
            if (!covered[i]) CHECK(d.g[k][i] == cplx(0.0));
    }
    for (const auto& s : d.selected_spans) {
        const int m = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(s.cells))) - 1;
        double sq = 0.0;
        for (std::size_t k = 0; k < fs.size(); ++k) {
            const DyadicSums sk = DyadicSums::build(fs[k]);
            const double v = sk.block_avg(m, static_cast<std::size_t>(s.start_cell >> m));
            sq += v * v;
        }
        if (opt.integer_cells)
            CHECK(sq <= 4.0 * alpha * alpha);  // exact: dyadic rationals both sides
        else
            CHECK(std::sqrt(sq) <= 2.0 * alpha * (1.0 + 1e-13));
    }

    // ---- size of Omega
    if (opt.check_aggregates) {
        long double mass = 0.0L;
        for (std::size_t i = 0; i < N; ++i) mass += std::abs(d.big_f[i]);
        const long double lhs = static_cast<long double>(alpha) * static_cast<long double>(om);
        if (opt.integer_cells)
            CHECK(static_cast<double>(lhs) <= static_cast<double>(mass));
        else
            CHECK(static_cast<double>(lhs) <= static_cast<double>(mass) * (1.0 + 1e-12));
    }

    // ---- all-or-nothing: off Omega-tilde, a shifted block meeting Omega
    //      swallows whole selected intervals
    for (std::size_t i = 0; i < N; ++i) {
        if (d.omega_tilde_mask[i]) continue;
        for (int m = 0; m <= top; ++m) {
            const std::size_t blocks = N >> m;
            const std::int64_t b =
                ((static_cast<std::int64_t>(i >> m) + n) % static_cast<std::int64_t>(blocks) +
                 static_cast<std::int64_t>(blocks)) %
                static_cast<std::int64_t>(blocks);
            const std::int64_t lo = b << m, hi = lo + (std::int64_t{1} << m);
            for (const auto& s : d.selected_spans) {
                const std::int64_t slo = s.start_cell, shi = s.start_cell + s.cells;
                const bool meets = slo < hi && lo < shi;
                if (meets) CHECK((lo <= slo && shi <= hi));
            }
        }
    }

    // ---- pointwise domination off Omega-tilde, bitwise
    for (std::size_t k = 0; k < fs.size(); ++k) {
        const GridFunction1D mf = shifted_maximal(d.f_second[k], n);
        const GridFunction1D mg = shifted_maximal(d.g[k], n);
        for (std::size_t i = 0; i < N; ++i)
            if (!d.omega_tilde_mask[i]) CHECK(mf[i].real() <= mg[i].real());
    }
}

double next_sixteenth_above(double x) {
    return std::ldexp(std::floor(std::ldexp(x, 4)) + 1.0, -4);
}

}  // namespace

TEST_CASE("cz_decompose: constant below threshold selects nothing") {
    GridFunction1D f(64, 1.0);
    for (auto& z : f.samples()) z = 0.5;
    const CZDecomposition d = cz_decompose({f}, 4, 1.0);
    CHECK(d.selected.empty());
    CHECK(d.omega_measure == 0.0);
    CHECK(d.omega_tilde_measure == 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(d.f_prime[0][i] == f[i]);
        CHECK(d.g[0][i] == cplx(0.0));
        CHECK(d.big_g[i] == cplx(0.0));
    }
}

TEST_CASE("cz_decompose: single spike selects the expected maximal block") {
    GridFunction1D f(64, 1.0);
    f[0] = 64.0;
    const CZDecomposition d = cz_decompose({f}, 4, 3.0);
    REQUIRE(d.selected.size() == 1);
    CHECK(d.selected_spans[0].start_cell == 0);
    CHECK(d.selected_spans[0].cells == 16);  // avg 4 > 3, parent avg 2 <= 3
    CHECK(d.selected[0] == DyadicInterval{2, 0});
    CHECK(d.omega_measure == 0.25);
    check_cz({f}, d, {true, true});
}

TEST_CASE("cz_decompose: input validation") {
    GridFunction1D f(64, 1.0), g(32, 1.0), hpi(64, 3.0);
    CHECK_THROWS_AS(cz_decompose({}, 1, 1.0), ConfigError);
    CHECK_THROWS_AS(cz_decompose({f}, 1, 0.0), ConfigError);
    CHECK_THROWS_AS(cz_decompose({f, g}, 1, 1.0), ConfigError);
    CHECK_THROWS_AS(cz_decompose({hpi}, 1, 1.0), ConfigError);  // period not 2^p
}

TEST_CASE("cz_decompose: integer-valued suites satisfy every invariant exactly") {
    for (std::uint64_t suite = 0; suite < 6; ++suite) {
        Rng rng(derive_seed(4400, suite));
        const std::size_t N = 128;
        GridFunction1D f(N, 1.0);
        for (int blockc = 0; blockc < 6; ++blockc) {
            const int m = static_cast<int>(rng.below(5));
            const auto b = static_cast<std::size_t>(rng.below(N >> m));
            const double val = 1.0 + static_cast<double>(rng.below(8));
            for (std::size_t t = 0; t < (std::size_t{1} << m); ++t) f[(b << m) + t] += val;
        }
        for (int spikes = 0; spikes < 3; ++spikes)
            f[static_cast<std::size_t>(rng.below(N))] +=
                static_cast<double>(1 + rng.below(40));
        double mean = 0.0;
        for (std::size_t i = 0; i < N; ++i) mean += std::abs(f[i]);
        mean /= static_cast<double>(N);
        const double alpha = std::max(next_sixteenth_above(mean), 2.5);
        const std::int64_t n = (suite % 3 == 0) ? 4 : (suite % 3 == 1) ? 8 : -5;
        const CZDecomposition d = cz_decompose({f}, n, alpha);
        if (alpha < f.norm_p(std::numeric_limits<double>::infinity()))
            CHECK(!d.selected.empty());
        check_cz({f}, d, {true, true});
    }
}

TEST_CASE("cz_decompose: generic vector-valued suites satisfy the invariants") {
    for (std::uint64_t suite = 0; suite < 4; ++suite) {
        const std::size_t N = 128;
        std::vector<GridFunction1D> fs;
        const std::size_t count = 1 + suite % 3;
        for (std::size_t k = 0; k < count; ++k) {
            auto f = testutil::random_band_limited(N, 2.0, 18, derive_seed(8800 + suite, k));
            f[static_cast<std::size_t>((suite * 37 + 11 * k) % N)] += 9.0;  // a rough spot
            fs.push_back(std::move(f));
        }
        GridFunction1D big(N, 2.0);
        double mean = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double s2 = 0.0;
            for (const auto& f : fs) s2 += std::norm(f[i]);
            mean += std::sqrt(s2);
        }
        mean /= static_cast<double>(N);
        const double alpha = 1.5 * mean;
        const std::int64_t n = (suite % 2 == 0) ? 4 : 3;
        const CZDecomposition d = cz_decompose(fs, n, alpha);
        CHECK(!d.selected.empty());
        check_cz(fs, d, {false, true});
    }
}

TEST_CASE("fefferman_stein_ratio: single-function reduction and degeneracy") {
    const auto f = testutil::random_band_limited(128, 1.0, 16, 24);
    const GridFunction1D m = shifted_maximal(f, 6);
    const double want = m.norm_p(2.0) / f.norm_p(2.0);
    const double got = fefferman_stein_ratio({f}, 6, 2.0);
    CHECK(got == doctest::Approx(want).epsilon(1e-13));
    GridFunction1D z(64, 1.0);
    CHECK_THROWS_AS(fefferman_stein_ratio({z}, 1, 2.0), DegenerateInputError);
    CHECK_THROWS_AS(fefferman_stein_ratio({f}, 1, 1.0), ConfigError);
    CHECK_THROWS_AS(fefferman_stein_ratio({}, 1, 2.0), ConfigError);
}

TEST_CASE("fefferman_stein_ratio stays under the log^2 envelope") {
    // r(n) <= C log^2 <n> with one frozen constant across two input families
    std::vector<GridFunction1D> fs;
    for (std::uint64_t k = 0; k < 3; ++k)
        fs.push_back(testutil::random_band_limited(256, 1.0, 24, derive_seed(515, k)));
    std::vector<GridFunction1D> spiky;
    for (std::uint64_t k = 0; k < 3; ++k) {
        GridFunction1D f(256, 1.0);
        Rng rng(derive_seed(616, k));
        for (int s = 0; s < 5; ++s)
            f[static_cast<std::size_t>(rng.below(256))] += rng.uniform(0.5, 3.0);
        spiky.push_back(std::move(f));
    }
    const double C = 1.0;  // frozen after calibration on these seeds
    for (const auto* v : {&fs, &spiky}) {
        for (std::int64_t n : {std::int64_t{4}, std::int64_t{64}, std::int64_t{1024}}) {
            const double r = fefferman_stein_ratio(*v, n, 2.0);
            CHECK(r > 0.0);
            CHECK(r <= C * std::pow(std::log(shift_weight(n)), 2.0));
        }
    }
}

TEST_CASE("estimate_opnorm: identity, scaling, multipliers, monotonicity") {
    const auto identity = [](const GridFunction1D& f) { return f; };
    CHECK(estimate_opnorm(identity, 64, 1.0, 2.0, 8, 3) == 1.0);

    const auto doubler = [](const GridFunction1D& f) {
        GridFunction1D g = f;
        for (auto& z : g.samples()) z *= 2.0;
        return g;
    };
    CHECK(estimate_opnorm(doubler, 64, 1.0, 2.0, 8, 3) ==
          doctest::Approx(2.0).epsilon(1e-12));

    // diagonal Fourier multiplier: the estimate reaches max |m| via the pure
    // Fourier mode probes
    const auto half_band = [](const GridFunction1D& f) {
        auto hat = f.spectrum();
        const std::size_t n = hat.size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::int64_t m = (i < n / 2) ? static_cast<std::int64_t>(i)
                                               : static_cast<std::int64_t>(i) -
                                                     static_cast<std::int64_t>(n);
            const double mult =
                static_cast<double>(std::abs(m)) / static_cast<double>(n / 2);
            hat[i] *= mult;
        }
        return GridFunction1D::from_spectrum(hat, f.period());
    };
    const double est = estimate_opnorm(half_band, 64, 1.0, 2.0, 128, 7);
    CHECK(est >= 0.95);
    CHECK(est <= 1.0 + 1e-9);

    // prefix property: more trials can only raise the estimate, bitwise
    const double few = estimate_opnorm(half_band, 64, 1.0, 2.0, 16, 7);
    CHECK(est >= few);
    const double serial = estimate_opnorm(half_band, 64, 1.0, 2.0, 32, 7, Exec::serial);
    const double parallel = estimate_opnorm(half_band, 64, 1.0, 2.0, 32, 7, Exec::parallel);
    CHECK(serial == parallel);
    CHECK_THROWS_AS(estimate_opnorm(identity, 64, 1.0, 2.0, 0, 1), ConfigError);
}

TEST_CASE("maximal_report carries the output and norm ratios") {
    const auto f = testutil::random_band_limited(128, 1.0, 12, 88);
    const MaximalReport r = maximal_report(f, 16, {1.5, 2.0, 4.0}, "bl-88");
    CHECK(r.input_id == "bl-88");
    CHECK(r.n == 16);
    REQUIRE(r.norm_estimates.size() == 3);
    for (const auto& [p, ratio] : r.norm_estimates) {
        CHECK(ratio > 0.0);
        CHECK(ratio < 50.0);
        (void)p;
    }
    const GridFunction1D direct = shifted_maximal(f, 16);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(r.output[i] == direct[i]);
}
