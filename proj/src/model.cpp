#include "comlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>

#include "json.hpp"

#include "comlab/errors.hpp"
#include "comlab/shifted.hpp"

namespace comlab {

namespace {

std::int64_t floor_mod(std::int64_t a, std::int64_t n) { return ((a % n) + n) % n; }

bool is_pow2(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

void validate_slots(const std::vector<ModelSlot>& slots) {
    if (slots.size() < 2) throw ConfigError("model: need at least two slots");
    int psi1 = 0, psi2 = 0;
    for (const auto& s : slots) {
        psi1 += (s.type1 == BumpType::psi) ? 1 : 0;
        psi2 += (s.type2 == BumpType::psi) ? 1 : 0;
    }
    if (psi1 < 2 || psi2 < 2)
        throw ConfigError("model: need at least two mean-zero slots per axis");
}

void check_common_grid(const std::vector<GridFunction2D>& f) {
    if (f.empty()) throw ConfigError("model: no input functions");
    for (const auto& g : f) {
        if (g.size1() != f[0].size1() || g.size2() != f[0].size2() ||
            g.period1() != f[0].period1() || g.period2() != f[0].period2())
            throw ConfigError("model: inputs must share one grid");
    }
}

// Bump samples on one axis, L^2-normalised on the grid.
std::vector<double> axis_bump(const DyadicInterval& I, const BumpFamily& fam, std::size_t n,
                              double period) {
    GridFunction1D like(n, period);
    GridFunction1D b = adapted_bump(I, fam, 2.0, like);
    const double nrm = b.norm_p(2.0);
    if (nrm == 0.0) throw ResolutionError("model: bump vanishes on the grid");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = b[i].real() / nrm;
    return out;
}

// bx[r][j] / by[r][j]: axis bumps for rectangle r, slot j.
struct BumpTable {
    std::vector<std::vector<std::vector<double>>> bx, by;
};

BumpTable build_bumps(const RectangleSystem& sys, std::size_t n1, std::size_t n2, double l1,
                      double l2) {
    const auto prof = make_family(sys.mother, BumpType::phi, 0).profile;
    const std::size_t nr = sys.rectangles.size(), ns = sys.slots.size();
    BumpTable t;
    t.bx.resize(nr);
    t.by.resize(nr);
    for (std::size_t r = 0; r < nr; ++r) {
        t.bx[r].resize(ns);
        t.by[r].resize(ns);
        for (std::size_t j = 0; j < ns; ++j) {
            const ModelSlot& slot = sys.slots[j];
            t.bx[r][j] = axis_bump(sys.rectangles[r].x,
                                   BumpFamily{prof, slot.type1, slot.shift.n1}, n1, l1);
            t.by[r][j] = axis_bump(sys.rectangles[r].y,
                                   BumpFamily{prof, slot.type2, slot.shift.n2}, n2, l2);
        }
    }
    return t;
}

cplx inner_product(const GridFunction2D& f, const std::vector<double>& bx,
                   const std::vector<double>& by) {
    const std::size_t n1 = f.size1(), n2 = f.size2();
    cplx acc(0.0);
    for (std::size_t i = 0; i < n1; ++i) {
        if (bx[i] == 0.0) continue;
        cplx row(0.0);
        for (std::size_t j = 0; j < n2; ++j) row += f(i, j) * by[j];
        acc += bx[i] * row;
    }
    return acc * (f.spacing1() * f.spacing2());
}

// Validates alignment of every rectangle against the grid.
void check_alignment(const RectangleSystem& sys, const GridFunction2D& like) {
    GridFunction1D ax(like.size1(), like.period1());
    GridFunction1D ay(like.size2(), like.period2());
    for (const auto& R : sys.rectangles) {
        (void)aligned_span(ax, R.x);
        (void)aligned_span(ay, R.y);
    }
}

// Per-rectangle coefficient magnitude pieces: weight * product of pairings.
std::vector<cplx> rectangle_coefficients(const RectangleSystem& sys,
                                         const std::vector<GridFunction2D>& f,
                                         const BumpTable& bumps, Exec exec) {
    const std::int64_t nr = static_cast<std::int64_t>(sys.rectangles.size());
    const int l = sys.arity();
    std::vector<cplx> coef(static_cast<std::size_t>(nr));
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t r = 0; r < nr; ++r) {
        const auto ur = static_cast<std::size_t>(r);
        const double w = std::pow(sys.rectangles[ur].area(), -0.5 * static_cast<double>(l - 1));
        cplx c(w, 0.0);
        for (int j = 0; j < l; ++j)
            c *= inner_product(f[static_cast<std::size_t>(j)], bumps.bx[ur][static_cast<std::size_t>(j)],
                               bumps.by[ur][static_cast<std::size_t>(j)]);
        coef[ur] = c;
    }
    return coef;
}

}  // namespace

void validate_system(const RectangleSystem& sys) {
    validate_slots(sys.slots);
    const ModelSlot& out = sys.slots.back();
    if (out.shift.n1 != 0 || out.shift.n2 != 0)
        throw ConfigError("model: the output slot must be unshifted");
}

GridFunction2D model_apply(const RectangleSystem& sys, const std::vector<GridFunction2D>& f,
                           Exec exec) {
    validate_system(sys);
    check_common_grid(f);
    const int l = sys.arity();
    if (static_cast<int>(f.size()) != l)
        throw ConfigError("model_apply: expected one input per non-output slot");
    const GridFunction2D& like = f[0];
    check_alignment(sys, like);
    const std::size_t n1 = like.size1(), n2 = like.size2();

    const BumpTable bumps = build_bumps(sys, n1, n2, like.period1(), like.period2());
    const std::vector<cplx> coef = rectangle_coefficients(sys, f, bumps, exec);

    GridFunction2D out(n1, n2, like.period1(), like.period2());
    const std::size_t slot_out = sys.slots.size() - 1;
    const auto in1 = static_cast<std::int64_t>(n1);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t i = 0; i < in1; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        for (std::size_t r = 0; r < coef.size(); ++r) {
            const cplx c = coef[r] * bumps.bx[r][slot_out][ui];
            if (c == cplx(0.0)) continue;
            const auto& by = bumps.by[r][slot_out];
            for (std::size_t j = 0; j < n2; ++j) out(ui, j) += c * by[j];
        }
    }
    return out;
}

double model_form(const RectangleSystem& sys, const std::vector<GridFunction2D>& f,
                  const GridFunction2D& g, Exec exec) {
    validate_system(sys);
    check_common_grid(f);
    const int l = sys.arity();
    if (static_cast<int>(f.size()) != l)
        throw ConfigError("model_form: expected one input per non-output slot");
    const GridFunction2D& like = f[0];
    if (g.size1() != like.size1() || g.size2() != like.size2() ||
        g.period1() != like.period1() || g.period2() != like.period2())
        throw ConfigError("model_form: output function on a different grid");
    check_alignment(sys, like);

    const BumpTable bumps =
        build_bumps(sys, like.size1(), like.size2(), like.period1(), like.period2());
    const std::int64_t nr = static_cast<std::int64_t>(sys.rectangles.size());
    const std::size_t slot_out = sys.slots.size() - 1;
    std::vector<double> term(static_cast<std::size_t>(nr), 0.0);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t r = 0; r < nr; ++r) {
        const auto ur = static_cast<std::size_t>(r);
        double t = std::pow(sys.rectangles[ur].area(), -0.5 * static_cast<double>(l - 1));
        for (int j = 0; j < l; ++j)
            t *= std::abs(inner_product(f[static_cast<std::size_t>(j)],
                                        bumps.bx[ur][static_cast<std::size_t>(j)],
                                        bumps.by[ur][static_cast<std::size_t>(j)]));
        t *= std::abs(inner_product(g, bumps.bx[ur][slot_out], bumps.by[ur][slot_out]));
        term[ur] = t;
    }
    double acc = 0.0;
    for (double t : term) acc += t;  // fixed order, independent of exec
    return acc;
}

// ------------------------------------------------------ rectangle maximal

double mask_measure(const CellMask& mask, const GridFunction2D& like) {
    if (mask.size() != like.size1() * like.size2())
        throw ConfigError("mask_measure: mask does not match the grid");
    std::int64_t c = 0;
    for (auto v : mask) c += (v != 0) ? 1 : 0;
    return static_cast<double>(c) * like.spacing1() * like.spacing2();
}

std::vector<double> rectangle_maximal(const CellMask& mask, std::size_t n1, std::size_t n2) {
    if (n1 == 0 || n2 == 0 || mask.size() != n1 * n2)
        throw ConfigError("rectangle_maximal: mask does not match the grid");
    const std::size_t m1 = 2 * n1, m2 = 2 * n2;
    // Prefix sums over the doubled (torus-unrolled) grid.
    std::vector<std::int64_t> pre((m1 + 1) * (m2 + 1), 0);
    auto P = [&](std::size_t i, std::size_t j) -> std::int64_t& { return pre[i * (m2 + 1) + j]; };
    for (std::size_t i = 1; i <= m1; ++i)
        for (std::size_t j = 1; j <= m2; ++j)
            P(i, j) = static_cast<std::int64_t>(mask[((i - 1) % n1) * n2 + ((j - 1) % n2)] != 0) +
                      P(i - 1, j) + P(i, j - 1) - P(i - 1, j - 1);

    auto sizes = [](std::size_t n) {
        std::vector<std::size_t> w;
        for (std::size_t v = 1; v <= n; v *= 2) w.push_back(v);
        if (w.back() != n) w.push_back(n);
        return w;
    };

    std::vector<double> best(n1 * n2, 0.0);
    std::vector<std::int64_t> win(n1 * n2), rowmax(n1 * n2);
    for (std::size_t w1 : sizes(n1)) {
        for (std::size_t w2 : sizes(n2)) {
            for (std::size_t u = 0; u < n1; ++u)
                for (std::size_t v = 0; v < n2; ++v)
                    win[u * n2 + v] = P(u + w1, v + w2) - P(u, v + w2) - P(u + w1, v) + P(u, v);
            // rowmax[i][v]: best window count among starts u with u <= i < u + w1.
            for (std::size_t i = 0; i < n1; ++i)
                for (std::size_t v = 0; v < n2; ++v) {
                    std::int64_t m = 0;
                    for (std::size_t t = 0; t < w1; ++t) {
                        const std::size_t u = static_cast<std::size_t>(
                            floor_mod(static_cast<std::int64_t>(i) - static_cast<std::int64_t>(t),
                                      static_cast<std::int64_t>(n1)));
                        m = std::max(m, win[u * n2 + v]);
                    }
                    rowmax[i * n2 + v] = m;
                }
            const double inv = 1.0 / static_cast<double>(w1 * w2);
            for (std::size_t i = 0; i < n1; ++i)
                for (std::size_t j = 0; j < n2; ++j) {
                    std::int64_t m = 0;
                    for (std::size_t t = 0; t < w2; ++t) {
                        const std::size_t v = static_cast<std::size_t>(
                            floor_mod(static_cast<std::int64_t>(j) - static_cast<std::int64_t>(t),
                                      static_cast<std::int64_t>(n2)));
                        m = std::max(m, rowmax[i * n2 + v]);
                    }
                    best[i * n2 + j] = std::max(best[i * n2 + j], static_cast<double>(m) * inv);
                }
        }
    }
    return best;
}

// ----------------------------------------------------------- stopping time

namespace {

struct Span2 {
    std::int64_t i0 = 0, ci = 0, j0 = 0, cj = 0;
};

Span2 rect_span(const GridFunction2D& like, const DyadicRectangle& R) {
    GridFunction1D ax(like.size1(), like.period1());
    GridFunction1D ay(like.size2(), like.period2());
    const AlignedSpan sx = aligned_span(ax, R.x);
    const AlignedSpan sy = aligned_span(ay, R.y);
    Span2 s;
    s.i0 = floor_mod(sx.start_cell, static_cast<std::int64_t>(like.size1()));
    s.ci = sx.cells;
    s.j0 = floor_mod(sy.start_cell, static_cast<std::int64_t>(like.size2()));
    s.cj = sy.cells;
    return s;
}

std::int64_t count_overlap(const CellMask& mask, const Span2& s, std::size_t n1, std::size_t n2) {
    std::int64_t c = 0;
    for (std::int64_t a = 0; a < s.ci; ++a) {
        const std::size_t i = static_cast<std::size_t>((s.i0 + a) % static_cast<std::int64_t>(n1));
        for (std::int64_t b = 0; b < s.cj; ++b) {
            const std::size_t j =
                static_cast<std::size_t>((s.j0 + b) % static_cast<std::int64_t>(n2));
            if (mask[i * n2 + j]) ++c;
        }
    }
    return c;
}

void paint_span(CellMask& mask, const Span2& s, std::size_t n1, std::size_t n2) {
    for (std::int64_t a = 0; a < s.ci; ++a) {
        const std::size_t i = static_cast<std::size_t>((s.i0 + a) % static_cast<std::int64_t>(n1));
        for (std::int64_t b = 0; b < s.cj; ++b) {
            const std::size_t j =
                static_cast<std::size_t>((s.j0 + b) % static_cast<std::int64_t>(n2));
            mask[i * n2 + j] = 1;
        }
    }
}

HybridKind kind_for(const ModelSlot& slot) {
    if (slot.type1 == BumpType::phi)
        return slot.type2 == BumpType::phi ? HybridKind::MM : HybridKind::MS;
    return slot.type2 == BumpType::phi ? HybridKind::SM : HybridKind::SS;
}

std::vector<double> hybrid_values(const GridFunction2D& f, const ModelSlot& slot,
                                  const std::shared_ptr<const BumpProfile>& prof, int K,
                                  Exec exec) {
    const BumpFamily fam1{prof, slot.type1, 0};
    const BumpFamily fam2{prof, slot.type2, 0};
    const ShiftPair rev{-slot.shift.n1, -slot.shift.n2};
    const GridFunction2D g = hybrid(f, kind_for(slot), fam1, fam2, rev, K, exec);
    std::vector<double> out(g.size1() * g.size2());
    for (std::size_t idx = 0; idx < out.size(); ++idx) out[idx] = g.samples()[idx].real();
    return out;
}

CellMask superlevel(const std::vector<double>& vals, double threshold, bool strict) {
    CellMask m(vals.size(), 0);
    for (std::size_t i = 0; i < vals.size(); ++i)
        m[i] = (strict ? vals[i] > threshold : vals[i] >= threshold) ? 1 : 0;
    return m;
}

double sq(double x) { return x * x; }

void push_check(DecompositionCertificate& cert, std::string name, double lhs, double rhs,
                bool pass) {
    cert.checks.push_back({std::move(name), lhs, rhs, pass});
    cert.all_pass = cert.all_pass && pass;
}

}  // namespace

DecompositionCertificate stopping_time_decompose(const RectangleSystem& sys,
                                                 const std::vector<GridFunction2D>& f,
                                                 const std::vector<double>& p,
                                                 const CellMask& e_set,
                                                 std::array<int, 2> tail_index,
                                                 const StoppingTimeOptions& opt) {
    validate_system(sys);
    check_common_grid(f);
    const int l = sys.arity();
    if (static_cast<int>(f.size()) != l)
        throw ConfigError("stopping_time_decompose: expected one input per non-output slot");
    if (static_cast<int>(p.size()) != l)
        throw ConfigError("stopping_time_decompose: expected one exponent per input");
    for (double pj : p)
        if (!(pj > 1.0)) throw ConfigError("stopping_time_decompose: exponents must exceed 1");
    if (tail_index[0] < 0 || tail_index[1] < 0)
        throw ConfigError("stopping_time_decompose: tail index must be non-negative");
    const GridFunction2D& like = f[0];
    const std::size_t n1 = like.size1(), n2 = like.size2();
    if (e_set.size() != n1 * n2)
        throw ConfigError("stopping_time_decompose: E does not match the grid");
    for (int j = 0; j < l; ++j) {
        const double nrm = f[static_cast<std::size_t>(j)].norm_p(p[static_cast<std::size_t>(j)]);
        if (std::abs(nrm - 1.0) > 1e-6)
            throw ConfigError("stopping_time_decompose: inputs must be normalised in L^p");
    }
    const double measure_e = mask_measure(e_set, like);
    if (std::abs(measure_e - 1.0) > 1e-6)
        throw ConfigError("stopping_time_decompose: E must have measure one");

    // Rectangle spans; the tail dilates must be resolvable on the grid.
    const auto nr = sys.rectangles.size();
    std::vector<Span2> spans(nr);
    for (std::size_t r = 0; r < nr; ++r) {
        spans[r] = rect_span(like, sys.rectangles[r]);
        const Span2& s = spans[r];
        if (!is_pow2(s.ci) || !is_pow2(s.cj))
            throw ResolutionError("stopping_time_decompose: rectangle span must be a power of two");
        if (tail_index[0] > 0 && (s.ci < 2 || (s.ci << tail_index[0]) > static_cast<std::int64_t>(n1)))
            throw ResolutionError("stopping_time_decompose: axis-1 dilate not resolvable");
        if (tail_index[1] > 0 && (s.cj < 2 || (s.cj << tail_index[1]) > static_cast<std::int64_t>(n2)))
            throw ResolutionError("stopping_time_decompose: axis-2 dilate not resolvable");
    }

    DecompositionCertificate cert;
    cert.tail_index = tail_index;
    cert.measure_e = measure_e;

    const auto prof = make_family(sys.mother, BumpType::phi, 0).profile;
    const int K = opt.scale_window;
    const int ksum = tail_index[0] + tail_index[1];
    const double twol = 2.0 * static_cast<double>(l);

    // Hybrid operator values and log^2 shift weights per input slot.
    std::vector<std::vector<double>> op(static_cast<std::size_t>(l));
    std::vector<double> llw(static_cast<std::size_t>(l));
    for (int j = 0; j < l; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        op[uj] = hybrid_values(f[uj], sys.slots[uj], prof, K, opt.exec);
        llw[uj] = sq(std::log(shift_weight(sys.slots[uj].shift.n1))) *
                  sq(std::log(shift_weight(sys.slots[uj].shift.n2)));
    }

    // Exceptional set for a given constant C.
    struct OmegaSets {
        CellMask base, tilde, tilde2;
    };
    auto build_omega = [&](double c0) {
        OmegaSets o;
        o.base.assign(n1 * n2, 0);
        for (int j = 0; j < l; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            const double thr = c0 * std::ldexp(llw[uj], 5 * ksum);
            for (std::size_t idx = 0; idx < o.base.size(); ++idx)
                if (op[uj][idx] > thr) o.base[idx] = 1;
        }
        o.tilde = superlevel(rectangle_maximal(o.base, n1, n2), 1.0 / twol, true);
        o.tilde2 = superlevel(rectangle_maximal(o.tilde, n1, n2), std::ldexp(1.0, -ksum), false);
        return o;
    };
    auto omega_small = [&](const OmegaSets& o) { return mask_measure(o.tilde2, like) < 0.5; };

    // Calibrate C: the smallest power of two (at least one) whose exceptional
    // set has measure below one half.  The floor keeps the level thresholds on
    // the natural scale of the operators, which the class measure bounds rely
    // on.
    double c0 = opt.threshold_c;
    OmegaSets omega_sets;
    if (c0 > 0.0) {
        omega_sets = build_omega(c0);
    } else {
        c0 = 1.0;
        omega_sets = build_omega(c0);
        while (!omega_small(omega_sets)) {
            c0 *= 2.0;
            if (c0 > 1e12)
                throw DegenerateInputError(
                    "stopping_time_decompose: cannot control the exceptional set");
            omega_sets = build_omega(c0);
        }
    }
    cert.threshold_c = c0;
    cert.omega_base = omega_sets.base;
    cert.omega_tilde = omega_sets.tilde;
    cert.omega_tilde2 = omega_sets.tilde2;
    cert.omega = omega_sets.tilde2;
    cert.measure_omega = mask_measure(cert.omega, like);

    cert.e_prime.assign(n1 * n2, 0);
    for (std::size_t idx = 0; idx < cert.e_prime.size(); ++idx)
        cert.e_prime[idx] = (e_set[idx] && !cert.omega[idx]) ? 1 : 0;
    cert.measure_e_prime = mask_measure(cert.e_prime, like);

    push_check(cert, "omega-measure", cert.measure_omega, 0.5, cert.measure_omega < 0.5);
    push_check(cert, "e-prime-measure", cert.measure_e_prime, 0.5 * cert.measure_e,
               cert.measure_e_prime >= 0.5 * cert.measure_e);

    // Part split: rectangles inside the enlarged set pair to zero later.
    cert.part_two.assign(nr, 0);
    std::vector<std::size_t> retained;
    for (std::size_t r = 0; r < nr; ++r) {
        const std::int64_t inside = count_overlap(cert.omega_tilde, spans[r], n1, n2);
        cert.part_two[r] = (inside == spans[r].ci * spans[r].cj) ? 1 : 0;
        if (!cert.part_two[r]) retained.push_back(r);
    }

    // Level thresholds: lambda_j(s) = C * LL_j * 2^{-s} for input slots and
    // C * 2^{-s} for the output slot.
    auto lambda_in = [&](int j, int s) {
        return c0 * llw[static_cast<std::size_t>(j)] * std::exp2(static_cast<double>(-s));
    };
    auto lambda_out = [&](int s) { return c0 * std::exp2(static_cast<double>(-s)); };

    // First-passage class levels for one slot over the retained rectangles.
    auto assign_levels = [&](const std::vector<double>& vals, auto&& lambda, int s_first,
                             std::vector<int>& level_of) {
        std::vector<std::size_t> open = retained;
        int s = s_first;
        while (!open.empty()) {
            if (s - s_first >= opt.max_levels)
                throw DegenerateInputError("stopping_time_decompose: level scan did not settle");
            const CellMask mask = superlevel(vals, lambda(s), true);
            std::vector<std::size_t> still;
            for (std::size_t r : open) {
                const std::int64_t inter = count_overlap(mask, spans[r], n1, n2);
                if (twol * static_cast<double>(inter) >
                    static_cast<double>(spans[r].ci * spans[r].cj))
                    level_of[r] = s;
                else
                    still.push_back(r);
            }
            open = std::move(still);
            ++s;
        }
    };

    const int s_base = -5 * ksum;
    std::vector<std::vector<int>> level(static_cast<std::size_t>(l + 1),
                                        std::vector<int>(nr, 0));
    for (int j = 0; j < l; ++j)
        assign_levels(op[static_cast<std::size_t>(j)],
                      [&](int s) { return lambda_in(j, s); }, s_base + 1,
                      level[static_cast<std::size_t>(j)]);

    // Output slot: run on the indicator of E', with N chosen by scan as the
    // smallest positive integer whose base level is light for every retained
    // rectangle.
    GridFunction2D chi(n1, n2, like.period1(), like.period2());
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j2 = 0; j2 < n2; ++j2)
            chi(i, j2) = cplx(cert.e_prime[i * n2 + j2] ? 1.0 : 0.0, 0.0);
    const std::vector<double> op_out = hybrid_values(chi, sys.slots.back(), prof, K, opt.exec);

    int bigN = 1;
    for (;; ++bigN) {
        if (bigN > opt.max_levels)
            throw DegenerateInputError("stopping_time_decompose: no admissible base level");
        const CellMask mask = superlevel(op_out, lambda_out(-bigN), true);
        bool all_light = true;
        for (std::size_t r : retained) {
            const std::int64_t inter = count_overlap(mask, spans[r], n1, n2);
            if (twol * static_cast<double>(inter) >=
                static_cast<double>(spans[r].ci * spans[r].cj)) {
                all_light = false;
                break;
            }
        }
        if (all_light) break;
    }
    cert.base_level = bigN;
    assign_levels(op_out, lambda_out, -bigN + 1, level[static_cast<std::size_t>(l)]);

    // Record level tuples; part-two rectangles carry none.
    cert.rect_levels.assign(nr, {});
    for (std::size_t r : retained) {
        std::vector<int> tup(static_cast<std::size_t>(l + 1));
        for (int j = 0; j <= l; ++j)
            tup[static_cast<std::size_t>(j)] = level[static_cast<std::size_t>(j)][r];
        cert.rect_levels[r] = std::move(tup);
    }

    // Interior density: more than half of each retained rectangle avoids the
    // previous-level sets of every slot.
    for (std::size_t r : retained) {
        const Span2& s = spans[r];
        std::int64_t good = 0;
        for (std::int64_t a = 0; a < s.ci; ++a) {
            const std::size_t i =
                static_cast<std::size_t>((s.i0 + a) % static_cast<std::int64_t>(n1));
            for (std::int64_t b = 0; b < s.cj; ++b) {
                const std::size_t jj =
                    static_cast<std::size_t>((s.j0 + b) % static_cast<std::int64_t>(n2));
                const std::size_t idx = i * n2 + jj;
                bool clear = op_out[idx] <= lambda_out(level[static_cast<std::size_t>(l)][r] - 1);
                for (int j = 0; j < l && clear; ++j)
                    clear = op[static_cast<std::size_t>(j)][idx] <=
                            lambda_in(j, level[static_cast<std::size_t>(j)][r] - 1);
                if (clear) ++good;
            }
        }
        const std::int64_t cells = s.ci * s.cj;
        push_check(cert, "in6-r" + std::to_string(r),
                   static_cast<double>(good) / static_cast<double>(cells), 0.5,
                   2 * good > cells);
    }

    // Classes: retained rectangles grouped by level tuple.
    std::map<std::vector<int>, std::vector<std::size_t>> grouped;
    for (std::size_t r : retained) grouped[cert.rect_levels[r]].push_back(r);
    std::size_t partition_violations = 0;
    for (const auto& [tup, members] : grouped) {
        RectangleClass cls;
        cls.levels = tup;
        cls.members = members;
        CellMask u(n1 * n2, 0);
        for (std::size_t r : members) paint_span(u, spans[r], n1, n2);
        cls.measure = mask_measure(u, like);
        cert.classes.push_back(std::move(cls));
    }
    {
        std::size_t counted = 0;
        for (const auto& cls : cert.classes) counted += cls.members.size();
        if (counted != retained.size()) ++partition_violations;
        for (const auto& cls : cert.classes)
            for (std::size_t r : cls.members)
                if (cert.rect_levels[r] != cls.levels) ++partition_violations;
    }
    push_check(cert, "partition-exact", static_cast<double>(partition_violations), 0.0,
               partition_violations == 0);

    // Exact vanishing of the part-two pairings: the tail piece of the output
    // bump lives inside the dilated rectangle, which the enlarged exceptional
    // set swallows.
    {
        double worst = 0.0;
        const ModelSlot& slot_out = sys.slots.back();
        for (std::size_t r = 0; r < nr; ++r) {
            if (!cert.part_two[r]) continue;
            const DyadicRectangle& R = sys.rectangles[r];
            GridFunction1D likex(n1, like.period1());
            GridFunction1D likey(n2, like.period2());
            const GridFunction1D bx =
                adapted_bump(R.x, BumpFamily{prof, slot_out.type1, 0}, 2.0, likex);
            const GridFunction1D by =
                adapted_bump(R.y, BumpFamily{prof, slot_out.type2, 0}, 2.0, likey);
            const TailSplit tx = bump_tail_split(bx, R.x, 10.0, tail_index[0]);
            const TailSplit ty = bump_tail_split(by, R.y, 10.0, tail_index[1]);
            const GridFunction1D& px = tx.pieces[static_cast<std::size_t>(tail_index[0])];
            const GridFunction1D& py = ty.pieces[static_cast<std::size_t>(tail_index[1])];
            cplx acc(0.0);
            for (std::size_t i = 0; i < n1; ++i) {
                if (px[i] == cplx(0.0)) continue;
                cplx row(0.0);
                for (std::size_t j2 = 0; j2 < n2; ++j2)
                    if (cert.e_prime[i * n2 + j2]) row += py[j2];
                acc += px[i] * row;
            }
            worst = std::max(worst, std::abs(acc) * like.spacing1() * like.spacing2());
        }
        push_check(cert, "part-two-vanish", worst, 0.0, worst == 0.0);
    }

    // Class containment and measure bounds.  The maximal superlevel masks are
    // shared across classes with equal slot levels.
    std::map<std::pair<int, int>, CellMask> mm_cache;
    auto mm_superlevel = [&](int j, int s) -> const CellMask& {
        const auto key = std::make_pair(j, s);
        auto it = mm_cache.find(key);
        if (it != mm_cache.end()) return it->second;
        const std::vector<double>& vals = (j == l) ? op_out : op[static_cast<std::size_t>(j)];
        const double thr = (j == l) ? lambda_out(s) : lambda_in(j, s);
        const CellMask lvl = superlevel(vals, thr, true);
        CellMask m = superlevel(rectangle_maximal(lvl, n1, n2), 1.0 / twol, true);
        return mm_cache.emplace(key, std::move(m)).first->second;
    };

    double theta_rest = 1.0;
    std::vector<double> theta(static_cast<std::size_t>(l));
    for (int j = 0; j < l; ++j) {
        theta[static_cast<std::size_t>(j)] = 1.0 / (twol * p[static_cast<std::size_t>(j)]);
        theta_rest -= theta[static_cast<std::size_t>(j)];
    }

    for (std::size_t ci = 0; ci < cert.classes.size(); ++ci) {
        const RectangleClass& cls = cert.classes[ci];
        CellMask u(n1 * n2, 0);
        for (std::size_t r : cls.members) paint_span(u, spans[r], n1, n2);

        std::size_t outside = 0;
        for (int j = 0; j <= l; ++j) {
            const CellMask& sup_mask = mm_superlevel(j, cls.levels[static_cast<std::size_t>(j)]);
            for (std::size_t idx = 0; idx < u.size(); ++idx)
                if (u[idx] && !sup_mask[idx]) ++outside;
        }
        push_check(cert, "class-subset-c" + std::to_string(ci), static_cast<double>(outside), 0.0,
                   outside == 0);

        const int s_last = cls.levels[static_cast<std::size_t>(l)];
        const double alpha = (s_last >= 0) ? opt.alpha_near : opt.alpha_far;
        double star = std::exp2(static_cast<double>(s_last) * alpha * theta_rest);
        for (int j = 0; j < l; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            const double bound =
                opt.star_constant * std::exp2(static_cast<double>(cls.levels[uj]) * p[uj]);
            push_check(cert, "class-bound-c" + std::to_string(ci) + "-s" + std::to_string(j),
                       cls.measure, bound, cls.measure <= bound);
            star *= std::exp2(static_cast<double>(cls.levels[uj]) * p[uj] * theta[uj]);
        }
        const double bound_out =
            opt.star_constant * std::exp2(static_cast<double>(s_last) * alpha);
        push_check(cert, "class-bound-c" + std::to_string(ci) + "-out", cls.measure, bound_out,
                   cls.measure <= bound_out);
        push_check(cert, "class-star-c" + std::to_string(ci), cls.measure,
                   opt.star_constant * star, cls.measure <= opt.star_constant * star);
    }

    return cert;
}

std::string certificate_json(const DecompositionCertificate& cert, int indent) {
    using nlohmann::json;
    auto cells = [](const CellMask& m) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i]) idx.push_back(i);
        return idx;
    };
    json j;
    j["tail_index"] = cert.tail_index;
    j["threshold_c"] = cert.threshold_c;
    j["base_level"] = cert.base_level;
    j["measures"] = {{"e", cert.measure_e},
                     {"omega", cert.measure_omega},
                     {"e_prime", cert.measure_e_prime}};
    j["sets"] = {{"omega_base", cells(cert.omega_base)},
                 {"omega_tilde", cells(cert.omega_tilde)},
                 {"omega_tilde2", cells(cert.omega_tilde2)},
                 {"omega", cells(cert.omega)},
                 {"e_prime", cells(cert.e_prime)}};
    json rects = json::array();
    for (std::size_t r = 0; r < cert.rect_levels.size(); ++r)
        rects.push_back({{"levels", cert.rect_levels[r]},
                         {"part_two", static_cast<bool>(cert.part_two[r])}});
    j["rectangles"] = std::move(rects);
    json classes = json::array();
    for (const auto& cls : cert.classes)
        classes.push_back(
            {{"levels", cls.levels}, {"members", cls.members}, {"measure", cls.measure}});
    j["classes"] = std::move(classes);
    json checks = json::array();
    for (const auto& c : cert.checks)
        checks.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pass", c.pass}});
    j["checks"] = std::move(checks);
    j["all_pass"] = cert.all_pass;
    return j.dump(indent);
}

// ------------------------------------------------------------- paraproducts

double paraproduct_form(const std::vector<ModelSlot>& slots, MotherKind mother,
                        const std::vector<GridFunction2D>& f, int K, Exec exec) {
    validate_slots(slots);
    if (f.size() != slots.size())
        throw ConfigError("paraproduct_form: expected one input per slot");
    if (K < 0) throw ConfigError("paraproduct_form: scale cut must be non-negative");
    check_common_grid(f);
    const GridFunction2D& like = f[0];
    const std::size_t n1 = like.size1(), n2 = like.size2();
    const double l1 = like.period1(), l2 = like.period2();
    const std::size_t ns = slots.size();

    const auto prof = make_family(mother, BumpType::phi, 0).profile;
    std::vector<std::vector<cplx>> spectra(ns);
    for (std::size_t j = 0; j < ns; ++j) spectra[j] = f[j].spectrum();

    auto freq = [](std::size_t i, std::size_t n, double period) {
        const auto half = static_cast<std::int64_t>(n / 2);
        auto m = static_cast<std::int64_t>(i);
        if (m >= half) m -= static_cast<std::int64_t>(n);
        return static_cast<double>(m) / period;
    };

    const int width = 2 * K + 1;
    const std::size_t pairs = static_cast<std::size_t>(width) * static_cast<std::size_t>(width);
    std::vector<cplx> pair_term(pairs, cplx(0.0));
    const auto ipairs = static_cast<std::int64_t>(pairs);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t pr = 0; pr < ipairs; ++pr) {
        const int k1 = static_cast<int>(pr / width) - K;
        const int k2 = static_cast<int>(pr % width) - K;
        std::vector<cplx> prod(n1 * n2, cplx(1.0));
        std::vector<cplx> hat(n1 * n2);
        for (std::size_t j = 0; j < ns; ++j) {
            const BumpFamily fx{prof, slots[j].type1, 0};
            const BumpFamily fy{prof, slots[j].type2, 0};
            for (std::size_t i = 0; i < n1; ++i) {
                const double hx = fx.kernel_hat(k1, freq(i, n1, l1));
                for (std::size_t jj = 0; jj < n2; ++jj)
                    hat[i * n2 + jj] =
                        spectra[j][i * n2 + jj] * (hx * fy.kernel_hat(k2, freq(jj, n2, l2)));
            }
            const GridFunction2D conv = GridFunction2D::from_spectrum(hat, n1, n2, l1, l2);
            for (std::size_t idx = 0; idx < prod.size(); ++idx)
                prod[idx] *= conv.samples()[idx];
        }
        cplx acc(0.0);
        for (const cplx& v : prod) acc += v;
        pair_term[static_cast<std::size_t>(pr)] = acc;
    }
    cplx total(0.0);
    for (const cplx& t : pair_term) total += t;  // fixed order, independent of exec
    return total.real() * like.spacing1() * like.spacing2();
}

}  // namespace comlab
