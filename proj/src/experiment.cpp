#include "comlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "comlab/bumps.hpp"
#include "comlab/commutator.hpp"
#include "comlab/dyadic.hpp"
#include "comlab/errors.hpp"
#include "comlab/model.hpp"
#include "comlab/rng.hpp"
#include "comlab/shifted.hpp"
#include "comlab/symbols.hpp"

namespace comlab {

namespace {

constexpr double kPi = std::numbers::pi;

// ----------------------------------------------------------------- plumbing

const std::vector<std::string> kIds = {
    "lp-check",    "symbol",          "commutator-agree", "tensor-check", "maximal-norm",
    "fefferman-stein", "cz-decompose", "model-op",        "stopping-time", "norm-vs-d",
};

const std::map<std::string, std::vector<std::string>> kColumns = {
    {"lp-check", {"mother", "k_window", "residual", "psi_integral", "trial", "contraction_ratio"}},
    {"symbol", {"d", "trial", "xi", "exact", "mc_mean", "mc_stderr", "z_score"}},
    {"commutator-agree", {"n_params", "d", "grid", "rel_l2", "kappa_re", "kappa_im"}},
    {"tensor-check", {"grid", "d", "trial", "residual_time", "residual_freq"}},
    {"maximal-norm", {"n", "grid", "p", "trials", "norm_estimate", "log_weight", "ratio"}},
    {"fefferman-stein", {"n", "grid", "p", "vector_len", "ratio", "normalized"}},
    {"cz-decompose",
     {"trial", "n", "alpha", "selected_count", "omega_measure", "omega_tilde_measure",
      "invariants_pass"}},
    {"model-op", {"n", "grid", "form", "log4_weight", "ratio"}},
    {"stopping-time",
     {"trial", "l", "k1", "k2", "threshold_c", "omega_measure", "e_prime_measure",
      "class_count", "part_two_count", "check_count", "cert_pass"}},
    {"norm-vs-d", {"d", "grid", "trials", "chat"}},
};

std::string id_list() {
    std::string s;
    for (const auto& id : kIds) {
        if (!s.empty()) s += ", ";
        s += id;
    }
    return s;
}

// Run `count` independent tasks, optionally across threads; the first
// exception (if any) is rethrown after the loop so errors are not lost.
template <typename Fn>
void parallel_tasks(std::size_t count, bool par, const Fn& fn) {
    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic) if (par)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
}

// ------------------------------------------------------- seeded test inputs

GridFunction1D band_limited(std::size_t n, double period, int band, std::uint64_t seed,
                            double decay = 0.5) {
    Rng rng(seed);
    std::vector<cplx> hat(n, cplx(0.0));
    for (int m = 1; m <= band; ++m) {
        const double amp = std::exp(-decay * m) * rng.normal();
        const double phase = 2.0 * kPi * rng.uniform();
        const cplx c = amp * cplx(std::cos(phase), std::sin(phase));
        hat[static_cast<std::size_t>(m)] = c;
        hat[n - static_cast<std::size_t>(m)] = std::conj(c);
    }
    GridFunction1D f = GridFunction1D::from_spectrum(hat, period);
    for (auto& z : f.samples()) z = cplx(z.real(), 0.0);
    return f;
}

GridFunction2D band_limited2(std::size_t n, double l1, double l2, int band, std::uint64_t seed,
                             double decay = 0.5, bool no_axis_modes = false) {
    Rng rng(seed);
    std::vector<cplx> hat(n * n, cplx(0.0));
    auto put = [&](std::int64_t m1, std::int64_t m2, cplx c) {
        const auto i = static_cast<std::size_t>(
            (m1 + static_cast<std::int64_t>(n)) % static_cast<std::int64_t>(n));
        const auto j = static_cast<std::size_t>(
            (m2 + static_cast<std::int64_t>(n)) % static_cast<std::int64_t>(n));
        hat[i * n + j] += c;
    };
    for (int m1 = -band; m1 <= band; ++m1)
        for (int m2 = 1; m2 <= band; ++m2) {
            if (no_axis_modes && m1 == 0) continue;
            const double amp = std::exp(-decay * (std::abs(m1) + m2)) * rng.normal();
            const double phase = 2.0 * kPi * rng.uniform();
            const cplx c = 0.5 * amp * cplx(std::cos(phase), std::sin(phase));
            put(m1, m2, c);
            put(-m1, -m2, std::conj(c));
        }
    if (!no_axis_modes)
        for (int m1 = 1; m1 <= band; ++m1) {
            const double amp = std::exp(-decay * m1) * rng.normal();
            const double phase = 2.0 * kPi * rng.uniform();
            const cplx c = 0.5 * amp * cplx(std::cos(phase), std::sin(phase));
            put(m1, 0, c);
            put(-m1, 0, std::conj(c));
        }
    GridFunction2D f = GridFunction2D::from_spectrum(hat, n, n, l1, l2);
    for (auto& z : f.samples()) z = cplx(z.real(), 0.0);
    return f;
}

double rel_l2(const GridFunction1D& a, const GridFunction1D& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

double rel_l2(const GridFunction2D& a, const GridFunction2D& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.samples().size(); ++i) {
        num += std::norm(a.samples()[i] - b.samples()[i]);
        den += std::norm(b.samples()[i]);
    }
    return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

GridFunction1D scaled_by(const GridFunction1D& f, cplx z) {
    GridFunction1D out = f;
    for (auto& v : out.samples()) v *= z;
    return out;
}

GridFunction2D scaled_by(const GridFunction2D& f, cplx z) {
    GridFunction2D out = f;
    for (auto& v : out.samples()) v *= z;
    return out;
}

// --------------------------------------------------------------- lp-check

double psi_integral_quad(const BumpProfile& prof) {
    const double r = prof.support_radius();
    const int n = 1 << 15;
    const double h = 2.0 * r / static_cast<double>(n);
    double acc = 0.5 * (prof.psi(-r) + prof.psi(r));
    for (int i = 1; i < n; ++i) acc += prof.psi(-r + h * static_cast<double>(i));
    return acc * h;
}

ResultTable run_lp_check(const ExperimentConfig& cfg, RunManifest& man) {
    const std::array<int, 4> ks = {5, 10, 15, 20};
    std::vector<double> freqs;
    for (int i = 0; i < 500; ++i) {
        const double mag = std::exp2(-5.0 + 10.0 * static_cast<double>(i) / 499.0);
        freqs.push_back(mag);
        freqs.push_back(-mag);
    }
    const std::size_t n = cfg.grids.front();
    const int band = static_cast<int>(std::min<std::size_t>(16, n / 4));

    const MotherKind mothers[2] = {MotherKind::gaussian, MotherKind::compact_frequency};
    std::array<double, 2> psi_int{};
    std::array<std::array<double, 4>, 2> residual{};
    std::vector<double> contraction(2 * static_cast<std::size_t>(cfg.trials), 0.0);

    const bool par = cfg.exec == Exec::parallel;
    parallel_tasks(2 * ks.size(), par, [&](std::size_t t) {
        const std::size_t mi = t / ks.size();
        const std::size_t kidx = t % ks.size();
        const auto pair = make_mother_pair(mothers[mi]);
        residual[mi][kidx] = lp_partition_residual(*pair.profile, ks[kidx], freqs);
        if (kidx == 0) psi_int[mi] = psi_integral_quad(*pair.profile);
    });
    parallel_tasks(contraction.size(), par, [&](std::size_t t) {
        const std::size_t mi = t / static_cast<std::size_t>(cfg.trials);
        const std::size_t trial = t % static_cast<std::size_t>(cfg.trials);
        const auto pair = make_mother_pair(mothers[mi]);
        const BumpFamily phi = pair.phi_family();
        const GridFunction1D f =
            band_limited(n, 1.0, band, derive_seed(cfg.seed, 100 + t), 0.35);
        const double fsup = f.norm_p(std::numeric_limits<double>::infinity());
        double worst = 0.0;
        for (int k = -3; k <= 3; ++k) {
            auto hat = f.spectrum();
            for (std::size_t i = 0; i < n; ++i) {
                const auto m = static_cast<double>(
                    i < n / 2 ? static_cast<std::int64_t>(i)
                              : static_cast<std::int64_t>(i) - static_cast<std::int64_t>(n));
                hat[i] *= phi.kernel_hat(k, m / f.period());
            }
            const GridFunction1D conv = GridFunction1D::from_spectrum(hat, f.period());
            worst = std::max(worst, conv.norm_p(std::numeric_limits<double>::infinity()) / fsup);
        }
        contraction[t] = worst;
        (void)trial;
    });

    ResultTable table;
    table.columns = kColumns.at("lp-check");
    bool pass = true;
    for (std::size_t mi = 0; mi < 2; ++mi) {
        // The gaussian mother has closed-form space values, so its quadrature
        // integral certifies mean zero at 1e-10.  The compact-frequency
        // mother's space samples carry ~1e-6 quadrature error; there the
        // mean-zero property is exact on the frequency side instead.
        const double int_tol = mi == 0 ? 1e-10 : 1e-6;
        if (make_mother_pair(mothers[mi]).profile->psi_hat(0.0) != 0.0) pass = false;
        for (std::size_t kidx = 0; kidx < ks.size(); ++kidx)
            for (int trial = 0; trial < cfg.trials; ++trial) {
                const double c =
                    contraction[mi * static_cast<std::size_t>(cfg.trials) +
                                static_cast<std::size_t>(trial)];
                table.rows.push_back({static_cast<double>(mi), static_cast<double>(ks[kidx]),
                                      residual[mi][kidx], psi_int[mi],
                                      static_cast<double>(trial), c});
                if (ks[kidx] == 20 && residual[mi][kidx] > 1e-6) pass = false;
                if (std::abs(psi_int[mi]) > int_tol) pass = false;
                if (c > 1.0 + 1e-12) pass = false;
            }
    }
    man.calibration["lp_residual_k20_max"] = std::max(residual[0][3], residual[1][3]);
    man.all_pass = pass;
    return table;
}

// ----------------------------------------------------------------- symbol

ResultTable run_symbol(const ExperimentConfig& cfg, RunManifest& man) {
    const std::int64_t samples = 1 << 16;
    struct Row {
        std::vector<double> v;
    };
    const std::size_t tuples =
        cfg.degrees.size() * static_cast<std::size_t>(cfg.trials);
    std::vector<std::vector<double>> rows(tuples);
    parallel_tasks(tuples, cfg.exec == Exec::parallel, [&](std::size_t t) {
        const int d = cfg.degrees[t / static_cast<std::size_t>(cfg.trials)];
        const auto trial = static_cast<int>(t % static_cast<std::size_t>(cfg.trials));
        Rng rng(derive_seed(cfg.seed, 5000 + t));
        auto draw = [&] {
            double v = rng.uniform(-2.0, 2.0);
            if (std::abs(v) < 1e-3) v += v >= 0.0 ? 0.5 : -0.5;
            return v;
        };
        const double xi = draw();
        std::vector<double> parts;
        for (int i = 0; i < d; ++i) parts.push_back(draw());
        const double exact = m1d_exact(xi, parts);
        const McEstimate mc =
            m1d_mc(xi, parts, samples, derive_seed(cfg.seed, 6000 + t), Exec::serial);
        // Floor the normalisation at rounding scale: on the flat regions the
        // estimator is exact (stderr 0) while the piecewise path carries a few
        // ulps, and that discrepancy is not a sampling failure.
        const double denom = std::max(mc.stderr_, 8.0 * std::numeric_limits<double>::epsilon());
        const double z = std::abs(exact - mc.mean) / denom;
        rows[t] = {static_cast<double>(d), static_cast<double>(trial), xi,
                   exact,                  mc.mean,                    mc.stderr_, z};
    });
    ResultTable table;
    table.columns = kColumns.at("symbol");
    bool pass = true;
    for (auto& r : rows) {
        if (std::abs(r[3]) > 1.0 + 1e-15) pass = false;
        if (!(r[6] <= 5.0)) pass = false;
        table.rows.push_back(std::move(r));
    }
    man.calibration["mc_samples"] = static_cast<double>(samples);
    man.all_pass = pass;
    return table;
}

// ------------------------------------------------------- commutator-agree

ResultTable run_commutator_agree(const ExperimentConfig& cfg, RunManifest& man) {
    struct Tuple {
        int n, d;
    };
    std::vector<Tuple> tuples;
    for (int n : {1, 2})
        for (int d : cfg.degrees) tuples.push_back({n, d});
    std::vector<std::vector<std::vector<double>>> out(tuples.size());
    std::vector<bool> tuple_pass(tuples.size(), true);
    std::vector<std::pair<std::string, double>> calib(2 * tuples.size());

    parallel_tasks(tuples.size(), cfg.exec == Exec::parallel, [&](std::size_t t) {
        const auto [np, d] = tuples[t];
        CommutatorSpec spec;
        spec.n = np;
        spec.d = d;
        spec.a = std::vector<double>(static_cast<std::size_t>(np), 1.0);
        cplx kappa(0.0);
        double prev = std::numeric_limits<double>::infinity();
        bool pass = true;
        for (std::size_t gi = 0; gi < cfg.grids.size(); ++gi) {
            const std::size_t n = cfg.grids[gi];
            double rel = 0.0;
            if (np == 1) {
                const GridFunction1D f = band_limited(n, 1.0, 6, derive_seed(cfg.seed, 11), 0.45);
                const GridFunction1D a = band_limited(n, 1.0, 5, derive_seed(cfg.seed, 22), 0.45);
                const GridFunction1D A = antiderivative(a);
                const GridFunction1D T = commutator_time(f, A, spec, default_pv(f));
                const GridFunction1D F = commutator_freq(f, a, spec, cfg.cost_ceiling);
                if (gi == 0) kappa = complex_ratio_fit(T, F);
                rel = rel_l2(T, scaled_by(F, kappa));
            } else {
                const GridFunction2D f =
                    band_limited2(n, 1.0, 1.0, 3, derive_seed(cfg.seed, 33), 0.5);
                const GridFunction2D a =
                    band_limited2(n, 1.0, 1.0, 2, derive_seed(cfg.seed, 44), 0.5, true);
                const GridFunction2D A = antiderivative_mixed(a);
                const GridFunction2D T = commutator_time(f, A, spec, default_pv(f));
                const GridFunction2D F = commutator_freq(f, a, spec, cfg.cost_ceiling);
                if (gi == 0) kappa = complex_ratio_fit(T, F);
                rel = rel_l2(T, scaled_by(F, kappa));
            }
            out[t].push_back({static_cast<double>(np), static_cast<double>(d),
                              static_cast<double>(n), rel, kappa.real(), kappa.imag()});
            if (rel > 5e-2) pass = false;
            if (gi > 0 && !(rel < prev)) pass = false;
            prev = rel;
        }
        const std::string base =
            "kappa_n" + std::to_string(np) + "_d" + std::to_string(d);
        calib[2 * t] = {base + "_re", kappa.real()};
        calib[2 * t + 1] = {base + "_im", kappa.imag()};
        tuple_pass[t] = pass;
    });

    ResultTable table;
    table.columns = kColumns.at("commutator-agree");
    bool pass = true;
    for (std::size_t t = 0; t < tuples.size(); ++t) {
        pass = pass && tuple_pass[t];
        for (auto& r : out[t]) table.rows.push_back(std::move(r));
    }
    for (const auto& [k, v] : calib) man.calibration[k] = v;
    man.all_pass = pass;
    return table;
}

// ----------------------------------------------------------- tensor-check

ResultTable run_tensor_check(const ExperimentConfig& cfg, RunManifest& man) {
    struct Tuple {
        std::size_t n;
        int d, trial;
    };
    std::vector<Tuple> tuples;
    for (std::size_t n : cfg.grids)
        for (int d : cfg.degrees)
            for (int trial = 0; trial < cfg.trials; ++trial) tuples.push_back({n, d, trial});
    std::vector<std::vector<double>> rows(tuples.size());
    parallel_tasks(tuples.size(), cfg.exec == Exec::parallel, [&](std::size_t t) {
        const auto [n, d, trial] = tuples[t];
        const auto s = static_cast<std::uint64_t>(trial);
        const GridFunction1D f1 = band_limited(n, 1.0, 4, derive_seed(cfg.seed, 41 + 10 * s));
        const GridFunction1D f2 = band_limited(n, 1.0, 3, derive_seed(cfg.seed, 42 + 10 * s));
        const GridFunction1D a1 = band_limited(n, 1.0, 3, derive_seed(cfg.seed, 43 + 10 * s));
        const GridFunction1D a2 = band_limited(n, 1.0, 2, derive_seed(cfg.seed, 44 + 10 * s));
        const GridFunction2D f = GridFunction2D::tensor_product(f1, f2);
        const GridFunction2D a = GridFunction2D::tensor_product(a1, a2);
        const GridFunction2D A = antiderivative_mixed(a);
        CommutatorSpec s2, s1;
        s2.n = 2;
        s2.d = d;
        s2.a = {1.0, 1.0};
        s1.n = 1;
        s1.d = d;
        s1.a = {1.0};
        const GridFunction2D T = commutator_time(f, A, s2, default_pv(f));
        const GridFunction2D TP = GridFunction2D::tensor_product(
            commutator_time(f1, antiderivative(a1), s1, default_pv(f1)),
            commutator_time(f2, antiderivative(a2), s1, default_pv(f2)));
        const double rt = rel_l2(T, TP);
        const GridFunction2D F = commutator_freq(f, a, s2, cfg.cost_ceiling);
        const GridFunction2D FP = GridFunction2D::tensor_product(
            commutator_freq(f1, a1, s1, cfg.cost_ceiling),
            commutator_freq(f2, a2, s1, cfg.cost_ceiling));
        const double rf = rel_l2(F, FP);
        rows[t] = {static_cast<double>(n), static_cast<double>(d), static_cast<double>(trial),
                   rt, rf};
    });
    ResultTable table;
    table.columns = kColumns.at("tensor-check");
    bool pass = true;
    for (auto& r : rows) {
        if (r[3] > 1e-8 || r[4] > 1e-10) pass = false;
        table.rows.push_back(std::move(r));
    }
    man.all_pass = pass;
    return table;
}

// ----------------------------------------------------------- maximal-norm

ResultTable run_maximal_norm(const ExperimentConfig& cfg, RunManifest& man) {
    struct Tuple {
        std::int64_t n;
        std::size_t grid;
        double p;
    };
    std::vector<Tuple> tuples;
    for (std::int64_t n : cfg.shifts)
        for (std::size_t g : cfg.grids)
            for (double p : cfg.exponents) tuples.push_back({n, g, p});
    std::vector<std::vector<double>> rows(tuples.size());
    parallel_tasks(tuples.size(), cfg.exec == Exec::parallel, [&](std::size_t t) {
        const auto [n, g, p] = tuples[t];
        const double est = estimate_opnorm(
            [n](const GridFunction1D& f) { return shifted_maximal(f, n); }, g, 1.0, p,
            cfg.trials, derive_seed(cfg.seed, 700 + t), Exec::serial);
        const double lw = std::log(shift_weight(n));
        rows[t] = {static_cast<double>(n), static_cast<double>(g), p,
                   static_cast<double>(cfg.trials), est, lw, est / lw};
    });
    ResultTable table;
    table.columns = kColumns.at("maximal-norm");
    bool pass = true;
    bool all_large = true;
    for (const auto& n : cfg.shifts) all_large = all_large && std::llabs(n) >= 4;
    std::map<std::pair<std::size_t, double>, std::pair<double, double>> extremes;
    for (auto& r : rows) {
        if (!(std::isfinite(r[4]) && r[4] > 0.0)) pass = false;
        auto& e = extremes
                      .try_emplace({static_cast<std::size_t>(r[1]), r[2]},
                                   std::numeric_limits<double>::infinity(), 0.0)
                      .first->second;
        e.first = std::min(e.first, r[6]);
        e.second = std::max(e.second, r[6]);
        table.rows.push_back(std::move(r));
    }
    // The log-growth envelope is meaningful once the shift dominates the
    // weight offset; small |n| rows are reported but not gated.
    if (all_large && cfg.shifts.size() >= 2)
        for (const auto& [key, e] : extremes)
            if (!(e.second <= 3.0 * e.first)) pass = false;
    man.all_pass = pass;
    return table;
}

// -------------------------------------------------------- fefferman-stein

// Frozen calibration for ratio / log^2<n>: the maximum over the canonical
// run (seed 1, grid 256, shifts {4,16,64,256,1024}) per exponent.  The gate
// allows +10% over these values.
double fs_frozen_constant(double p) {
    if (p == 1.5) return 0.531;
    if (p == 2.0) return 0.511;
    if (p == 4.0) return 0.453;
    return 0.531;  // fallback: the widest calibrated envelope
}

std::vector<GridFunction1D> fs_inputs(std::size_t n, std::uint64_t seed) {
    std::vector<GridFunction1D> fs;
    for (std::uint64_t k = 0; k < 4; ++k) {
        GridFunction1D f = band_limited(n, 1.0, 16 + 2 * static_cast<int>(k),
                                        derive_seed(seed, 300 + k), 0.3);
        Rng rng(derive_seed(seed, 400 + k));
        for (int s = 0; s < 4; ++s)
            f[static_cast<std::size_t>(rng.below(n))] += rng.uniform(0.5, 3.0);
        fs.push_back(std::move(f));
    }
    return fs;
}

ResultTable run_fefferman_stein(const ExperimentConfig& cfg, RunManifest& man) {
    struct Tuple {
        std::int64_t n;
        std::size_t grid;
        double p;
    };
    std::vector<Tuple> tuples;
    for (std::int64_t n : cfg.shifts)
        for (std::size_t g : cfg.grids)
            for (double p : cfg.exponents) tuples.push_back({n, g, p});
    std::vector<std::vector<double>> rows(tuples.size());
    parallel_tasks(tuples.size(), cfg.exec == Exec::parallel, [&](std::size_t t) {
        const auto [n, g, p] = tuples[t];
        const auto fs = fs_inputs(g, cfg.seed);
        const double ratio = fefferman_stein_ratio(fs, n, p, -1, Exec::serial);
        const double lw = std::log(shift_weight(n));
        rows[t] = {static_cast<double>(n), static_cast<double>(g), p, 4.0, ratio,
                   ratio / (lw * lw)};
    });
    ResultTable table;
    table.columns = kColumns.at("fefferman-stein");
    bool pass = true;
    for (auto& r : rows) {
        if (!(std::isfinite(r[4]) && r[4] > 0.0)) pass = false;
        if (std::llabs(static_cast<std::int64_t>(r[0])) >= 4 &&
            !(r[5] <= 1.1 * fs_frozen_constant(r[2])))
            pass = false;
        table.rows.push_back(std::move(r));
    }
    for (double p : cfg.exponents)
        man.calibration["fs_envelope_p" + format_number(p)] = fs_frozen_constant(p);
    man.all_pass = pass;
    return table;
}

// ----------------------------------------------------------- cz-decompose

double next_sixteenth_above(double x) {
    return std::ldexp(std::floor(std::ldexp(x, 4)) + 1.0, -4);
}

// Exact structural verification of a decomposition of integer-valued data;
// every comparison below is between exactly representable quantities.
bool cz_invariants_exact(const std::vector<GridFunction1D>& fs, const CZDecomposition& d) {
    const std::size_t n = fs[0].size();
    const int top = static_cast<int>(std::bit_width(n)) - 1;
    const double alpha = d.alpha;
    const int log_n = (d.n == 0)
                          ? -1
                          : static_cast<int>(std::bit_width(
                                static_cast<std::uint64_t>(std::llabs(d.n)))) -
                                1;
    if (d.selected.size() != d.selected_spans.size()) return false;

    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (const auto& s : d.selected_spans) {
        if (s.cells <= 0 || s.start_cell < 0 || s.start_cell % s.cells != 0) return false;
        spans.emplace_back(s.start_cell, s.start_cell + s.cells);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i)
        if (spans[i - 1].second > spans[i].first) return false;

    const DyadicSums sums = DyadicSums::build(d.big_f);
    for (const auto& s : d.selected_spans) {
        const int m = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(s.cells))) - 1;
        const auto b = static_cast<std::size_t>(s.start_cell >> m);
        if (!(sums.block_avg(m, b) > alpha && sums.block_avg(m, b) <= 2.0 * alpha))
            return false;
        if (m < top && !(sums.block_avg(m + 1, b >> 1) <= alpha)) return false;
    }

    std::size_t om = 0, omt = 0;
    for (std::size_t i = 0; i < n; ++i) {
        om += d.omega_mask[i];
        omt += d.omega_tilde_mask[i];
        if (d.omega_mask[i] && !d.omega_tilde_mask[i]) return false;
        if (!d.omega_mask[i] && !(d.big_f[i].real() <= alpha)) return false;
    }
    const double h = fs[0].period() / static_cast<double>(n);
    if (d.omega_measure != h * static_cast<double>(om)) return false;
    if (d.omega_tilde_measure != h * static_cast<double>(omt)) return false;
    if (d.n != 0 && !d.selected.empty() &&
        omt > 3 * static_cast<std::size_t>(2 + log_n) * om)
        return false;

    for (std::size_t k = 0; k < fs.size(); ++k)
        for (std::size_t i = 0; i < n; ++i) {
            const cplx want_p = d.omega_mask[i] ? cplx(0.0) : fs[k][i];
            const cplx want_s = d.omega_mask[i] ? fs[k][i] : cplx(0.0);
            if (d.f_prime[k][i] != want_p || d.f_second[k][i] != want_s) return false;
        }

    for (std::size_t k = 0; k < fs.size(); ++k) {
        const DyadicSums sk = DyadicSums::build(fs[k]);
        std::vector<std::uint8_t> covered(n, 0);
        for (const auto& s : d.selected_spans) {
            const int m =
                static_cast<int>(std::bit_width(static_cast<std::uint64_t>(s.cells))) - 1;
            const double v = sk.block_avg(m, static_cast<std::size_t>(s.start_cell >> m));
            for (std::int64_t q = 0; q < s.cells; ++q) {
                if (d.g[k][static_cast<std::size_t>(s.start_cell + q)].real() != v)
                    return false;
                covered[static_cast<std::size_t>(s.start_cell + q)] = 1;
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!covered[i] && d.g[k][i] != cplx(0.0)) return false;
    }
    for (const auto& s : d.selected_spans) {
        const int m = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(s.cells))) - 1;
        double sq = 0.0;
        for (std::size_t k = 0; k < fs.size(); ++k) {
            const DyadicSums sk = DyadicSums::build(fs[k]);
            const double v = sk.block_avg(m, static_cast<std::size_t>(s.start_cell >> m));
            sq += v * v;
        }
        if (!(sq <= 4.0 * alpha * alpha)) return false;
    }

    long double mass = 0.0L;
    for (std::size_t i = 0; i < n; ++i) mass += std::abs(d.big_f[i]);
    if (!(static_cast<double>(static_cast<long double>(alpha) * om) <=
          static_cast<double>(mass)))
        return false;

    for (std::size_t i = 0; i < n; ++i) {
        if (d.omega_tilde_mask[i]) continue;
        for (int m = 0; m <= top; ++m) {
            const std::size_t blocks = n >> m;
            const std::int64_t b =
                ((static_cast<std::int64_t>(i >> m) + d.n) %
                     static_cast<std::int64_t>(blocks) +
                 static_cast<std::int64_t>(blocks)) %
                static_cast<std::int64_t>(blocks);
            const std::int64_t lo = b << m, hi = lo + (std::int64_t{1} << m);
            for (const auto& s : d.selected_spans) {
                const std::int64_t slo = s.start_cell, shi = s.start_cell + s.cells;
                if (slo < hi && lo < shi && !(lo <= slo && shi <= hi)) return false;
            }
        }
    }

    for (std::size_t k = 0; k < fs.size(); ++k) {
        const GridFunction1D mf = shifted_maximal(d.f_second[k], d.n);
        const GridFunction1D mg = shifted_maximal(d.g[k], d.n);
        for (std::size_t i = 0; i < n; ++i)
            if (!d.omega_tilde_mask[i] && !(mf[i].real() <= mg[i].real())) return false;
    }
    return true;
}

ResultTable run_cz_decompose(const ExperimentConfig& cfg, RunManifest& man) {
    const std::size_t n = cfg.grids.front();
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(cfg.trials));
    parallel_tasks(rows.size(), cfg.exec == Exec::parallel, [&](std::size_t trial) {
        Rng rng(derive_seed(cfg.seed, 9100 + trial));
        GridFunction1D f(n, 1.0);
        for (int blockc = 0; blockc < 6; ++blockc) {
            const int m = static_cast<int>(rng.below(5));
            const auto b = static_cast<std::size_t>(rng.below(n >> m));
            const double val = 1.0 + static_cast<double>(rng.below(8));
            for (std::size_t q = 0; q < (std::size_t{1} << m); ++q) f[(b << m) + q] += val;
        }
        for (int spikes = 0; spikes < 3; ++spikes)
            f[static_cast<std::size_t>(rng.below(n))] += static_cast<double>(1 + rng.below(40));
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += std::abs(f[i]);
        mean /= static_cast<double>(n);
        const double alpha = std::max(next_sixteenth_above(mean), 2.5);
        const std::int64_t sh = cfg.shifts[trial % cfg.shifts.size()];
        const CZDecomposition d = cz_decompose({f}, sh, alpha);
        const bool ok = cz_invariants_exact({f}, d);
        rows[trial] = {static_cast<double>(trial), static_cast<double>(sh), alpha,
                       static_cast<double>(d.selected.size()), d.omega_measure,
                       d.omega_tilde_measure, ok ? 1.0 : 0.0};
    });
    ResultTable table;
    table.columns = kColumns.at("cz-decompose");
    bool pass = true;
    for (auto& r : rows) {
        if (r[6] != 1.0) pass = false;
        table.rows.push_back(std::move(r));
    }
    man.all_pass = pass;
    return table;
}

// --------------------------------------------------------------- model-op

std::vector<DyadicRectangle> model_rectangles(int count, double period, int max_scale,
                                              std::uint64_t seed) {
    Rng rng(seed);
    std::vector<DyadicRectangle> out;
    for (int r = 0; r < count; ++r) {
        const int sx = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_scale)));
        const int sy = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_scale)));
        out.push_back({DyadicInterval{sx, static_cast<std::int64_t>(
                                              rng.uniform() * period * std::ldexp(1.0, sx))},
                       DyadicInterval{sy, static_cast<std::int64_t>(
                                              rng.uniform() * period * std::ldexp(1.0, sy))}});
    }
    return out;
}

ResultTable run_model_op(const ExperimentConfig& cfg, RunManifest& man) {
    const std::size_t n = cfg.grids.front();
    const double period = 2.0;
    const auto rects = model_rectangles(40, period, 4, derive_seed(cfg.seed, 321));
    const std::vector<GridFunction2D> f = {
        band_limited2(n, period, period, 5, derive_seed(cfg.seed, 51)),
        band_limited2(n, period, period, 4, derive_seed(cfg.seed, 52))};
    const GridFunction2D g = band_limited2(n, period, period, 5, derive_seed(cfg.seed, 53));

    std::vector<std::vector<double>> rows(cfg.shifts.size());
    parallel_tasks(rows.size(), cfg.exec == Exec::parallel, [&](std::size_t t) {
        const std::int64_t sh = cfg.shifts[t];
        RectangleSystem sys;
        sys.rectangles = rects;
        sys.slots = {ModelSlot{BumpType::psi, BumpType::psi, {sh, 0}},
                     ModelSlot{BumpType::phi, BumpType::psi, {0, sh}},
                     ModelSlot{BumpType::psi, BumpType::phi, {0, 0}}};
        const double form = model_form(sys, f, g, Exec::serial);
        const double lw = std::log(shift_weight(sh));
        const double lw4 = lw * lw * lw * lw;
        rows[t] = {static_cast<double>(sh), static_cast<double>(n), form, lw4, form / lw4};
    });
    ResultTable table;
    table.columns = kColumns.at("model-op");
    bool pass = true;
    for (auto& r : rows) {
        if (!(std::isfinite(r[4]) && r[4] <= 8.0)) pass = false;
        table.rows.push_back(std::move(r));
    }
    man.calibration["model_growth_envelope"] = 8.0;
    man.all_pass = pass;
    return table;
}

// ----------------------------------------------------------- stopping-time

GridFunction2D spiky_lp_input(std::size_t n, double period, int band, std::uint64_t seed,
                              double p, double cx, double cy) {
    GridFunction2D g = band_limited2(n, period, period, band, seed, 0.4);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = (g.x1(i) - cx) / 0.045, dy = (g.x2(j) - cy) / 0.045;
            g(i, j) += 60.0 * std::exp(-0.5 * (dx * dx + dy * dy));
        }
    const double nrm = g.norm_p(p);
    for (auto& v : g.samples()) v /= nrm;
    return g;
}

ResultTable run_stopping_time(const ExperimentConfig& cfg, RunManifest& man) {
    const std::size_t n = cfg.grids.front();
    const int max_scale = static_cast<int>(std::bit_width(n)) - 1 - 2;
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(cfg.trials));
    std::vector<double> cs(rows.size(), 0.0);
    parallel_tasks(rows.size(), cfg.exec == Exec::parallel, [&](std::size_t trial) {
        const int l = 2 + static_cast<int>(trial % 2);
        const std::array<int, 2> tail = (trial / 2) % 2 == 0 ? std::array<int, 2>{0, 0}
                                                             : std::array<int, 2>{1, 1};
        RectangleSystem sys;
        if (l == 2) {
            sys.slots = {ModelSlot{BumpType::psi, BumpType::psi, {3, 0}},
                         ModelSlot{BumpType::phi, BumpType::psi, {0, -2}},
                         ModelSlot{BumpType::psi, BumpType::phi, {0, 0}}};
        } else {
            sys.slots = {ModelSlot{BumpType::psi, BumpType::psi, {2, 0}},
                         ModelSlot{BumpType::psi, BumpType::phi, {0, 3}},
                         ModelSlot{BumpType::phi, BumpType::psi, {-1, 1}},
                         ModelSlot{BumpType::psi, BumpType::phi, {0, 0}}};
        }
        sys.rectangles =
            model_rectangles(60, 2.0, max_scale, derive_seed(cfg.seed, 8600 + trial));
        std::vector<double> ps = {2.0, 2.5, 3.0};
        ps.resize(static_cast<std::size_t>(l));
        std::vector<GridFunction2D> f;
        for (int j = 0; j < l; ++j)
            f.push_back(spiky_lp_input(n, 2.0, 6,
                                       derive_seed(cfg.seed, 8700 + 10 * trial +
                                                                 static_cast<std::uint64_t>(j)),
                                       ps[static_cast<std::size_t>(j)],
                                       0.4 + 0.2 * static_cast<double>(j), 0.9));
        CellMask e(n * n, 0);
        for (std::size_t i = 0; i < n / 2; ++i)
            for (std::size_t j = 0; j < n / 2; ++j) e[i * n + j] = 1;
        const auto cert = stopping_time_decompose(sys, f, ps, e, tail);
        std::size_t part2 = 0;
        for (auto v : cert.part_two) part2 += v;
        rows[trial] = {static_cast<double>(trial),
                       static_cast<double>(l),
                       static_cast<double>(tail[0]),
                       static_cast<double>(tail[1]),
                       cert.threshold_c,
                       cert.measure_omega,
                       cert.measure_e_prime,
                       static_cast<double>(cert.classes.size()),
                       static_cast<double>(part2),
                       static_cast<double>(cert.checks.size()),
                       cert.all_pass ? 1.0 : 0.0};
        cs[trial] = cert.threshold_c;
    });
    ResultTable table;
    table.columns = kColumns.at("stopping-time");
    bool pass = true;
    for (auto& r : rows) {
        if (r[10] != 1.0) pass = false;
        table.rows.push_back(std::move(r));
    }
    man.calibration["threshold_c_max"] = *std::max_element(cs.begin(), cs.end());
    man.all_pass = pass;
    return table;
}

// -------------------------------------------------------------- norm-vs-d

ResultTable run_norm_vs_d(const ExperimentConfig& cfg, RunManifest& man) {
    struct Tuple {
        int d;
        std::size_t grid;
    };
    std::vector<Tuple> tuples;
    for (int d : cfg.degrees)
        for (std::size_t g : cfg.grids) tuples.push_back({d, g});
    std::vector<std::vector<double>> rows(tuples.size());
    parallel_tasks(tuples.size(), cfg.exec == Exec::parallel, [&](std::size_t t) {
        const auto [d, g] = tuples[t];
        const double chat =
            measure_chat(d, g, 1.0, cfg.trials,
                         derive_seed(cfg.seed, 40 + static_cast<std::uint64_t>(d)),
                         Exec::serial);
        rows[t] = {static_cast<double>(d), static_cast<double>(g),
                   static_cast<double>(cfg.trials), chat};
    });
    ResultTable table;
    table.columns = kColumns.at("norm-vs-d");
    bool pass = true;
    double chat_max = 0.0;
    for (auto& r : rows) {
        if (!(std::isfinite(r[3]) && r[3] > 0.0)) pass = false;
        chat_max = std::max(chat_max, r[3]);
        if (r[0] == 0.0 && r[1] == static_cast<double>(cfg.grids.front()))
            man.calibration["C0"] = r[3];
        table.rows.push_back(std::move(r));
    }
    man.calibration["chat_max"] = chat_max;
    man.all_pass = pass;
    return table;
}

// -------------------------------------------------------------- dispatch

ResultTable dispatch(const ExperimentConfig& cfg, RunManifest& man) {
    const std::string& id = cfg.experiment;
    if (id == "lp-check") return run_lp_check(cfg, man);
    if (id == "symbol") return run_symbol(cfg, man);
    if (id == "commutator-agree") return run_commutator_agree(cfg, man);
    if (id == "tensor-check") return run_tensor_check(cfg, man);
    if (id == "maximal-norm") return run_maximal_norm(cfg, man);
    if (id == "fefferman-stein") return run_fefferman_stein(cfg, man);
    if (id == "cz-decompose") return run_cz_decompose(cfg, man);
    if (id == "model-op") return run_model_op(cfg, man);
    if (id == "stopping-time") return run_stopping_time(cfg, man);
    if (id == "norm-vs-d") return run_norm_vs_d(cfg, man);
    throw UsageError("unknown experiment '" + id + "'; valid ids: " + id_list());
}

std::string exec_name(Exec e) { return e == Exec::serial ? "serial" : "parallel"; }

Exec exec_from_name(const std::string& s) {
    if (s == "serial") return Exec::serial;
    if (s == "parallel") return Exec::parallel;
    throw ConfigError("manifest: unknown exec policy '" + s + "'");
}

}  // namespace

// ------------------------------------------------------------- public API

const std::vector<std::string>& experiment_ids() { return kIds; }

const std::vector<std::string>& experiment_columns(const std::string& id) {
    const auto it = kColumns.find(id);
    if (it == kColumns.end())
        throw UsageError("unknown experiment '" + id + "'; valid ids: " + id_list());
    return it->second;
}

void validate_config(const ExperimentConfig& cfg) {
    experiment_columns(cfg.experiment);  // throws UsageError for unknown ids
    if (cfg.grids.empty()) throw ConfigError("config: grid list is empty");
    // 1D experiments tolerate long grids; the 2D ones hold N^2 samples per
    // function and several functions per tuple, so they cap much lower.
    const bool one_dim =
        cfg.experiment == "maximal-norm" || cfg.experiment == "fefferman-stein";
    const std::size_t cap = one_dim ? (std::size_t{1} << 20) : 4096;
    for (std::size_t g : cfg.grids)
        if (!is_pow2(g) || g < 8 || g > cap)
            throw ConfigError("config: grid sizes must be powers of two in [8, " +
                              std::to_string(cap) + "] for " + cfg.experiment);
    if (cfg.degrees.empty()) throw ConfigError("config: degree list is empty");
    if (cfg.shifts.empty()) throw ConfigError("config: shift list is empty");
    if (cfg.exponents.empty()) throw ConfigError("config: exponent list is empty");
    for (double p : cfg.exponents)
        if (!(p > 1.0) || !std::isfinite(p))
            throw ConfigError("config: exponents must be finite and > 1");
    if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
    if (!(cfg.cost_ceiling > 0.0)) throw ConfigError("config: cost ceiling must be positive");

    const std::string& id = cfg.experiment;
    for (int d : cfg.degrees) {
        if (d < 0) throw ConfigError("config: degrees must be >= 0");
        if ((id == "symbol" || id == "commutator-agree" || id == "tensor-check") &&
            (d < 1 || d > 3))
            throw ConfigError("config: " + id + " supports degrees 1..3");
        if (id == "norm-vs-d" && d > 4)
            throw ConfigError("config: norm-vs-d supports degrees 0..4");
    }
    if (id == "cz-decompose")
        for (std::int64_t n : cfg.shifts)
            if (n == 0) throw ConfigError("config: cz-decompose requires nonzero shifts");
    if ((id == "commutator-agree") && cfg.grids.front() < 16)
        throw ConfigError("config: commutator-agree needs grids >= 16");
    if ((id == "model-op" || id == "stopping-time") && cfg.grids.front() < 32)
        throw ConfigError("config: " + id + " needs grids >= 32");
}

double estimate_cost(const ExperimentConfig& cfg) {
    const std::string& id = cfg.experiment;
    const auto g0 = static_cast<double>(cfg.grids.front());
    const double trials = cfg.trials;
    auto time2d = [](double n) {
        const double nodes = 8.0 * std::log2(8.0 * n);
        return 380.0 * nodes * nodes * n * n;
    };
    auto time1d = [](double n) { return 2000.0 * 8.0 * std::log2(8.0 * n) * n; };
    double ops = 0.0;
    if (id == "lp-check") {
        ops = 1e7 + trials * g0 * 2e3;
    } else if (id == "symbol") {
        for (int d : cfg.degrees) ops += trials * 65536.0 * 8.0 * (d + 1);
    } else if (id == "commutator-agree") {
        for (std::size_t g : cfg.grids) {
            const auto n = static_cast<double>(g);
            ops += static_cast<double>(cfg.degrees.size()) *
                   (time1d(n) + time2d(n) + 2e8 * (n / 32.0) * (n / 32.0));
        }
    } else if (id == "tensor-check") {
        for (std::size_t g : cfg.grids) {
            const auto n = static_cast<double>(g);
            ops += static_cast<double>(cfg.degrees.size()) * trials *
                   (time2d(n) + 2.0 * time1d(n) + 2e8 * (n / 32.0) * (n / 32.0));
        }
    } else if (id == "maximal-norm" || id == "fefferman-stein") {
        for (std::size_t g : cfg.grids)
            ops += static_cast<double>(cfg.shifts.size() * cfg.exponents.size()) *
                   std::max(trials, 4.0) * static_cast<double>(g) * 125.0;
    } else if (id == "cz-decompose") {
        ops = trials * g0 * std::log2(g0) * 3000.0;
    } else if (id == "model-op") {
        ops = static_cast<double>(cfg.shifts.size()) * 5e7 * (g0 / 64.0) * (g0 / 64.0);
    } else if (id == "stopping-time") {
        ops = trials * 1.2e9 * (g0 / 64.0) * (g0 / 64.0);
    } else if (id == "norm-vs-d") {
        for (int d : cfg.degrees)
            for (std::size_t g : cfg.grids)
                ops += trials * (d + 1.0) * 10.0 *
                       time1d(static_cast<double>(g));
    } else {
        throw UsageError("unknown experiment '" + id + "'; valid ids: " + id_list());
    }
    return ops;
}

std::string format_number(double v) {
    if (v == 0.0) return "0";
    std::array<char, 64> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string table_csv(const ResultTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += table.columns[c];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += format_number(row[c]);
        }
        out += '\n';
    }
    return out;
}

ResultTable compute_experiment(const ExperimentConfig& cfg, RunManifest& man) {
    validate_config(cfg);
    man.config = cfg;
    man.artifact_version = kArtifactVersion;
    ResultTable table = dispatch(cfg, man);
    man.columns = table.columns;
    man.row_count = table.rows.size();
    return table;
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const double predicted = estimate_cost(cfg);
    if (predicted > cfg.cost_ceiling)
        throw BudgetError(predicted, cfg.cost_ceiling,
                          "experiment '" + cfg.experiment + "' refused: predicted " +
                              format_number(predicted) + " ops exceed the ceiling " +
                              format_number(cfg.cost_ceiling));

    const auto t0 = std::chrono::steady_clock::now();
    RunManifest man;
    const ResultTable table = compute_experiment(cfg, man);
    man.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    man.csv_file = cfg.experiment + ".csv";
    {
        std::ofstream out(fs::path(cfg.out_dir) / man.csv_file, std::ios::binary);
        out << table_csv(table);
    }

    // Line plots for the experiments with a natural one-dimensional curve.
    std::string svg;
    if (cfg.experiment == "maximal-norm" && table.rows.size() > 1) {
        std::vector<std::pair<double, double>> pts;
        const double g0 = table.rows.front()[1], p0 = table.rows.front()[2];
        for (const auto& r : table.rows)
            if (r[1] == g0 && r[2] == p0)
                pts.emplace_back(shift_weight(static_cast<std::int64_t>(r[0])), r[4]);
        std::sort(pts.begin(), pts.end());
        svg = line_plot_svg("shifted maximal operator norm", "shift weight <n>",
                            "estimated norm", pts, true, true);
    } else if (cfg.experiment == "norm-vs-d" && table.rows.size() > 1) {
        std::vector<std::pair<double, double>> pts;
        const double g0 = table.rows.front()[1];
        for (const auto& r : table.rows)
            if (r[1] == g0) pts.emplace_back(r[0], r[3]);
        std::sort(pts.begin(), pts.end());
        svg = line_plot_svg("per-degree commutator norm", "degree d", "Chat(d)", pts, false,
                            true);
    }
    if (!svg.empty()) {
        const std::string name = cfg.experiment + ".svg";
        std::ofstream out(fs::path(cfg.out_dir) / name, std::ios::binary);
        out << svg;
        man.artifacts.push_back(name);
    }

    {
        std::ofstream out(fs::path(cfg.out_dir) / (cfg.experiment + ".json"),
                          std::ios::binary);
        out << manifest_json(man) << '\n';
    }
    return man;
}

std::string manifest_json(const RunManifest& man) {
    nlohmann::json j;
    j["artifact_version"] = man.artifact_version;
    j["experiment"] = man.config.experiment;
    nlohmann::json c;
    c["grids"] = man.config.grids;
    c["degrees"] = man.config.degrees;
    c["shifts"] = man.config.shifts;
    c["exponents"] = man.config.exponents;
    c["trials"] = man.config.trials;
    c["seed"] = std::to_string(man.config.seed);
    c["out_dir"] = man.config.out_dir;
    c["cost_ceiling"] = man.config.cost_ceiling;
    c["exec"] = exec_name(man.config.exec);
    j["config"] = std::move(c);
    j["columns"] = man.columns;
    j["row_count"] = man.row_count;
    j["wall_seconds"] = man.wall_seconds;
    j["calibration"] = man.calibration;
    j["all_pass"] = man.all_pass;
    j["csv_file"] = man.csv_file;
    j["artifacts"] = man.artifacts;
    return j.dump(2);
}

RunManifest parse_manifest(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: not valid JSON: ") + e.what());
    }
    auto need = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
        if (!obj.contains(key))
            throw ConfigError(std::string("manifest: missing field '") + key + "'");
        return obj.at(key);
    };
    try {
        RunManifest man;
        man.artifact_version = need(j, "artifact_version").get<std::string>();
        man.config.experiment = need(j, "experiment").get<std::string>();
        const auto& c = need(j, "config");
        man.config.grids = need(c, "grids").get<std::vector<std::size_t>>();
        man.config.degrees = need(c, "degrees").get<std::vector<int>>();
        man.config.shifts = need(c, "shifts").get<std::vector<std::int64_t>>();
        man.config.exponents = need(c, "exponents").get<std::vector<double>>();
        man.config.trials = need(c, "trials").get<int>();
        man.config.seed = std::stoull(need(c, "seed").get<std::string>());
        man.config.out_dir = need(c, "out_dir").get<std::string>();
        man.config.cost_ceiling = need(c, "cost_ceiling").get<double>();
        man.config.exec = exec_from_name(need(c, "exec").get<std::string>());
        man.columns = need(j, "columns").get<std::vector<std::string>>();
        man.row_count = need(j, "row_count").get<std::size_t>();
        man.wall_seconds = need(j, "wall_seconds").get<double>();
        man.calibration = need(j, "calibration").get<std::map<std::string, double>>();
        man.all_pass = need(j, "all_pass").get<bool>();
        man.csv_file = need(j, "csv_file").get<std::string>();
        man.artifacts = need(j, "artifacts").get<std::vector<std::string>>();
        if (man.columns != experiment_columns(man.config.experiment))
            throw ConfigError("manifest: column list does not match the schema for '" +
                              man.config.experiment + "'");
        return man;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: malformed field: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ConfigError("manifest: seed is not an unsigned integer");
    } catch (const std::out_of_range&) {
        throw ConfigError("manifest: seed is not an unsigned integer");
    }
}

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<std::pair<double, double>>& points, bool log_x,
                          bool log_y) {
    if (points.empty()) throw ConfigError("line_plot_svg: no points");
    const double left = 70.0, right = 620.0, top = 40.0, bottom = 370.0;
    auto tx = [log_x](double v) { return log_x ? std::log10(v) : v; };
    auto ty = [log_y](double v) { return log_y ? std::log10(v) : v; };
    double xmin = tx(points.front().first), xmax = xmin;
    double ymin = ty(points.front().second), ymax = ymin;
    for (const auto& [x, y] : points) {
        xmin = std::min(xmin, tx(x));
        xmax = std::max(xmax, tx(x));
        ymin = std::min(ymin, ty(y));
        ymax = std::max(ymax, ty(y));
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    auto px = [&](double v) { return left + (tx(v) - xmin) / (xmax - xmin) * (right - left); };
    auto py = [&](double v) { return bottom - (ty(v) - ymin) / (ymax - ymin) * (bottom - top); };
    auto coord = [](double v) {
        std::array<char, 32> buf;
        const auto res =
            std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 2);
        return std::string(buf.data(), res.ptr);
    };
    auto label = [](double v) {
        if (v == 0.0) return std::string("0");
        std::array<char, 32> buf;
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                       std::chars_format::general, 3);
        return std::string(buf.data(), res.ptr);
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "viewBox=\"0 0 640 420\">\n";
    svg += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
    svg += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"14\">" +
           title + "</text>\n";
    svg += "<line x1=\"70\" y1=\"370\" x2=\"620\" y2=\"370\" stroke=\"black\"/>\n";
    svg += "<line x1=\"70\" y1=\"40\" x2=\"70\" y2=\"370\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fr = static_cast<double>(i) / 4.0;
        const double xv = xmin + fr * (xmax - xmin);
        const double yv = ymin + fr * (ymax - ymin);
        const double sx = left + fr * (right - left);
        const double sy = bottom - fr * (bottom - top);
        const double xd = log_x ? std::pow(10.0, xv) : xv;
        const double yd = log_y ? std::pow(10.0, yv) : yv;
        svg += "<line x1=\"" + coord(sx) + "\" y1=\"370\" x2=\"" + coord(sx) +
               "\" y2=\"374\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + coord(sx) +
               "\" y=\"388\" text-anchor=\"middle\" font-family=\"monospace\" "
               "font-size=\"10\">" +
               label(xd) + "</text>\n";
        svg += "<line x1=\"66\" y1=\"" + coord(sy) + "\" x2=\"70\" y2=\"" + coord(sy) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"62\" y=\"" + coord(sy + 3.0) +
               "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" +
               label(yd) + "</text>\n";
    }
    svg += "<text x=\"345\" y=\"408\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"12\">" +
           x_label + "</text>\n";
    svg += "<text x=\"18\" y=\"205\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"12\" transform=\"rotate(-90 18 205)\">" +
           y_label + "</text>\n";
    svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i) svg += ' ';
        svg += coord(px(points[i].first)) + ',' + coord(py(points[i].second));
    }
    svg += "\"/>\n";
    for (const auto& [x, y] : points)
        svg += "<circle cx=\"" + coord(px(x)) + "\" cy=\"" + coord(py(y)) +
               "\" r=\"2.5\" fill=\"steelblue\"/>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace comlab
