#pragma once

// Discrete two-parameter model sums over collections of dyadic rectangles,
// the stopping-time decomposition that certifies their size estimates, and
// truncated paraproduct forms.
//
// A model sum of arity l acts on l input functions.  Each rectangle R = I x J
// contributes
//
//     |R|^{-(l-1)/2} * prod_{j=1..l} <f_j, B^j_{R}> * B^{l+1}_{R}(x, y),
//
// where B^j_R is the tensor product of one-dimensional bumps adapted to the
// shifted intervals I + n1_j |I| and J + n2_j |J|.  Slot j declares the bump
// type per axis (mean-one phi or mean-zero psi) and the shift pair n_j; the
// output slot l+1 is unshifted.  At least two slots must be mean-zero on each
// axis.  All bumps are normalised to unit discrete L^2 norm on the grid, so
// the coefficient weight |R|^{-(l-1)/2} is the only explicit scaling.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "comlab/bumps.hpp"
#include "comlab/dyadic.hpp"
#include "comlab/parallel.hpp"

namespace comlab {

// ------------------------------------------------------------------- system

// One slot of a model sum: bump type on each axis plus the shift pair.
struct ModelSlot {
    BumpType type1 = BumpType::phi;
    BumpType type2 = BumpType::phi;
    ShiftPair shift{0, 0};
};

// A rectangle collection together with the slot declarations.  `slots` has
// size l + 1; the final entry describes the output bump and must be
// unshifted.
struct RectangleSystem {
    std::vector<DyadicRectangle> rectangles;
    std::vector<ModelSlot> slots;
    MotherKind mother = MotherKind::gaussian;

    int arity() const { return static_cast<int>(slots.size()) - 1; }
};

// Throws ConfigError unless the system has at least two slots, the output
// slot is unshifted, and at least two slots carry a mean-zero bump on each
// axis.  (The rectangle list may be empty.)
void validate_system(const RectangleSystem& sys);

// --------------------------------------------------------------- model sums

// Evaluates the model sum on f (size l, common grid).  Inner products are
// discrete integrals h1 h2 * sum f * B (no conjugation; the bumps are real).
// Throws AlignmentError when a rectangle does not align with the grid and
// ResolutionError when an interval is shorter than one cell.  The serial and
// parallel paths agree bitwise.
GridFunction2D model_apply(const RectangleSystem& sys, const std::vector<GridFunction2D>& f,
                           Exec exec = Exec::serial);

// The (l+1)-linear form with every factor in absolute value:
//     sum_R |R|^{-(l-1)/2} prod_j |<f_j, B^j_R>| * |<g, B^{l+1}_R>|.
// Dominates |<model_apply(sys, f), g>| term by term.
double model_form(const RectangleSystem& sys, const std::vector<GridFunction2D>& f,
                  const GridFunction2D& g, Exec exec = Exec::serial);

// ------------------------------------------------------ rectangle maximal

// Cell set on an n1 x n2 grid, row-major (i * n2 + j), entries 0 or 1.
using CellMask = std::vector<std::uint8_t>;

double mask_measure(const CellMask& mask, const GridFunction2D& like);

// Exact discrete bi-parameter maximal average of a cell set: for every cell,
// the sup over all torus-wrapped rectangles with power-of-two side lengths
// (in cells) that contain the cell, of the average of the mask over the
// rectangle.  Values lie in [0, 1]; computed exactly via integer window sums,
// so superlevel-set comparisons against dyadic-rational thresholds are exact.
std::vector<double> rectangle_maximal(const CellMask& mask, std::size_t n1, std::size_t n2);

// ----------------------------------------------------------- stopping time

struct StoppingTimeOptions {
    // Threshold constant C.  Zero means calibrate: the smallest power of two
    // for which the exceptional set has measure below half.
    double threshold_c = 0.0;
    // Scale window K for the hybrid maximal/square operators.
    int scale_window = 5;
    // Hard cap on level-set iterations before declaring the input degenerate.
    int max_levels = 2000;
    // Frozen constant and exponent choices for the class measure bounds.
    double star_constant = 64.0;
    double alpha_near = 1.01;
    double alpha_far = 16.0;
    Exec exec = Exec::serial;
};

// One verified inequality; `pass` is the recorded comparison outcome.
struct CheckRecord {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

// Rectangles sharing one level tuple (s_1 .. s_{l+1}).
struct RectangleClass {
    std::vector<int> levels;
    std::vector<std::size_t> members;
    double measure = 0.0;  // measure of the union of the members
};

// Output of stopping_time_decompose.  Masks are cell sets on the input grid.
// `rect_levels[r]` is empty when rectangle r belongs to the vanishing part
// (its dilate lies inside the enlarged exceptional set).
struct DecompositionCertificate {
    std::array<int, 2> tail_index{0, 0};
    double threshold_c = 0.0;
    int base_level = 0;  // N chosen for the output-slot level scan
    CellMask omega_base, omega_tilde, omega_tilde2, omega, e_prime;
    double measure_e = 0.0;
    double measure_omega = 0.0;
    double measure_e_prime = 0.0;
    std::vector<std::vector<int>> rect_levels;
    std::vector<std::uint8_t> part_two;
    std::vector<RectangleClass> classes;
    std::vector<CheckRecord> checks;
    bool all_pass = true;
};

// Runs the stopping-time construction for one tail index (k1, k2) >= (0, 0)
// and certifies its invariants.
//
//  - Hybrid operators A_j = (M/S on axis 1) x (M/S on axis 2) are chosen per
//    slot bump type, with shift pair -n_j (a convolution centred at -n h
//    samples the input at x + n h, matching the pairing against a bump
//    shifted by +n).
//  - Base thresholds: C * 2^{5(k1+k2)} * log^2<n1_j> * log^2<n2_j> with
//    <n> = 2 + |n| and natural logs; the union of the base superlevel sets
//    over j = 1..l is `omega_base`.
//  - `omega_tilde`: maximal average of omega_base strictly above 1/(2l);
//    `omega_tilde2`: maximal average of omega_tilde at least 2^{-(k1+k2)}
//    (non-strict, so every 2^{k}-dilate of a rectangle inside omega_tilde is
//    swallowed and the vanishing part pairs to exactly zero against the
//    retained set); `omega` equals omega_tilde2 for this tail index, and
//    E' = E minus omega.
//  - Level s of slot j has threshold C * LL_j * 2^{-s}; a rectangle joins
//    class level s_j at the first s where its overlap with the superlevel
//    set strictly exceeds |R| / (2l) (integer cell counts, exact).  The
//    output slot runs on chi_{E'}: N is the smallest positive integer whose
//    base level passes the density requirement for every rectangle, then the
//    same class loop from -N + 1.
//  - Certified checks: |omega| < 1/2, |E'| >= |E| / 2, exactness of the
//    class partition, exact vanishing of the part-two tail pairings, the
//    interior density bound (strictly more than half of each retained
//    rectangle avoids all previous-level sets), exact containment of each
//    class union in the maximal superlevel sets that define it, and the
//    frozen-constant class measure bounds with near/far exponent regimes.
//
// Preconditions: ||f_j||_{p_j} = 1 and the measure of E is 1, each within
// 1e-6 (ConfigError otherwise).  Throws ResolutionError when the grid cannot
// resolve a rectangle or its (k1, k2)-dilate and AlignmentError when a
// rectangle does not align with the grid.
DecompositionCertificate stopping_time_decompose(const RectangleSystem& sys,
                                                 const std::vector<GridFunction2D>& f,
                                                 const std::vector<double>& p,
                                                 const CellMask& e_set,
                                                 std::array<int, 2> tail_index,
                                                 const StoppingTimeOptions& opt = {});

// JSON rendering of a certificate: masks as sorted cell-index lists, checks
// as {name, lhs, rhs, pass} records.
std::string certificate_json(const DecompositionCertificate& cert, int indent = 2);

// ------------------------------------------------------------- paraproducts

// Truncated paraproduct form
//     h1 h2 * sum_x sum_{|k1|,|k2| <= K} prod_j (f_j * Phi^j_{k1} x Phi^j_{k2})(x),
// where Phi^j is the slot-j bump on each axis dilated to scale 2^{-k} and the
// convolutions are evaluated spectrally against the exact transforms.  Slot
// shifts are ignored (the paraproduct is unshifted); the slot list must obey
// the same two-mean-zero-per-axis rule as a rectangle system, and f must
// supply one function per slot on a common grid.
double paraproduct_form(const std::vector<ModelSlot>& slots, MotherKind mother,
                        const std::vector<GridFunction2D>& f, int K, Exec exec = Exec::serial);

}  // namespace comlab
