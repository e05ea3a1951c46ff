#pragma once

#include "levyfp/model.hpp"
#include "levyfp/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace levyfp {

/// Solution of y = x - p(y, z) with q = p(y, z) and m = 1 / det(1 + D_y p(y, z)).
struct InverseFlowResult {
    Vec y;
    Vec q;
    double m = 1.0;
    int iterations = 0;
    double residual = 0.0;                // |y - (x - p(y, z))|
    std::vector<double> residual_history;  // residual of every iterate, first to last
};

/// det(1 + M) = 1 + tr(M) + P with M = D_y p(y, z).
struct DetExpansion {
    double trM = 0.0;
    double P = 0.0;
    double det = 1.0;
};

/// r0 = 1 / (8 d K), half the threshold below which y -> y + p(y, z) is
/// locally invertible. For |z| < r0 the fixed-point map contracts with
/// factor d K |z| < 1/8.
double admissible_radius(const SdeModel& model);

/// Fixed-point iteration y_{k+1} = x - p(y_k, z) from y_0 = x until the
/// residual drops to `tol`. z = 0 returns y = x, q = 0, m = 1 directly.
///
/// Throws PreconditionError when |z| >= admissible_radius(model) or tol < 1e-14,
/// NonContractionError after 200 iterations, InvertibilityError from compute_m.
InverseFlowResult solve_inverse(const SdeModel& model, const Vec& x, const Vec& z, double tol = 1e-13);

/// Determinant of 1 + D_y p(y, z) with its trace / remainder split.
/// Throws InvertibilityError when the determinant is not positive.
DetExpansion compute_m(const SdeModel& model, const Vec& y, const Vec& z);

// ---------------------------------------------------------------------------
// Sampled lemma bounds

struct LemmaEntry {
    std::string lemma_id;
    int n_samples = 0;
    double worst_ratio = 0.0;
    Vec witness_x;
    Vec witness_z;
    bool pass = true;
    /// pass == (statistic <= limit). For bounds the statistic is worst_ratio;
    /// for scale-stability entries it is the spread between the two |z| scales.
    double statistic = 0.0;
    double limit = 1.0;
    std::string note;
};

struct LemmaReport {
    double r = 0.0;
    std::vector<LemmaEntry> entries;
    bool all_pass() const;
    const LemmaEntry* find(const std::string& id) const;
};

/// Samples (x, z) with |x| <= box_radius, |z| < r and checks the local
/// inverse-flow bounds:
///
///   y_bound      |y| <= 2|x| + 1
///   q_bound      |q| <= 2K (1 + |x|) |z|
///   det_lower    det(1 + M) >= 2^-d
///   m_range      2^-d <= m <= 2^d
///   q_lipschitz  |q(x1,z) - q(x2,z)| <= 2K |z| |x1 - x2|
///   det_split    det = 1 + tr M + P (1e-12 relative) and |P| <= (d K |z|)^2 d!
///   m_minus_one  sup |m - 1| / |z| (empirical constant; must agree within a
///                factor 4 between |z| < r and |z| < r/10)
///   p_quadratic  sup |P| / |z|^2, same stability rule
///   div_shift    sup |div_y p(x,z) - div_y p(y(x,z),z)| / |z|^2, same rule
///
/// Ratio entries report the worst lhs / bound (pass iff <= 1). Violations are
/// reported with their witness, never thrown.
LemmaReport lemma_suite(const SdeModel& model, double r, int n_samples, double box_radius, std::uint64_t seed);

}  // namespace levyfp
