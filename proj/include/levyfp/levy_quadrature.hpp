#pragma once

#include "levyfp/levy_measure.hpp"
#include "levyfp/types.hpp"

#include <vector>

namespace levyfp {

struct QuadNode {
    Vec z;
    double w = 0.0;
};

/// Discretization of nu split at radius r: `inner` holds |z| < r, `outer` |z| >= r.
struct QuadratureSplit {
    double r = 0.0;
    std::vector<QuadNode> inner;
    std::vector<QuadNode> outer;
    double outer_mass = 0.0;
    /// Second moment of the density below the innermost panel, which is dropped.
    double dropped_tail_moment = 0.0;

    /// Sum of w |z|^power over the inner nodes.
    double inner_moment(double power) const;
};

/// Splits `measure` at radius `r`.
///
/// Atoms are routed verbatim. The density is cut into geometric panels
/// (ratio 2): inner panels run from r down to r 2^{-n_inner}, outer panels
/// from r up to z_max (with an extra break at |z| = 1). Each panel carries a
/// two-point Gauss rule for the weight rho^{-1-beta}, so the panel mass and the
/// first three radial moments are exact. The density below r 2^{-n_inner} is
/// dropped; its |z|^2 moment must not exceed `tol`.
///
/// Throws MeasureError when beta is outside (0, 2) and ResolutionError when
/// `n_inner` panels cannot meet `tol`.
QuadratureSplit split_measure(const LevyMeasure& measure, double r, int n_inner, double tol);

/// Integral of |z|^power over {|z| < r}; closed form for both parts.
/// Throws MeasureError when power <= beta for a measure with a density.
double truncated_moment(const LevyMeasure& measure, double r, double power);

/// nu({|z| >= r}); +inf is impossible for r > 0 under (H3).
double tail_mass(const LevyMeasure& measure, double r);

/// Integral of min(1, |z|^2) nu(dz).
double h3_moment(const LevyMeasure& measure);

/// Integral of rho^k over [a, b] (handles k = -1).
double power_integral(double a, double b, double k);

}  // namespace levyfp
