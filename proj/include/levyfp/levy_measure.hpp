#pragma once

#include "levyfp/types.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace levyfp {

/// Point mass of the Lévy measure at `z` (never the origin).
struct Atom {
    Vec z;
    double w = 0.0;
};

enum class Sidedness { two_sided, one_sided };

/// Radial power density nu(dz) = c |z|^{-d-beta} dz on 0 < |z| <= z_max.
///
/// In d = 1 the density may be one-sided (z > 0 only). In d = 2 it is
/// discretized on polar panels with `n_angles` equally spaced directions.
struct PowerDensity {
    double c = 1.0;
    double beta = 0.5;
    double z_max = std::numeric_limits<double>::infinity();
    Sidedness sided = Sidedness::two_sided;
    int n_angles = 8;
};

/// Lévy measure given as finitely many atoms plus an optional power density.
/// `s` is the small-jump moment exponent used by the (HE2) check.
struct LevyMeasure {
    int d = 1;
    std::vector<Atom> atoms;
    std::optional<PowerDensity> density;
    double s = 1.0;

    /// Surface measure of the unit sphere carried by the density:
    /// 2 (d=1 two-sided), 1 (d=1 one-sided), 2π (d=2), 4π (d=3).
    double surface_factor() const;

    bool empty() const { return atoms.empty() && !density.has_value(); }
};

}  // namespace levyfp
