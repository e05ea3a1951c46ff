#pragma once

#include "levyfp/grid.hpp"
#include "levyfp/levy_measure.hpp"
#include "levyfp/model.hpp"
#include "levyfp/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace levyfp {

struct McConfig {
    int n_paths = 1000;
    int n_steps = 100;
    double T = 1.0;
    double epsilon = 1e-3;  // jumps with |z| < epsilon are dropped
    std::uint64_t seed = 0;
    bool antithetic = false;  // paths 2k and 2k+1 share jumps and use opposite Brownian increments
};

struct SampleSet {
    int d = 1;
    std::vector<Vec> points;       // terminal values of the unflagged paths
    double dropped_moment = 0.0;   // int_{|z|<epsilon} |z|^2 nu(dz)
    int n_flagged = 0;             // paths that left the finite range
    double jump_rate = 0.0;        // nu({|z| >= epsilon})
};

using InitialSampler = std::function<Vec(Engine&)>;

/// Jump-adapted Euler-Maruyama for dY = b dt + sigma dB + compensated jumps.
/// Each path draws from its own stream make_engine(seed, path / pairing), so
/// the result does not depend on the thread count. Throws PreconditionError
/// when more than 1% of the paths produce non-finite states.
SampleSet simulate(const SdeModel& model, const LevyMeasure& measure, const InitialSampler& x0,
                   const McConfig& config);

/// Gaussian product-kernel density estimate on the grid nodes, normalized to
/// h^d-mass 1. Without a bandwidth, Silverman's 1.06 sigma n^{-1/5} per axis.
GridFunction kde_density(const SampleSet& samples, const Grid& grid, std::optional<double> bandwidth = std::nullopt);

/// h^d sum |u - v|.
double l1_distance(const GridFunction& u, const GridFunction& v);

/// One point per line, coordinates separated by spaces.
void write_samples(std::ostream& out, const SampleSet& samples);

}  // namespace levyfp
