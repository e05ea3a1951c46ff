#pragma once

// Small seeded generators for property tests. Each case gets its own engine
// so a failure can be replayed from the printed case index alone.

#include "levyfp/grid.hpp"
#include "levyfp/rng.hpp"

#include <doctest.h>

#include <cstdint>
#include <random>

namespace prop {

using levyfp::Vec;

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return integer(0, 1) == 1; }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

    Vec vec(int n, double lo, double hi)
    {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
        return v;
    }

    /// Random values on the grid, zero within `margin` cells of the boundary.
    levyfp::GridFunction interior_function(const levyfp::Grid& g, int margin)
    {
        levyfp::GridFunction u(g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.boundary_distance(i) >= margin) u.values[static_cast<Eigen::Index>(i)] = uniform(-1.0, 1.0);
        }
        return u;
    }

    levyfp::Engine& engine() { return rng_; }

private:
    levyfp::Engine rng_;
};

/// Runs `body` on `cases` generators derived from `seed`.
template <class Body>
void for_all(int cases, std::uint64_t seed, Body&& body)
{
    for (int c = 0; c < cases; ++c) {
        CAPTURE(c);
        Gen gen(levyfp::derive_seed(seed, "property", static_cast<std::uint64_t>(c)));
        body(gen);
    }
}

}  // namespace prop
