#pragma once

#include "levyfp/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace levyfp {

using Engine = std::mt19937_64;

/// Mixes a labeled stream (label, index) out of a parent seed. Streams with
/// different labels are unrelated, so adding a stage never shifts another
/// stage's random numbers.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

/// Engine for stream `stream` of `seed`, seeded through std::seed_seq.
Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0);

/// Uniform sample from the closed ball of `radius` in R^d.
Vec uniform_in_ball(Engine& rng, int d, double radius);

/// Uniform sample from the unit sphere in R^d.
Vec unit_vector(Engine& rng, int d);

}  // namespace levyfp
