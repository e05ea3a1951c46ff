#include "levyfp/rng.hpp"

#include <cmath>

namespace levyfp {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index)
{
    // FNV-1a over the label, then splitmix to decorrelate.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(seed ^ h) + index);
}

Engine make_engine(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Engine(seq);
}

Vec unit_vector(Engine& rng, int d)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec v(d);
    double n = 0.0;
    do {
        for (int k = 0; k < d; ++k) v[k] = normal(rng);
        n = v.norm();
    } while (n == 0.0);
    return v / n;
}

Vec uniform_in_ball(Engine& rng, int d, double radius)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double rho = radius * std::pow(unif(rng), 1.0 / d);
    return rho * unit_vector(rng, d);
}

}  // namespace levyfp
