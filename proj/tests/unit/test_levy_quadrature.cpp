#include "levyfp/error.hpp"
#include "levyfp/levy_quadrature.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace levyfp;

namespace {

LevyMeasure one_sided(double beta, double z_max, double c = 1.0)
{
    LevyMeasure nu;
    PowerDensity pd;
    pd.c = c;
    pd.beta = beta;
    pd.z_max = z_max;
    pd.sided = Sidedness::one_sided;
    nu.density = pd;
    return nu;
}

double sum_weights(const std::vector<QuadNode>& nodes, double power)
{
    double s = 0.0;
    for (const auto& n : nodes) s += n.w * std::pow(n.z.norm(), power);
    return s;
}

}  // namespace

TEST_CASE("a single atom beyond r is routed to the outer part")
{
    LevyMeasure nu;
    nu.atoms.push_back({Vec::Constant(1, 1.0), 0.5});
    const QuadratureSplit q = split_measure(nu, 0.1, 20, 1e-8);
    CHECK(q.inner.empty());
    REQUIRE(q.outer.size() == 1);
    CHECK(q.outer[0].z[0] == 1.0);
    CHECK(q.outer[0].w == 0.5);
    CHECK(q.outer_mass == 0.5);
    CHECK(truncated_moment(nu, 0.1, 2.0) == 0.0);
}

TEST_CASE("one-sided power density split at r = 0.1")
{
    const LevyMeasure nu = one_sided(0.5, 1.0);
    const QuadratureSplit q = split_measure(nu, 0.1, 30, 1e-10);

    const double outer_exact = 2.0 * (std::pow(0.1, -0.5) - 1.0);
    CHECK(q.outer_mass == doctest::Approx(outer_exact).epsilon(1e-12));
    CHECK(q.outer_mass == doctest::Approx(4.32456).epsilon(1e-5));
    CHECK(sum_weights(q.outer, 0.0) == doctest::Approx(outer_exact).epsilon(1e-12));

    const double inner_exact = 2.0 / 3.0 * std::pow(0.1, 1.5);
    CHECK(inner_exact == doctest::Approx(0.021082).epsilon(1e-4));
    CHECK(std::abs(q.inner_moment(2.0) + q.dropped_tail_moment - inner_exact) <= 1e-14);
    CHECK(q.dropped_tail_moment <= 1e-10);
    for (const auto& n : q.inner) CHECK(n.z.norm() < 0.1);
    for (const auto& n : q.outer) CHECK(n.z.norm() >= 0.1);
}

TEST_CASE("panels integrate low radial moments exactly")
{
    // Against a Simpson integral of the density on the same interval.
    const LevyMeasure nu = one_sided(1.3, 2.0, 0.7);
    const QuadratureSplit q = split_measure(nu, 0.05, 40, 1e-8);
    for (double k : {0.0, 1.0, 2.0}) {
        const double ref = 0.7 * oracle::simpson([&](double z) { return std::pow(z, k - 2.3); }, 0.05, 2.0, 200000);
        CHECK(sum_weights(q.outer, k) == doctest::Approx(ref).epsilon(1e-9));
    }
}

TEST_CASE("truncated moments in closed form")
{
    const LevyMeasure nu = one_sided(0.5, 1.0);
    CHECK(truncated_moment(nu, 1.0, 2.0) == doctest::Approx(2.0 / 3.0));
    CHECK(truncated_moment(nu, 1.0, 1.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(truncated_moment(nu, 1.0, 0.5), MeasureError);
    CHECK_THROWS_AS(truncated_moment(nu, 1.0, 0.25), MeasureError);
}

TEST_CASE("two-sided and planar densities carry their surface factor")
{
    LevyMeasure two = one_sided(0.5, 1.0);
    two.density->sided = Sidedness::two_sided;
    CHECK(tail_mass(two, 0.1) == doctest::Approx(2.0 * 2.0 * (std::pow(0.1, -0.5) - 1.0)));

    LevyMeasure plane;
    plane.d = 2;
    PowerDensity pd;
    pd.beta = 1.0;
    pd.z_max = 1.0;
    pd.n_angles = 12;
    plane.density = pd;
    const QuadratureSplit q = split_measure(plane, 0.2, 40, 1e-8);
    // nu(|z| >= 0.2) = 2 pi int_0.2^1 rho^-2 d rho = 2 pi (5 - 1)
    CHECK(q.outer_mass == doctest::Approx(8.0 * M_PI).epsilon(1e-12));
    // int_{|z|<0.2} |z|^2 |z|^-3 dz = 2 pi int_0^0.2 d rho
    CHECK(q.inner_moment(2.0) + q.dropped_tail_moment == doctest::Approx(2.0 * M_PI * 0.2).epsilon(1e-12));
    // Directions are symmetric, so the first moment vanishes.
    Vec first = Vec::Zero(2);
    for (const auto& n : q.inner) first += n.w * n.z;
    CHECK(first.norm() <= 1e-12);
}

TEST_CASE("tail mass, H3 moment and power integrals")
{
    const LevyMeasure nu = one_sided(0.5, 4.0);
    CHECK(tail_mass(nu, 1.0) == doctest::Approx(2.0 * (1.0 - 0.5)));
    // int_0^1 z^0.5 + int_1^4 z^-1.5
    CHECK(h3_moment(nu) == doctest::Approx(2.0 / 3.0 + 2.0 * (1.0 - 0.5)));
    CHECK(power_integral(1.0, std::exp(1.0), -1.0) == doctest::Approx(1.0));
    CHECK(power_integral(0.0, 2.0, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("invalid measures and unreachable tolerances")
{
    CHECK_THROWS_AS(split_measure(one_sided(2.0, 1.0), 0.1, 20, 1e-8), MeasureError);
    CHECK_THROWS_AS(split_measure(one_sided(0.0, 1.0), 0.1, 20, 1e-8), MeasureError);

    LevyMeasure origin;
    origin.atoms.push_back({Vec::Zero(1), 1.0});
    CHECK_THROWS_AS(split_measure(origin, 0.1, 20, 1e-8), MeasureError);

    try {
        split_measure(one_sided(1.5, 1.0), 0.1, 2, 1e-12);
        FAIL("expected ResolutionError");
    } catch (const ResolutionError& e) {
        CHECK(e.required_panels() > 2);
        // The reported count must actually work.
        CHECK_NOTHROW(split_measure(one_sided(1.5, 1.0), 0.1, e.required_panels(), 1e-12));
    }
}
