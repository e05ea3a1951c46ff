#include "levyfp/inverse_flow.hpp"
#include "levyfp/levy_quadrature.hpp"
#include "levyfp/operators.hpp"
#include "levyfp/semigroup.hpp"

#include "oracles.hpp"
#include "property.hpp"

#include <doctest.h>

#include <cmath>

using namespace levyfp;

namespace {

struct RandomProblem {
    SdeModel model;
    LevyMeasure measure;
    Grid grid;
    double r = 0.0625;
    QuadratureSplit quad;
};

RandomProblem random_problem(prop::Gen& gen)
{
    static const JumpKind kinds[] = {JumpKind::additive, JumpKind::geometric, JumpKind::sine};
    RandomProblem p;
    p.model = make_ou_model(1, gen.uniform(0.2, 2.0), gen.uniform(0.5, 1.5), kinds[gen.integer(0, 2)], 1.0, 0.25);
    const int n_atoms = gen.integer(1, 3);
    for (int k = 0; k < n_atoms; ++k) {
        const double z = (gen.coin() ? 1.0 : -1.0) * gen.uniform(p.r, 0.9);
        p.measure.atoms.push_back({Vec::Constant(1, z), gen.uniform(0.1, 1.0)});
    }
    if (gen.coin()) {
        PowerDensity pd;
        pd.c = gen.uniform(0.05, 0.3);
        pd.beta = gen.uniform(0.2, 1.5);
        pd.z_max = p.r;
        p.measure.density = pd;
    }
    static const double spacings[] = {0.05, 0.04, 0.02};
    p.grid = Grid(1, 4.0, spacings[gen.integer(0, 2)]);
    p.quad = split_measure(p.measure, p.r, 40, 1e-6);
    return p;
}

}  // namespace

TEST_CASE("assembled operators are linear and transpose is an involution")
{
    prop::for_all(12, 1, [](prop::Gen& gen) {
        const RandomProblem p = random_problem(gen);
        const AssembledOperators ops = assemble_full(p.model, p.grid, p.r, p.quad);
        const GridFunction u = gen.interior_function(p.grid, 0);
        const GridFunction v = gen.interior_function(p.grid, 0);
        const double alpha = gen.uniform(-3.0, 3.0);
        for (const SparseOperator* op : {&ops.A_r, &ops.I_r, &ops.J_r, &ops.L, &ops.L_star}) {
            const GridFunction lhs = op->apply(GridFunction(p.grid, alpha * u.values + v.values));
            const Vec rhs = alpha * op->apply(u).values + op->apply(v).values;
            CHECK((lhs.values - rhs).lpNorm<Eigen::Infinity>() <= 1e-10 * (1.0 + rhs.lpNorm<Eigen::Infinity>()));
            const auto twice = op->transpose(OperatorPart::custom).transpose(OperatorPart::custom);
            CHECK(oracle::dense(twice) == oracle::dense(*op));
        }
    });
}

TEST_CASE("large-jump duality is exact and the norms obey the bound")
{
    prop::for_all(20, 2, [](prop::Gen& gen) {
        const RandomProblem p = random_problem(gen);
        const SparseOperator Js = assemble_Jr_star(p.model, p.grid, p.r, p.quad);
        const SparseOperator J = assemble_Jr(Js);
        const GridFunction u = gen.interior_function(p.grid, 0);
        const GridFunction f = gen.interior_function(p.grid, 0);
        const double scale = std::abs(pairing(J.apply(u), f)) + 1e-300;
        CHECK(duality_gap(J, Js, u, f) <= 1e-12 * scale);
        CHECK(J.norm_l1() <= 2.0 * p.quad.outer_mass + 1e-10);
        CHECK(Js.norm_linf() <= 2.0 * p.quad.outer_mass + 1e-10);
        // Column sums of J_r are <= 0: mass can only leave through the boundary.
        CHECK(J.column_sums().maxCoeff() <= 1e-14);
    });
}

TEST_CASE("interior mass conservation")
{
    prop::for_all(12, 3, [](prop::Gen& gen) {
        const RandomProblem p = random_problem(gen);
        const AssembledOperators ops = assemble_full(p.model, p.grid, p.r, p.quad);
        // Reach of |p| <= (1 + |x|) |z| < 0.9 (1 + 1.5) from |x| <= 1.5, plus the stencil.
        GridFunction u = gen.interior_function(p.grid, 0);
        for (std::size_t i = 0; i < p.grid.size(); ++i) {
            if (std::abs(p.grid.coord(static_cast<int>(i))) > 1.5) u.values[static_cast<Eigen::Index>(i)] = 0.0;
        }
        CHECK(std::abs(ops.L.apply(u).mass()) <= 1e-8 * u.norm_1());
    });
}

TEST_CASE("implicit Euler contracts and preserves positivity")
{
    prop::for_all(6, 4, [](prop::Gen& gen) {
        const RandomProblem p = random_problem(gen);
        const AssembledOperators ops = assemble_full(p.model, p.grid, p.r, p.quad);
        const double sd = gen.uniform(0.1, 0.4);
        const GridFunction u0 = GridFunction::sample(p.grid, [&](const Vec& x) {
            return std::abs(x[0]) < 6 * sd ? oracle::normal_pdf(x[0], 0.0, sd) : 0.0;
        });
        const EvolutionReport rep = evolve(ops.L, u0, 0.5, gen.uniform(0.01, 0.1));
        for (std::size_t n = 1; n < rep.l1_norms.size(); ++n) {
            CHECK(rep.l1_norms[n] <= rep.l1_norms[n - 1] * (1 + 1e-8));
        }
    });
}

TEST_CASE("dissipativity margin is positively homogeneous in u and exact for J_r on sign patterns")
{
    prop::for_all(10, 5, [](prop::Gen& gen) {
        RandomProblem p = random_problem(gen);
        p.grid = Grid(1, 0.5, 0.25);  // five nodes
        const SparseOperator J = assemble_Jr(assemble_Jr_star(p.model, p.grid, p.r, p.quad));
        const double lambda = gen.uniform(0.1, 5.0);
        const double c = gen.uniform(0.1, 10.0);
        oracle::for_each_sign_pattern(static_cast<int>(p.grid.size()), [&](const Vec& s) {
            const GridFunction u(p.grid, s);
            const double m = dissipativity_margin(J, lambda, u);
            CHECK(m >= -1e-12);
            const GridFunction cu(p.grid, c * s);
            CHECK(dissipativity_margin(J, lambda, cu) == doctest::Approx(c * m).epsilon(1e-10).scale(1.0));
        });
    });
}

TEST_CASE("inverse flow solves the jump equation for random points")
{
    static const JumpKind kinds[] = {JumpKind::additive, JumpKind::geometric, JumpKind::sine};
    prop::for_all(200, 6, [](prop::Gen& gen) {
        const SdeModel m = make_ou_model(1, 1.0, 1.0, kinds[gen.integer(0, 2)], gen.uniform(0.5, 4.0), 1.0);
        const double r0 = admissible_radius(m);
        const Vec x = gen.vec(1, -10.0, 10.0);
        const Vec z = gen.vec(1, -0.99 * r0, 0.99 * r0);
        const InverseFlowResult res = solve_inverse(m, x, z);
        CHECK((res.y + m.p(res.y, z) - x).norm() <= 1e-12 * (1.0 + x.norm()));
        CHECK((res.q - m.p(res.y, z)).norm() <= 1e-15 * (1.0 + x.norm()));
        CHECK(res.m >= 0.5);
        CHECK(res.m <= 2.0);
    });
}

TEST_CASE("quadrature reproduces closed-form masses and moments")
{
    prop::for_all(50, 7, [](prop::Gen& gen) {
        LevyMeasure nu;
        PowerDensity pd;
        pd.c = gen.uniform(0.1, 2.0);
        pd.beta = gen.uniform(0.1, 1.9);
        pd.z_max = gen.uniform(0.5, 3.0);
        pd.sided = gen.coin() ? Sidedness::one_sided : Sidedness::two_sided;
        nu.density = pd;
        const double r = gen.uniform(0.01, 0.4);
        const QuadratureSplit q = split_measure(nu, r, 60, 1.0);
        const double sf = nu.surface_factor();
        CHECK(q.outer_mass == doctest::Approx(sf * pd.c * (std::pow(r, -pd.beta) - std::pow(pd.z_max, -pd.beta)) / pd.beta).epsilon(1e-11));
        CHECK(q.inner_moment(2.0) + q.dropped_tail_moment == doctest::Approx(truncated_moment(nu, r, 2.0)).epsilon(1e-11));
        CHECK(tail_mass(nu, r) == doctest::Approx(q.outer_mass).epsilon(1e-12));
    });
}
