#include "levyfp/error.hpp"
#include "levyfp/model.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace levyfp;

namespace {

LevyMeasure single_atom(double z, double w)
{
    LevyMeasure nu;
    nu.atoms.push_back({Vec::Constant(1, z), w});
    return nu;
}

Vec v1(double x) { return Vec::Constant(1, x); }

}  // namespace

TEST_CASE("OU coefficients at a point")
{
    const SdeModel m = make_ou_model(1, 1.0, 1.0, JumpKind::additive, 1.0, 1.0);
    Coefficients c = eval_coefficients(m, v1(0.0));
    CHECK(c.b[0] == 0.0);
    CHECK(c.sigma(0, 0) == 1.0);
    CHECK(c.a(0, 0) == 1.0);

    c = eval_coefficients(m, v1(2.0));
    CHECK(c.b[0] == -2.0);
    CHECK(c.sigma(0, 0) == 1.0);
    CHECK(c.a(0, 0) == 1.0);
}

TEST_CASE("identity diffusion in d = 2 gives a = I")
{
    const SdeModel m = make_ou_model(2, 0.5, 1.0, JumpKind::none, 1.0, 1.0);
    const Coefficients c = eval_coefficients(m, Vec::Constant(2, 3.0));
    CHECK(c.a.isApprox(Mat::Identity(2, 2)));
}

TEST_CASE("non-finite coefficients name the culprit")
{
    SdeModel m = make_ou_model(1, 1.0, 1.0, JumpKind::additive, 1.0, 1.0);
    m.b = [](const Vec& x) { return Vec::Constant(1, std::log(x[0])); };
    try {
        eval_coefficients(m, v1(-1.0));
        FAIL("expected CoefficientError");
    } catch (const CoefficientError& e) {
        CHECK(e.coefficient() == "b");
    }
    m.p = [](const Vec&, const Vec&) { return Vec::Constant(1, std::numeric_limits<double>::infinity()); };
    try {
        eval_jump(m, v1(0.0), v1(0.1));
        FAIL("expected CoefficientError");
    } catch (const CoefficientError& e) {
        CHECK(e.coefficient() == "p");
    }
}

TEST_CASE("polynomial evaluation and derivative")
{
    // 3 x0^2 x1 - x1 + 2
    const Polynomial p(2, {{3.0, {2, 1}}, {-1.0, {0, 1}}, {2.0, {0, 0}}});
    Vec x(2);
    x << 2.0, 5.0;
    CHECK(p(x) == doctest::Approx(3 * 4 * 5 - 5 + 2));
    CHECK(p.derivative(0)(x) == doctest::Approx(6 * 2 * 5));
    CHECK(p.derivative(1)(x) == doctest::Approx(3 * 4 - 1));
}

TEST_CASE("built-in jump maps and their Jacobians")
{
    Vec y(2), z(2);
    y << 1.5, -2.0;
    z << 0.1, 0.05;
    const JumpMap cross = builtin_jump(JumpKind::cross, 2);
    const Vec p = cross.p(y, z);
    CHECK(p[0] == doctest::Approx(-2.0 * 0.1));
    CHECK(p[1] == doctest::Approx(1.5 * 0.05));
    const Mat J = cross.dp_dy(y, z);
    CHECK(J(0, 0) == 0.0);
    CHECK(J(0, 1) == doctest::Approx(0.1));
    CHECK(J(1, 0) == doctest::Approx(0.05));

    const JumpMap sine = builtin_jump(JumpKind::sine, 2);
    CHECK(sine.dp_dy(y, z)(0, 0) == doctest::Approx(std::cos(1.5) * 0.1));
    CHECK(builtin_jump(JumpKind::none, 2).jump_free);
    CHECK_THROWS_AS(builtin_jump(JumpKind::cross, 1), PreconditionError);
}

TEST_CASE("finite-difference Jacobian matches the analytic one")
{
    SdeModel m = make_ou_model(1, 1.0, 1.0, JumpKind::sine, 1.0, 1.0);
    const Mat analytic = m.jump_jacobian(v1(0.7), v1(0.05));
    m.dp_dy = nullptr;
    const Mat numeric = m.jump_jacobian(v1(0.7), v1(0.05));
    CHECK(numeric(0, 0) == doctest::Approx(analytic(0, 0)).epsilon(1e-8));
}

TEST_CASE("OU with a single atom satisfies every assumption")
{
    const SdeModel m = make_ou_model(1, 1.0, 1.0, JumpKind::additive, 1.0, 1.0);
    const ValidationReport rep = validate_model(m, single_atom(1.0, 0.5), 1000, 1);
    for (const auto& e : rep.entries) {
        CAPTURE(e.id);
        CHECK(e.pass);
    }
    CHECK(rep.all_pass());
}

TEST_CASE("quadratic jump map violates the Jacobian bound away from the origin")
{
    SdeModel m = make_ou_model(1, 1.0, 1.0, JumpKind::quadratic, 1.0, 1.0);
    const ValidationReport rep = validate_model(m, single_atom(1.0, 0.5), 1000, 2);
    const ValidationEntry* jac = rep.find("H2_jacobian");
    REQUIRE(jac != nullptr);
    CHECK_FALSE(jac->pass);
    // |2 y z| > |z| iff |y| > 1/2
    CHECK(std::abs(jac->witness_x[0]) > 0.5);
    CHECK_FALSE(rep.all_pass());
}

TEST_CASE("degenerate diffusion fails ellipticity")
{
    SdeModel m = make_ou_model(1, 1.0, 1.0, JumpKind::additive, 1.0, 1.0);
    m.sigma = constant_diffusion(Mat::Zero(1, 1));
    const ValidationReport rep = validate_model(m, single_atom(1.0, 0.5), 100, 3);
    const ValidationEntry* e = rep.find("HE1_ellipticity");
    REQUIRE(e != nullptr);
    CHECK_FALSE(e->pass);
}

TEST_CASE("a failing coefficient becomes a report entry")
{
    SdeModel m = make_ou_model(1, 1.0, 1.0, JumpKind::additive, 1.0, 1.0);
    m.b = [](const Vec& x) {
        if (x[0] > 5.0) return Vec(Vec::Constant(1, std::nan("")));
        return Vec(-x);
    };
    ValidationReport rep;
    CHECK_NOTHROW(rep = validate_model(m, single_atom(1.0, 0.5), 500, 4));
    CHECK_FALSE(rep.all_pass());
    bool found = false;
    for (const auto& e : rep.entries) found = found || !e.error.empty();
    CHECK(found);
}

TEST_CASE("validation is deterministic in the seed")
{
    const SdeModel m = make_ou_model(1, 1.0, 1.0, JumpKind::quadratic, 1.0, 1.0);
    const auto a = validate_model(m, single_atom(1.0, 0.5), 300, 9);
    const auto b = validate_model(m, single_atom(1.0, 0.5), 300, 9);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].worst_ratio == b.entries[i].worst_ratio);
        CHECK(a.entries[i].witness_x == b.entries[i].witness_x);
    }
}
