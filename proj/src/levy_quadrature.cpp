#include "levyfp/levy_quadrature.hpp"

#include "levyfp/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace levyfp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxOuterPanels = 200;

void check_density(const PowerDensity& dens, int d)
{
    if (!(dens.beta > 0.0 && dens.beta < 2.0)) {
        throw MeasureError(fmt::format("power density exponent beta = {} violates (H3): need 0 < beta < 2", dens.beta));
    }
    if (!(dens.c > 0.0) || !std::isfinite(dens.c)) {
        throw MeasureError(fmt::format("power density constant c = {} must be positive and finite", dens.c));
    }
    if (!(dens.z_max > 0.0)) throw MeasureError("power density cutoff z_max must be positive");
    if (dens.sided == Sidedness::one_sided && d != 1) {
        throw MeasureError("one-sided power densities are defined for d = 1 only");
    }
}

// Radial integral c S int_a^b rho^{q-1-beta} d rho of |z|^q against the density.
double density_moment(const LevyMeasure& m, double a, double b, double q)
{
    const auto& dens = *m.density;
    b = std::min(b, dens.z_max);
    if (!(b > a)) return 0.0;
    return dens.c * m.surface_factor() * power_integral(a, b, q - 1.0 - dens.beta);
}

struct RadialNode {
    double rho;
    double w;  // radial weight, without c S
};

// Two-point Gauss rule for the weight rho^{-1-beta} on [a, b], b finite.
// Exact for 1, rho, rho^2, rho^3.
std::array<RadialNode, 2> gauss_panel(double a, double b, double beta)
{
    const double t = b / a;
    std::array<double, 4> mu{};
    for (int k = 0; k < 4; ++k) mu[static_cast<std::size_t>(k)] = power_integral(1.0, t, k - 1.0 - beta);
    // Monic orthogonal quadratic rho^2 + c1 rho + c0 on [1, t].
    const double det = mu[1] * mu[1] - mu[0] * mu[2];
    const double c1 = (-mu[2] * mu[1] + mu[3] * mu[0]) / det;
    const double c0 = (-mu[3] * mu[1] + mu[2] * mu[2]) / det;
    const double disc = std::sqrt(std::max(0.0, c1 * c1 - 4.0 * c0));
    const double r1 = 0.5 * (-c1 - disc);
    const double r2 = 0.5 * (-c1 + disc);
    const double w1 = (mu[1] - r2 * mu[0]) / (r1 - r2);
    const double w2 = mu[0] - w1;
    const double scale = std::pow(a, -beta);
    return {RadialNode{a * r1, w1 * scale}, RadialNode{a * r2, w2 * scale}};
}

// Expands a radial node into points z with their weights (includes c S).
void emit_radial(const LevyMeasure& m, const RadialNode& node, std::vector<QuadNode>& out)
{
    const auto& dens = *m.density;
    const double total = dens.c * m.surface_factor() * node.w;
    if (m.d == 1) {
        if (dens.sided == Sidedness::one_sided) {
            out.push_back({Vec::Constant(1, node.rho), total});
        } else {
            out.push_back({Vec::Constant(1, node.rho), 0.5 * total});
            out.push_back({Vec::Constant(1, -node.rho), 0.5 * total});
        }
        return;
    }
    if (m.d == 2) {
        const int n = std::max(1, dens.n_angles);
        for (int k = 0; k < n; ++k) {
            const double theta = 2.0 * std::numbers::pi * (k + 0.5) / n;
            out.push_back({Vec{{node.rho * std::cos(theta), node.rho * std::sin(theta)}}, total / n});
        }
        return;
    }
    throw PreconditionError(fmt::format("power density quadrature is implemented for d <= 2, got d = {}", m.d));
}

void emit_panel(const LevyMeasure& m, double a, double b, std::vector<QuadNode>& out)
{
    for (const auto& node : gauss_panel(a, b, m.density->beta)) emit_radial(m, node, out);
}

}  // namespace

double power_integral(double a, double b, double k)
{
    if (std::abs(k + 1.0) < 1e-14) {
        return std::isinf(b) ? kInf : std::log(b / a);
    }
    const double e = k + 1.0;
    if (std::isinf(b)) {
        if (e >= 0.0) return kInf;
        return -std::pow(a, e) / e;
    }
    if (a == 0.0) {
        if (e <= 0.0) return kInf;
        return std::pow(b, e) / e;
    }
    return (std::pow(b, e) - std::pow(a, e)) / e;
}

double QuadratureSplit::inner_moment(double power) const
{
    double sum = 0.0;
    for (const auto& n : inner) sum += n.w * std::pow(n.z.norm(), power);
    return sum;
}

double truncated_moment(const LevyMeasure& measure, double r, double power)
{
    if (!(r > 0.0)) throw PreconditionError("truncated_moment: r must be positive");
    double sum = 0.0;
    for (const auto& atom : measure.atoms) {
        const double n = atom.z.norm();
        if (n < r) sum += atom.w * std::pow(n, power);
    }
    if (measure.density) {
        check_density(*measure.density, measure.d);
        if (power <= measure.density->beta) {
            throw MeasureError(fmt::format("moment of order {} diverges at the origin for beta = {}", power,
                                           measure.density->beta));
        }
        sum += density_moment(measure, 0.0, r, power);
    }
    return sum;
}

double tail_mass(const LevyMeasure& measure, double r)
{
    if (!(r > 0.0)) throw PreconditionError("tail_mass: r must be positive");
    double sum = 0.0;
    for (const auto& atom : measure.atoms) {
        if (atom.z.norm() >= r) sum += atom.w;
    }
    if (measure.density) {
        check_density(*measure.density, measure.d);
        sum += density_moment(measure, r, kInf, 0.0);
    }
    return sum;
}

double h3_moment(const LevyMeasure& measure)
{
    return truncated_moment(measure, 1.0, 2.0) + tail_mass(measure, 1.0);
}

QuadratureSplit split_measure(const LevyMeasure& measure, double r, int n_inner, double tol)
{
    if (!(r > 0.0)) throw PreconditionError("split_measure: r must be positive");
    if (n_inner < 0) throw PreconditionError("split_measure: n_inner must be nonnegative");

    QuadratureSplit q;
    q.r = r;
    for (const auto& atom : measure.atoms) {
        if (atom.z.norm() == 0.0) throw MeasureError("the Levy measure may not charge the origin");
        if (atom.z.norm() < r) {
            q.inner.push_back({atom.z, atom.w});
        } else {
            q.outer.push_back({atom.z, atom.w});
            q.outer_mass += atom.w;
        }
    }
    if (!measure.density) return q;

    const auto& dens = *measure.density;
    check_density(dens, measure.d);
    const double cs = dens.c * measure.surface_factor();

    // Inner panels [r 2^{-k-1}, r 2^{-k}] clipped at z_max.
    const double floor_radius = std::ldexp(r, -n_inner);
    q.dropped_tail_moment = density_moment(measure, 0.0, floor_radius, 2.0);
    if (q.dropped_tail_moment > tol) {
        // Smallest n with c S min(r 2^-n, z_max)^{2-beta} / (2-beta) <= tol.
        const double target = std::pow(tol * (2.0 - dens.beta) / cs, 1.0 / (2.0 - dens.beta));
        const int required = static_cast<int>(std::ceil(std::log2(r / target)));
        throw ResolutionError(
            fmt::format("dropped inner tail moment {:.3e} exceeds tol {:.3e}; need n_inner >= {}",
                        q.dropped_tail_moment, tol, required),
            required);
    }
    for (int k = n_inner - 1; k >= 0; --k) {
        const double a = std::ldexp(r, -k - 1);
        const double b = std::min(std::ldexp(r, -k), dens.z_max);
        if (b > a) emit_panel(measure, a, b, q.inner);
    }

    // Outer panels: doubling from r, with a break at 1, up to z_max.
    if (dens.z_max > r) {
        std::vector<double> breaks{r};
        double edge = r;
        int count = 0;
        while (edge < dens.z_max && count < kMaxOuterPanels) {
            double next = 2.0 * edge;
            if (edge < 1.0 && next > 1.0) next = 1.0;
            if (std::isinf(dens.z_max)) {
                // Stop once the remaining tail beyond `edge` is below tol and the break at 1 is placed.
                if (edge >= 1.0 && cs * power_integral(edge, kInf, -1.0 - dens.beta) <= tol) break;
            } else {
                next = std::min(next, dens.z_max);
            }
            breaks.push_back(next);
            edge = next;
            ++count;
        }
        const std::size_t first_outer = q.outer.size();
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) emit_panel(measure, breaks[i], breaks[i + 1], q.outer);
        if (edge < dens.z_max) {
            // Remaining infinite tail: one node at twice the last break carrying the exact mass.
            const RadialNode tail{2.0 * edge, power_integral(edge, kInf, -1.0 - dens.beta)};
            emit_radial(measure, tail, q.outer);
        }
        for (std::size_t i = first_outer; i < q.outer.size(); ++i) q.outer_mass += q.outer[i].w;
    }
    return q;
}

}  // namespace levyfp
