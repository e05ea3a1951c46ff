#include "levyfp/inverse_flow.hpp"

#include "levyfp/error.hpp"
#include "levyfp/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace levyfp {

namespace {

constexpr int kMaxIterations = 200;

void require_admissible(const SdeModel& model, const Vec& z, const char* who)
{
    const double r0 = admissible_radius(model);
    if (!(z.norm() < r0)) {
        throw PreconditionError(fmt::format("{}: |z| = {:.6g} is not below r0 = 1/(8dK) = {:.6g}", who, z.norm(), r0));
    }
}

}  // namespace

double admissible_radius(const SdeModel& model)
{
    if (!(model.K > 0.0) || model.d < 1) throw PreconditionError("admissible_radius: need K > 0 and d >= 1");
    return 1.0 / (8.0 * model.d * model.K);
}

DetExpansion compute_m(const SdeModel& model, const Vec& y, const Vec& z)
{
    require_admissible(model, z, "compute_m");
    const Mat M = model.jump_jacobian(y, z);
    if (!M.allFinite()) throw CoefficientError("dp_dy", fmt::format("D_y p is not finite at y = {}", format_point(y)));
    DetExpansion e;
    e.trM = M.trace();
    e.det = model.d == 1 ? 1.0 + M(0, 0) : (Mat::Identity(model.d, model.d) + M).determinant();
    // P is the sum of the principal minors of order >= 2, evaluated directly
    // so that it is exactly zero in d = 1 instead of det - 1 - tr M roundoff.
    if (model.d == 2) {
        e.P = M.determinant();
    } else if (model.d == 3) {
        e.P = M.determinant();
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) e.P += M(i, i) * M(j, j) - M(i, j) * M(j, i);
        }
    }
    if (!(e.det > 0.0)) {
        throw InvertibilityError(fmt::format("det(1 + D_y p) = {:.6g} <= 0 at y = {}, z = {}", e.det,
                                             format_point(y), format_point(z)));
    }
    return e;
}

InverseFlowResult solve_inverse(const SdeModel& model, const Vec& x, const Vec& z, double tol)
{
    if (tol < 1e-14) throw PreconditionError("solve_inverse: tol must be >= 1e-14");
    InverseFlowResult res;
    if (z.norm() == 0.0) {
        res.y = x;
        res.q = Vec::Zero(model.d);
        return res;
    }
    require_admissible(model, z, "solve_inverse");

    Vec y = x;
    for (int it = 1; it <= kMaxIterations; ++it) {
        const Vec pv = eval_jump(model, y, z);
        const Vec g = x - pv;
        const double residual = (y - g).norm();
        res.residual_history.push_back(residual);
        res.iterations = it;
        if (residual <= tol) {
            // q = p(y, z) directly: x - g would cancel for small jumps.
            res.y = y;
            res.q = pv;
            res.residual = residual;
            res.m = 1.0 / compute_m(model, y, z).det;
            return res;
        }
        y = g;
    }
    throw NonContractionError(fmt::format(
        "inverse flow did not converge in {} iterations at x = {}, z = {} (last residual {:.3e}); "
        "the jump map violates |D_y p| <= K|z| here",
        kMaxIterations, format_point(x), format_point(z), res.residual_history.back()));
}

// ---------------------------------------------------------------------------

bool LemmaReport::all_pass() const
{
    return std::all_of(entries.begin(), entries.end(), [](const LemmaEntry& e) { return e.pass; });
}

const LemmaEntry* LemmaReport::find(const std::string& id) const
{
    for (const auto& e : entries) {
        if (e.lemma_id == id) return &e;
    }
    return nullptr;
}

namespace {

constexpr double kSlack = 1e-12;
// Quadratic-decay ratios divide by |z|^2; below this fraction of r roundoff dominates.
constexpr double kTinyJump = 1e-4;
constexpr double kScaleFactor = 4.0;

struct Sup {
    LemmaEntry e;
    explicit Sup(std::string id) { e.lemma_id = std::move(id); }

    void observe(double ratio, const Vec& x, const Vec& z)
    {
        ++e.n_samples;
        if (std::isnan(ratio)) ratio = std::numeric_limits<double>::infinity();
        if (e.n_samples == 1 || ratio > e.worst_ratio) {
            e.worst_ratio = ratio;
            e.witness_x = x;
            e.witness_z = z;
        }
    }

    LemmaEntry bound()
    {
        e.statistic = e.worst_ratio;
        e.limit = 1.0 + kSlack;
        e.pass = e.statistic <= e.limit;
        return e;
    }
};

// Empirical constant taken over |z| < r, checked against the same supremum over |z| < r/10.
LemmaEntry stable_constant(Sup coarse, const Sup& fine)
{
    const double a = coarse.e.worst_ratio;
    const double b = fine.e.worst_ratio;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    double spread = 1.0;
    if (hi > 1e-300) spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    coarse.e.statistic = spread;
    coarse.e.limit = kScaleFactor;
    coarse.e.pass = std::isfinite(a) && std::isfinite(b) && spread <= kScaleFactor;
    coarse.e.note = fmt::format("sup over |z|<r/10 = {:.6g}; spread {:.4g} (limit {})", b, spread, kScaleFactor);
    return coarse.e;
}

double factorial(int n)
{
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

struct ScaleSups {
    Sup m_minus_one{"m_minus_one"};
    Sup p_quadratic{"p_quadratic"};
    Sup div_shift{"div_shift"};
};

}  // namespace

LemmaReport lemma_suite(const SdeModel& model, double r, int n_samples, double box_radius, std::uint64_t seed)
{
    const double r0 = admissible_radius(model);
    if (!(r > 0.0 && r < r0)) {
        throw PreconditionError(fmt::format("lemma_suite: r = {:.6g} must lie in (0, r0 = {:.6g})", r, r0));
    }
    if (n_samples < 1) throw PreconditionError("lemma_suite: n_samples must be >= 1");

    const int d = model.d;
    const double K = model.K;
    const double det_floor = std::ldexp(1.0, -d);
    const double m_ceiling = std::ldexp(1.0, d);
    const double p_crude = factorial(d);

    Sup y_bound("y_bound");
    Sup q_bound("q_bound");
    Sup det_lower("det_lower");
    Sup m_range("m_range");
    Sup q_lip("q_lipschitz");
    Sup det_split("det_split");
    ScaleSups coarse;
    ScaleSups fine;
    LemmaEntry failures;
    failures.lemma_id = "solve_failure";

    auto trace_jac = [&](const Vec& y, const Vec& z) { return model.jump_jacobian(y, z).trace(); };

    auto sample_scale = [&](Engine& rng, double radius, ScaleSups& sups, bool full) {
        for (int s = 0; s < n_samples; ++s) {
            const Vec x = uniform_in_ball(rng, d, box_radius);
            Vec z = uniform_in_ball(rng, d, radius);
            const Vec x2 = uniform_in_ball(rng, d, box_radius);
            if (!(z.norm() < radius)) continue;
            const double zn = z.norm();
            if (zn == 0.0) continue;

            InverseFlowResult f;
            DetExpansion de;
            InverseFlowResult f2;
            try {
                f = solve_inverse(model, x, z);
                de = compute_m(model, f.y, z);
                if (full) f2 = solve_inverse(model, x2, z);
            } catch (const Error& e) {
                ++failures.n_samples;
                if (failures.pass) {
                    failures.pass = false;
                    failures.worst_ratio = std::numeric_limits<double>::infinity();
                    failures.limit = 0.0;
                    failures.witness_x = x;
                    failures.witness_z = z;
                    failures.note = e.what();
                }
                continue;
            }

            if (full) {
                y_bound.observe(f.y.norm() / (2.0 * x.norm() + 1.0), x, z);
                q_bound.observe(f.q.norm() / (2.0 * K * (1.0 + x.norm()) * zn), x, z);
                det_lower.observe(det_floor / de.det, x, z);
                m_range.observe(std::max(f.m / m_ceiling, det_floor / f.m), x, z);

                const double dx = (x - x2).norm();
                if (dx > 0.0) q_lip.observe((f.q - f2.q).norm() / (2.0 * K * zn * dx), x, z);

                const double split_err = std::abs(de.det - (1.0 + de.trM + de.P)) / (1e-12 * std::abs(de.det));
                const double crude = std::abs(de.P) / (std::pow(d * K * zn, 2) * p_crude);
                det_split.observe(std::max(split_err, crude), x, z);
            }

            sups.m_minus_one.observe(std::abs(f.m - 1.0) / zn, x, z);
            if (zn >= kTinyJump * radius) {
                sups.p_quadratic.observe(std::abs(de.P) / (zn * zn), x, z);
                sups.div_shift.observe(std::abs(trace_jac(x, z) - trace_jac(f.y, z)) / (zn * zn), x, z);
            }
        }
    };

    Engine rng_coarse = make_engine(seed, 1);
    Engine rng_fine = make_engine(seed, 2);
    sample_scale(rng_coarse, r, coarse, true);
    sample_scale(rng_fine, r / 10.0, fine, false);

    LemmaReport rep;
    rep.r = r;
    rep.entries.push_back(y_bound.bound());
    rep.entries.push_back(q_bound.bound());
    rep.entries.push_back(det_lower.bound());
    rep.entries.push_back(m_range.bound());
    rep.entries.push_back(q_lip.bound());
    rep.entries.push_back(det_split.bound());
    rep.entries.push_back(stable_constant(coarse.m_minus_one, fine.m_minus_one));
    rep.entries.push_back(stable_constant(coarse.p_quadratic, fine.p_quadratic));
    rep.entries.push_back(stable_constant(coarse.div_shift, fine.div_shift));
    if (!failures.pass) {
        failures.statistic = failures.n_samples;
        rep.entries.push_back(failures);
    }
    return rep;
}

}  // namespace levyfp
