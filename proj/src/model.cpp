#include "levyfp/model.hpp"

#include "levyfp/error.hpp"
#include "levyfp/levy_quadrature.hpp"
#include "levyfp/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace levyfp {

std::string format_point(const Vec& v)
{
    std::string out;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        if (k > 0) out += ';';
        out += fmt::format("{:.17g}", v[k]);
    }
    return out;
}

double LevyMeasure::surface_factor() const
{
    if (d == 1) {
        return density && density->sided == Sidedness::one_sided ? 1.0 : 2.0;
    }
    if (d == 2) return 2.0 * std::numbers::pi;
    if (d == 3) return 4.0 * std::numbers::pi;
    throw PreconditionError(fmt::format("power densities are supported for d <= 3, got d = {}", d));
}

Mat SdeModel::a(const Vec& x) const
{
    const Mat s = sigma(x);
    return s * s.transpose();
}

Mat SdeModel::jump_jacobian(const Vec& y, const Vec& z) const
{
    if (dp_dy) return dp_dy(y, z);
    const double step = std::max(1e-6, 1e-8 * (1.0 + y.norm()));
    Mat J(d, d);
    Vec yp = y;
    Vec ym = y;
    for (int k = 0; k < d; ++k) {
        yp[k] = y[k] + step;
        ym[k] = y[k] - step;
        J.col(k) = (p(yp, z) - p(ym, z)) / (2.0 * step);
        yp[k] = y[k];
        ym[k] = y[k];
    }
    return J;
}

namespace {

template <class M>
bool all_finite(const M& m)
{
    return m.allFinite();
}

}  // namespace

Coefficients eval_coefficients(const SdeModel& model, const Vec& x)
{
    if (!x.allFinite()) throw PreconditionError("eval_coefficients: x is not finite");
    Coefficients c;
    c.b = model.b(x);
    if (c.b.size() != model.d || !all_finite(c.b)) {
        throw CoefficientError("b", fmt::format("drift b is not finite at x = {}", format_point(x)));
    }
    c.sigma = model.sigma(x);
    if (c.sigma.rows() != model.d || !all_finite(c.sigma)) {
        throw CoefficientError("sigma",
                               fmt::format("diffusion sigma is not finite at x = {}", format_point(x)));
    }
    c.a = c.sigma * c.sigma.transpose();
    if (!all_finite(c.a)) {
        throw CoefficientError("a", fmt::format("a = sigma sigma^T is not finite at x = {}", format_point(x)));
    }
    return c;
}

Vec eval_jump(const SdeModel& model, const Vec& y, const Vec& z)
{
    Vec v = model.p(y, z);
    if (v.size() != model.d || !v.allFinite()) {
        throw CoefficientError(
            "p", fmt::format("jump map p is not finite at y = {}, z = {}", format_point(y), format_point(z)));
    }
    return v;
}

// ---------------------------------------------------------------------------
// Polynomials

Polynomial::Polynomial(int n_vars, std::vector<Term> terms) : n_vars_(n_vars), terms_(std::move(terms))
{
    for (const auto& t : terms_) {
        if (static_cast<int>(t.pow.size()) != n_vars_) {
            throw PreconditionError(
                fmt::format("polynomial term has {} exponents, expected {}", t.pow.size(), n_vars_));
        }
        for (int e : t.pow) {
            if (e < 0) throw PreconditionError("polynomial exponents must be nonnegative");
        }
    }
}

double Polynomial::operator()(const Vec& vars) const
{
    double sum = 0.0;
    for (const auto& t : terms_) {
        double v = t.coef;
        for (int k = 0; k < n_vars_; ++k) {
            if (t.pow[k] != 0) v *= std::pow(vars[k], t.pow[k]);
        }
        sum += v;
    }
    return sum;
}

Polynomial Polynomial::derivative(int var) const
{
    std::vector<Term> out;
    for (const auto& t : terms_) {
        if (t.pow[var] == 0) continue;
        Term d = t;
        d.coef *= t.pow[var];
        d.pow[var] -= 1;
        out.push_back(std::move(d));
    }
    return Polynomial(n_vars_, std::move(out));
}

// ---------------------------------------------------------------------------
// Built-ins

VectorField ou_drift(int, double theta)
{
    return [theta](const Vec& x) -> Vec { return -theta * x; };
}

VectorField constant_drift(Vec value)
{
    return [value = std::move(value)](const Vec&) -> Vec { return value; };
}

VectorField linear_drift(Mat matrix, Vec offset)
{
    return [matrix = std::move(matrix), offset = std::move(offset)](const Vec& x) -> Vec {
        return matrix * x + offset;
    };
}

VectorField polynomial_drift(std::vector<Polynomial> components)
{
    return [components = std::move(components)](const Vec& x) -> Vec {
        Vec out(static_cast<Eigen::Index>(components.size()));
        for (std::size_t k = 0; k < components.size(); ++k) out[static_cast<Eigen::Index>(k)] = components[k](x);
        return out;
    };
}

MatrixField constant_diffusion(Mat sigma)
{
    return [sigma = std::move(sigma)](const Vec&) -> Mat { return sigma; };
}

MatrixField polynomial_diffusion(int d, int noise_dim, std::vector<Polynomial> entries)
{
    if (static_cast<int>(entries.size()) != d * noise_dim) {
        throw PreconditionError("polynomial diffusion needs d * noise_dim entries");
    }
    return [d, noise_dim, entries = std::move(entries)](const Vec& x) -> Mat {
        Mat s(d, noise_dim);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < noise_dim; ++j) s(i, j) = entries[static_cast<std::size_t>(i * noise_dim + j)](x);
        }
        return s;
    };
}

JumpMap builtin_jump(JumpKind kind, int d)
{
    JumpMap m;
    switch (kind) {
    case JumpKind::none:
        m.p = [d](const Vec&, const Vec&) -> Vec { return Vec::Zero(d); };
        m.dp_dy = [d](const Vec&, const Vec&) -> Mat { return Mat::Zero(d, d); };
        m.jump_free = true;
        break;
    case JumpKind::additive:
        m.p = [](const Vec&, const Vec& z) -> Vec { return z; };
        m.dp_dy = [d](const Vec&, const Vec&) -> Mat { return Mat::Zero(d, d); };
        break;
    case JumpKind::geometric:
        m.p = [](const Vec& y, const Vec& z) -> Vec { return y.cwiseProduct(z); };
        m.dp_dy = [](const Vec&, const Vec& z) -> Mat { return z.asDiagonal(); };
        break;
    case JumpKind::sine:
        m.p = [](const Vec& y, const Vec& z) -> Vec { return y.array().sin().matrix().cwiseProduct(z); };
        m.dp_dy = [](const Vec& y, const Vec& z) -> Mat {
            return y.array().cos().matrix().cwiseProduct(z).asDiagonal();
        };
        break;
    case JumpKind::quadratic:
        m.p = [](const Vec& y, const Vec& z) -> Vec { return y.cwiseProduct(y).cwiseProduct(z); };
        m.dp_dy = [](const Vec& y, const Vec& z) -> Mat { return (2.0 * y.cwiseProduct(z)).asDiagonal(); };
        break;
    case JumpKind::cross:
        if (d != 2) throw PreconditionError("the cross jump map is defined for d = 2 only");
        m.p = [](const Vec& y, const Vec& z) -> Vec { return Vec{{y[1] * z[0], y[0] * z[1]}}; };
        m.dp_dy = [](const Vec&, const Vec& z) -> Mat {
            Mat J(2, 2);
            J << 0.0, z[0], z[1], 0.0;
            return J;
        };
        break;
    }
    return m;
}

JumpMap polynomial_jump(int d, std::vector<Polynomial> components)
{
    if (static_cast<int>(components.size()) != d) {
        throw PreconditionError("polynomial jump map needs d components");
    }
    for (const auto& c : components) {
        if (c.n_vars() != 2 * d) throw PreconditionError("polynomial jump components take 2d variables (y, z)");
    }
    // jac[k][j] = d p_k / d y_j
    std::vector<std::vector<Polynomial>> jac(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
        for (int j = 0; j < d; ++j) jac[static_cast<std::size_t>(k)].push_back(components[static_cast<std::size_t>(k)].derivative(j));
    }
    const bool all_zero = std::all_of(components.begin(), components.end(), [](const Polynomial& c) {
        return std::all_of(c.terms().begin(), c.terms().end(), [](const auto& t) { return t.coef == 0.0; });
    });

    auto join = [d](const Vec& y, const Vec& z) {
        Vec v(2 * d);
        v << y, z;
        return v;
    };
    JumpMap m;
    m.p = [d, components, join](const Vec& y, const Vec& z) -> Vec {
        const Vec v = join(y, z);
        Vec out(d);
        for (int k = 0; k < d; ++k) out[k] = components[static_cast<std::size_t>(k)](v);
        return out;
    };
    m.dp_dy = [d, jac = std::move(jac), join](const Vec& y, const Vec& z) -> Mat {
        const Vec v = join(y, z);
        Mat J(d, d);
        for (int k = 0; k < d; ++k) {
            for (int j = 0; j < d; ++j) J(k, j) = jac[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)](v);
        }
        return J;
    };
    m.jump_free = all_zero;
    return m;
}

SdeModel make_ou_model(int d, double theta, double sigma, JumpKind kind, double K, double alpha)
{
    SdeModel m;
    m.name = "ou";
    m.d = d;
    m.noise_dim = d;
    m.b = ou_drift(d, theta);
    m.sigma = constant_diffusion(sigma * Mat::Identity(d, d));
    auto jump = builtin_jump(kind, d);
    m.p = std::move(jump.p);
    m.dp_dy = std::move(jump.dp_dy);
    m.jump_free = jump.jump_free;
    m.K = K;
    m.alpha = alpha;
    return m;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::all_pass() const
{
    return std::all_of(entries.begin(), entries.end(), [](const ValidationEntry& e) { return e.pass; });
}

const ValidationEntry* ValidationReport::find(const std::string& id) const
{
    for (const auto& e : entries) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

namespace {

constexpr double kRatioSlack = 1e-12;
// Derivatives taken by central differences carry ~1e-8 relative error.
constexpr double kDifferenceSlack = 1e-6;

struct RatioTracker {
    ValidationEntry entry;

    double slack = kRatioSlack;

    RatioTracker(std::string id, std::string description, double slack_ = kRatioSlack) : slack(slack_)
    {
        entry.id = std::move(id);
        entry.description = std::move(description);
    }

    void observe(double ratio, const Vec& x, const Vec& z)
    {
        ++entry.n_checked;
        if (std::isnan(ratio)) ratio = std::numeric_limits<double>::infinity();
        if (entry.n_checked == 1 || ratio > entry.worst_ratio) {
            entry.worst_ratio = ratio;
            entry.witness_x = x;
            entry.witness_z = z;
        }
    }

    ValidationEntry finish()
    {
        entry.pass = entry.worst_ratio <= 1.0 + slack;
        return entry;
    }
};

ValidationEntry evaluation_failure(const std::string& coefficient, const std::string& message, const Vec& x,
                                   const Vec& z)
{
    ValidationEntry e;
    e.id = "evaluation_error:" + coefficient;
    e.description = "coefficient could not be evaluated at a sample point";
    e.pass = false;
    e.worst_ratio = std::numeric_limits<double>::infinity();
    e.witness_x = x;
    e.witness_z = z;
    e.n_checked = 1;
    e.error = message;
    return e;
}

ValidationEntry closed_form_entry(std::string id, std::string description, bool pass, double value)
{
    ValidationEntry e;
    e.id = std::move(id);
    e.description = std::move(description);
    e.pass = pass;
    e.worst_ratio = value;
    e.n_checked = 1;
    return e;
}

}  // namespace

ValidationReport validate_model(const SdeModel& model, const LevyMeasure& measure, int n_samples,
                                std::uint64_t seed, const ValidationOptions& options)
{
    if (n_samples < 1) throw PreconditionError("validate_model: n_samples must be >= 1");
    const int d = model.d;
    Engine rng = make_engine(seed, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    RatioTracker h1("H1_lipschitz", "|d_k sigma_ij| + |d_k b_i| <= K", kDifferenceSlack);
    RatioTracker growth("H2_growth", "|p(x,z)| <= K (1+|x|) |z|");
    RatioTracker jac("H2_jacobian", "||D_y p(y,z)|| <= K |z|", model.dp_dy ? kRatioSlack : kDifferenceSlack);
    RatioTracker ellip("HE1_ellipticity", "v^T a(x) v >= alpha |v|^2");
    RatioTracker symm("a_symmetric", "|a - a^T| <= 1e-12");
    std::vector<ValidationEntry> failures;

    const Vec zero_z = Vec::Zero(d);
    for (int s = 0; s < n_samples; ++s) {
        const Vec x = uniform_in_ball(rng, d, options.sample_radius);
        Vec z = uniform_in_ball(rng, d, options.jump_radius);
        if (z.norm() == 0.0) z = Vec::Constant(d, options.jump_radius * 0.5);
        const Vec v = unit_vector(rng, d);
        try {
            const Coefficients c = eval_coefficients(model, x);

            // (H1) by central differences of b and sigma.
            const double step = std::max(1e-6, 1e-8 * (1.0 + x.norm()));
            double worst_h1 = 0.0;
            for (int k = 0; k < d; ++k) {
                Vec xp = x;
                Vec xm = x;
                xp[k] += step;
                xm[k] -= step;
                const Vec db = (model.b(xp) - model.b(xm)) / (2.0 * step);
                const Mat ds = (model.sigma(xp) - model.sigma(xm)) / (2.0 * step);
                for (int i = 0; i < d; ++i) {
                    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
                        worst_h1 = std::max(worst_h1, std::abs(ds(i, j)) + std::abs(db[i]));
                    }
                }
            }
            h1.observe(worst_h1 / model.K, x, zero_z);

            const double asym = (c.a - c.a.transpose()).cwiseAbs().maxCoeff();
            symm.observe(asym / 1e-12, x, zero_z);

            const double quad = v.dot(c.a * v);
            ellip.observe(quad > 0.0 ? model.alpha / quad : std::numeric_limits<double>::infinity(), x, zero_z);

            const Vec pv = eval_jump(model, x, z);
            growth.observe(pv.norm() / (model.K * (1.0 + x.norm()) * z.norm()), x, z);

            const Mat J = model.jump_jacobian(x, z);
            if (!J.allFinite()) throw CoefficientError("dp_dy", "D_y p is not finite");
            const double opnorm = Eigen::JacobiSVD<Mat>(J).singularValues()(0);
            jac.observe(opnorm / (model.K * z.norm()), x, z);
        } catch (const CoefficientError& e) {
            if (failures.size() < 8) failures.push_back(evaluation_failure(e.coefficient(), e.what(), x, z));
        } catch (const std::exception& e) {
            if (failures.size() < 8) failures.push_back(evaluation_failure("unknown", e.what(), x, z));
        }
    }

    ValidationReport report;
    report.entries.push_back(h1.finish());
    report.entries.push_back(growth.finish());
    report.entries.push_back(jac.finish());
    report.entries.push_back(ellip.finish());
    report.entries.push_back(symm.finish());

    // Measure conditions, in closed form.
    bool origin_atom = false;
    bool bad_weight = false;
    for (const auto& atom : measure.atoms) {
        if (atom.z.norm() == 0.0) origin_atom = true;
        if (!(atom.w > 0.0) || !std::isfinite(atom.w)) bad_weight = true;
    }
    report.entries.push_back(
        closed_form_entry("no_atom_at_origin", "nu({0}) = 0", !origin_atom, origin_atom ? 1.0 : 0.0));

    double h3 = std::numeric_limits<double>::infinity();
    bool h3_ok = !bad_weight;
    try {
        h3 = h3_moment(measure);
        h3_ok = h3_ok && std::isfinite(h3);
    } catch (const Error&) {
        h3_ok = false;
    }
    report.entries.push_back(closed_form_entry("H3_integrability", "int min(1,|z|^2) nu(dz) < inf", h3_ok, h3));

    double he2 = std::numeric_limits<double>::infinity();
    bool he2_ok = measure.s >= 1.0 && measure.s < 2.0;
    try {
        he2 = truncated_moment(measure, 1.0, measure.s);
        he2_ok = he2_ok && std::isfinite(he2);
    } catch (const Error&) {
        he2_ok = false;
    }
    report.entries.push_back(closed_form_entry("HE2_moment", "int_{|z|<1} |z|^s nu(dz) < inf, s in [1,2)", he2_ok, he2));

    for (auto& f : failures) report.entries.push_back(std::move(f));
    return report;
}

}  // namespace levyfp
