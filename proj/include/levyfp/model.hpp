#pragma once

#include "levyfp/levy_measure.hpp"
#include "levyfp/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace levyfp {

using VectorField = std::function<Vec(const Vec&)>;
using MatrixField = std::function<Mat(const Vec&)>;
using JumpField = std::function<Vec(const Vec& y, const Vec& z)>;
using JumpJacobian = std::function<Mat(const Vec& y, const Vec& z)>;

/// Coefficients of dY = b dt + sigma dB + (jumps with amplitude p(Y-, z)).
///
/// Immutable once built; the callables must be pure so the model can be
/// shared across threads.
struct SdeModel {
    std::string name;
    int d = 1;
    int noise_dim = 1;
    VectorField b;
    MatrixField sigma;  // d x noise_dim
    JumpField p;
    JumpJacobian dp_dy;  // optional; finite differences when empty
    double K = 1.0;
    double alpha = 1.0;
    bool jump_free = false;  // p is identically zero

    Mat a(const Vec& x) const;

    /// D_y p(y, z): analytic when supplied, else central differences with
    /// step max(1e-6, 1e-8 (1 + |y|)).
    Mat jump_jacobian(const Vec& y, const Vec& z) const;
};

struct Coefficients {
    Vec b;
    Mat sigma;
    Mat a;
};

/// Evaluates b, sigma and a = sigma sigma^T at `x`.
/// Throws CoefficientError naming the first non-finite coefficient.
Coefficients eval_coefficients(const SdeModel& model, const Vec& x);

/// Evaluates p(y, z), throwing CoefficientError("p", ...) if it is not finite.
Vec eval_jump(const SdeModel& model, const Vec& y, const Vec& z);

// ---------------------------------------------------------------------------
// Built-in coefficients

/// Sparse multivariate polynomial: sum of coef * prod_k vars_k^pow_k.
class Polynomial {
public:
    struct Term {
        double coef = 0.0;
        std::vector<int> pow;
    };

    Polynomial() = default;
    Polynomial(int n_vars, std::vector<Term> terms);

    int n_vars() const { return n_vars_; }
    const std::vector<Term>& terms() const { return terms_; }
    double operator()(const Vec& vars) const;
    Polynomial derivative(int var) const;

private:
    int n_vars_ = 0;
    std::vector<Term> terms_;
};

VectorField ou_drift(int d, double theta);
VectorField constant_drift(Vec value);
VectorField linear_drift(Mat matrix, Vec offset);
/// One polynomial in x per drift component.
VectorField polynomial_drift(std::vector<Polynomial> components);

MatrixField constant_diffusion(Mat sigma);
/// Row-major table of d * noise_dim polynomials in x.
MatrixField polynomial_diffusion(int d, int noise_dim, std::vector<Polynomial> entries);

enum class JumpKind {
    none,       // p = 0
    additive,   // p = z
    geometric,  // p_k = y_k z_k
    sine,       // p_k = sin(y_k) z_k
    quadratic,  // p_k = y_k^2 z_k
    cross,      // d = 2: p = (y_2 z_1, y_1 z_2)
};

struct JumpMap {
    JumpField p;
    JumpJacobian dp_dy;
    bool jump_free = false;
};

JumpMap builtin_jump(JumpKind kind, int d);
/// One polynomial per component in the 2d variables (y_1..y_d, z_1..z_d).
JumpMap polynomial_jump(int d, std::vector<Polynomial> components);

/// dY = -theta Y dt + sigma dB with jump map `kind`.
SdeModel make_ou_model(int d, double theta, double sigma, JumpKind kind, double K, double alpha);

// ---------------------------------------------------------------------------
// Assumption validation

struct ValidationEntry {
    std::string id;
    std::string description;
    bool pass = true;
    double worst_ratio = 0.0;  // largest observed (lhs / allowed); pass iff <= 1
    Vec witness_x;
    Vec witness_z;
    int n_checked = 0;
    std::string error;  // set when a coefficient could not be evaluated
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    bool all_pass() const;
    const ValidationEntry* find(const std::string& id) const;
};

struct ValidationOptions {
    double sample_radius = 10.0;  // |x| <= R for state samples
    double jump_radius = 1.0;     // 0 < |z| <= this for jump samples
};

/// Samples the standing assumptions on the coefficients and checks the
/// measure's integrability conditions in closed form. Deterministic in `seed`.
ValidationReport validate_model(const SdeModel& model, const LevyMeasure& measure, int n_samples,
                                std::uint64_t seed, const ValidationOptions& options = {});

}  // namespace levyfp
