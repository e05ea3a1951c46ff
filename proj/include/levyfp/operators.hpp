#pragma once

#include "levyfp/grid.hpp"
#include "levyfp/levy_quadrature.hpp"
#include "levyfp/model.hpp"
#include "levyfp/sparse_operator.hpp"

namespace levyfp {

/// How the pullback term u(x - q(x,z)) m(x,z) of I_r is discretized.
enum class RemapScheme {
    /// Cell remap: row i integrates the piecewise-constant reconstruction of u
    /// over the preimage y(cell_i, z) of cell i. The preimage cells tile the
    /// line/plane, so every interior column of the term sums to exactly 1 and
    /// I_r conserves mass to roundoff. The Jacobian m enters through the
    /// preimage volume. Needs d <= 2 (preimage quadrilaterals in d = 2).
    conservative,
    /// m(x_i, z) times multilinear interpolation of u at x_i - q(x_i, z).
    /// Consistent in any d but only approximately mass conserving.
    interpolate,
};

struct AssemblyOptions {
    RemapScheme remap = RemapScheme::conservative;
    double inverse_tol = 1e-13;
};

/// Local part: 1/2 sum d_i d_j (a_ij u) - div((b - int_{r<=|z|<1} p nu(dz)) u),
/// second-order central differences in divergence (column) form, zero extension.
SparseOperator assemble_Ar(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad);

/// (b - int_{r<=|z|<1} p nu(dz))^T Df + 1/2 sum a_ij d_i d_j f with the same
/// stencils, coefficients at the row node.
SparseOperator assemble_Ar_star(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad);

/// Small-jump part of the Fokker-Planck operator built from the inverse flow
/// y(x,z) = x - q(x,z) over the inner quadrature nodes:
///   [u(x-q) - u + Du q] m + Du^T (p - q m) + u (m + div_x p - 1).
/// div_x p and Du use central differences with the grid step.
/// Throws AssemblyError (with the failing node) when the inverse flow fails.
SparseOperator assemble_Ir(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad,
                           const AssemblyOptions& options = {});

/// int_{|z|<r} [f(y + p) - f(y) - Df(y) p] nu(dz), multilinear interpolation at y + p.
SparseOperator assemble_Ir_star(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad);

/// int_{|z|>=r} [f(y + p) - f(y)] nu(dz); off-grid targets contribute zero.
SparseOperator assemble_Jr_star(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad);

/// Large-jump part of the Fokker-Planck operator, defined only by duality:
/// the transpose of J_r*. No explicit formula is evaluated.
SparseOperator assemble_Jr(const SparseOperator& jr_star);

struct AssembledOperators {
    SparseOperator A_r, I_r, J_r;
    SparseOperator A_r_star, I_r_star, J_r_star;
    SparseOperator L, L_star;
};

/// L_h = A_r + I_r + J_r and L*_h = A_r* + I_r* + J_r*.
AssembledOperators assemble_full(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad,
                                 const AssemblyOptions& options = {});

/// |<P u, f>_h - <u, P* f>_h|.
double duality_gap(const SparseOperator& part, const SparseOperator& star, const GridFunction& u,
                   const GridFunction& f);

/// Largest |p(x, z)| over grid nodes where |u| > threshold and all quadrature nodes.
double max_jump_reach(const SdeModel& model, const QuadratureSplit& quad, const GridFunction& u,
                      double threshold = 0.0);

/// Throws PreconditionError unless u vanishes within `cells` cells of the boundary.
void require_support_margin(const GridFunction& u, int cells, const char* who);

}  // namespace levyfp
