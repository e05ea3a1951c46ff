#pragma once

#include "levyfp/grid.hpp"
#include "levyfp/rng.hpp"
#include "levyfp/sparse_operator.hpp"

#include <Eigen/SparseLU>

#include <cstdint>
#include <memory>
#include <vector>

namespace levyfp {

struct StepResult {
    GridFunction v;
    int iterations = 0;
    double residual = 0.0;  // h^d |u - (I - dt L) v|_1
};

/// Solves (I - dt L) v = u repeatedly for one operator and step size.
/// The matrix is factorized once (sparse LU) and used as the preconditioner
/// of an iterative-refinement loop that runs until the weighted L1 residual
/// is <= tol * |u|_1.
class ResolventSolver {
public:
    ResolventSolver(const SparseOperator& L, double dt, double tol);

    StepResult solve(const GridFunction& u) const;

    double dt() const { return dt_; }
    double tol() const { return tol_; }

    static constexpr int kMaxIterations = 10000;

private:
    Grid grid_;
    double dt_;
    double tol_;
    Eigen::SparseMatrix<double> system_;  // column major for SparseLU
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

/// One implicit Euler step. Throws SolverError carrying the final residual.
StepResult step_implicit_euler(const SparseOperator& L, const GridFunction& u, double dt, double tol);

struct EvolveOptions {
    double tol = 1e-12;
    /// Cells from the boundary that count as the boundary layer for boundary_mass.
    int boundary_cells = 2;
    /// Rescale u0 to |u0|_1 = 1 before stepping.
    bool normalize = true;
};

/// Trajectory of du/dt = L u. Index 0 holds the initial state.
struct EvolutionReport {
    std::vector<double> times;
    std::vector<double> l1_norms;
    std::vector<double> masses;
    std::vector<double> min_values;
    std::vector<double> boundary_mass;  // h^d sum |u| within boundary_cells of the box
    std::vector<int> iterations;        // solver iterations per step (0 for the initial state)
    GridFunction final;
};

/// Implicit Euler from u0 >= 0 to T with n = round(T / dt) equal steps.
/// Step failures are rethrown as SolverError naming the time.
EvolutionReport evolve(const SparseOperator& L, const GridFunction& u0, double T, double dt,
                       const EvolveOptions& options = {});

// ---------------------------------------------------------------------------
// Certification

enum class NormKind { l1, linf };

struct BumpOptions {
    int max_terms = 5;
    double min_width = 0.0;     // 0: 4h
    double max_width = 0.0;     // 0: max(min_width, X / 8)
    double center_radius = 0.0; // 0: (X - 6 max_width) / 2, at least 0
};

/// Sum of 1..max_terms Gaussian bumps with random signs and amplitudes,
/// truncated at six widths, normalized to unit norm in `norm`.
GridFunction random_bump(const Grid& grid, Engine& rng, const BumpOptions& options = {}, NormKind norm = NormKind::l1);

struct DissipativityOptions {
    double c_tol = 10.0;
    NormKind norm = NormKind::l1;
    BumpOptions bumps;
};

struct DissipativityReport {
    double lambda = 0.0;
    std::vector<double> margins;  // |(lambda - B) u| - lambda |u| per test function, |u| = 1
    double min_margin = 0.0;
    double threshold = 0.0;       // -c_tol h
    bool pass = true;
};

/// margin(u) = |(lambda - op) u| - lambda |u| over n_functions random bumps
/// (the same bumps for every lambda).
std::vector<DissipativityReport> dissipativity_check(const SparseOperator& op, const std::vector<double>& lambdas,
                                                     int n_functions, std::uint64_t seed,
                                                     const DissipativityOptions& options = {});

/// Margin of a single function.
double dissipativity_margin(const SparseOperator& op, double lambda, const GridFunction& u, NormKind norm = NormKind::l1);

/// <J u, f_u>_h with f_u = |u|_1 sign(u), sign(0) = 0.
double duality_set_pairing(const SparseOperator& jr, const GridFunction& u);

}  // namespace levyfp
