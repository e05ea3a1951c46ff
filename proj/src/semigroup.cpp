#include "levyfp/semigroup.hpp"

#include "levyfp/error.hpp"
#include "levyfp/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace levyfp {

namespace {

// Refinement gives up when the residual has not improved for this many sweeps.
constexpr int kStagnationWindow = 20;

double weighted_l1(const Grid& g, const Vec& v) { return g.cell_volume() * v.lpNorm<1>(); }

}  // namespace

ResolventSolver::ResolventSolver(const SparseOperator& L, double dt, double tol)
    : grid_(L.grid()), dt_(dt), tol_(tol)
{
    if (!(dt > 0.0)) throw PreconditionError("implicit Euler: dt must be positive");
    if (!(tol > 0.0)) throw PreconditionError("implicit Euler: tol must be positive");
    const auto n = static_cast<Eigen::Index>(L.size());
    Eigen::SparseMatrix<double> identity(n, n);
    identity.setIdentity();
    system_ = identity - dt * Eigen::SparseMatrix<double>(L.matrix());
    system_.makeCompressed();
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->analyzePattern(system_);
    lu_->factorize(system_);
    if (lu_->info() != Eigen::Success) {
        throw SolverError(fmt::format("implicit Euler: factorization of I - dt L failed ({})", lu_->lastErrorMessage()),
                          std::numeric_limits<double>::infinity());
    }
}

StepResult ResolventSolver::solve(const GridFunction& u) const
{
    if (!(u.grid == grid_)) throw PreconditionError("implicit Euler: grid mismatch");
    StepResult out;
    out.v = GridFunction(grid_);
    const double scale = u.norm_1();
    if (scale == 0.0) return out;

    Vec v = Vec::Zero(u.values.size());
    Vec res = u.values;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int it = 1; it <= kMaxIterations; ++it) {
        v += lu_->solve(res);
        res = u.values - system_ * v;
        const double r = weighted_l1(grid_, res);
        out.iterations = it;
        out.residual = r;
        if (!std::isfinite(r)) break;
        if (r <= tol_ * scale) {
            out.v.values = std::move(v);
            return out;
        }
        if (r < best) {
            best = r;
            since_best = 0;
        } else if (++since_best >= kStagnationWindow) {
            break;
        }
    }
    throw SolverError(fmt::format("implicit Euler: residual {:.3e} after {} iterations, target {:.3e}", out.residual,
                                  out.iterations, tol_ * scale),
                      out.residual);
}

StepResult step_implicit_euler(const SparseOperator& L, const GridFunction& u, double dt, double tol)
{
    return ResolventSolver(L, dt, tol).solve(u);
}

EvolutionReport evolve(const SparseOperator& L, const GridFunction& u0, double T, double dt,
                       const EvolveOptions& options)
{
    if (!(T > 0.0) || !(dt > 0.0)) throw PreconditionError("evolve: T and dt must be positive");
    if (!(u0.grid == L.grid())) throw PreconditionError("evolve: u0 lives on a different grid");
    if (u0.min() < 0.0) throw PreconditionError("evolve: u0 must be nonnegative");
    const int steps = std::max(1, static_cast<int>(std::lround(T / dt)));
    const double step = T / steps;

    GridFunction u = u0;
    if (options.normalize) {
        const double n1 = u.norm_1();
        if (!(n1 > 0.0)) throw PreconditionError("evolve: u0 is identically zero");
        u.values /= n1;
    }

    const Grid& g = u.grid;
    auto boundary_mass = [&](const GridFunction& f) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.boundary_distance(i) < options.boundary_cells) s += std::abs(f.values[static_cast<Eigen::Index>(i)]);
        }
        return s * g.cell_volume();
    };

    EvolutionReport rep;
    auto record = [&](double t, int iterations) {
        rep.times.push_back(t);
        rep.l1_norms.push_back(u.norm_1());
        rep.masses.push_back(u.mass());
        rep.min_values.push_back(u.min());
        rep.boundary_mass.push_back(boundary_mass(u));
        rep.iterations.push_back(iterations);
    };
    record(0.0, 0);

    const ResolventSolver solver(L, step, options.tol);
    for (int n = 1; n <= steps; ++n) {
        const double t = n * step;
        StepResult res;
        try {
            res = solver.solve(u);
        } catch (const SolverError& e) {
            throw SolverError(fmt::format("evolve: step {} (t = {:.6g}) failed: {}", n, t, e.what()), e.residual());
        }
        u = std::move(res.v);
        record(t, res.iterations);
    }
    rep.final = u;
    return rep;
}

// ---------------------------------------------------------------------------

GridFunction random_bump(const Grid& grid, Engine& rng, const BumpOptions& options, NormKind norm)
{
    const double h = grid.spacing();
    const double X = grid.half_width();
    const double wmin = options.min_width > 0.0 ? options.min_width : 4.0 * h;
    const double wmax = std::max(wmin, options.max_width > 0.0 ? options.max_width : X / 8.0);
    const double radius = options.center_radius > 0.0 ? options.center_radius : std::max(0.0, 0.5 * (X - 6.0 * wmax));
    const int d = grid.dim();

    std::uniform_int_distribution<int> n_terms(1, std::max(1, options.max_terms));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int terms = n_terms(rng);

    GridFunction u(grid);
    for (int t = 0; t < terms; ++t) {
        Vec center(d);
        for (int k = 0; k < d; ++k) center[k] = radius * (2.0 * unit(rng) - 1.0);
        const double width = wmin + (wmax - wmin) * unit(rng);
        const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
        const double amp = sign * (0.5 + unit(rng));
        const double cutoff = 6.0 * width;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Vec x = grid.node(i) - center;
            if (x.lpNorm<Eigen::Infinity>() > cutoff) continue;
            u.values[static_cast<Eigen::Index>(i)] += amp * std::exp(-0.5 * x.squaredNorm() / (width * width));
        }
    }
    const double n = norm == NormKind::l1 ? u.norm_1() : u.norm_inf();
    if (n > 0.0) u.values /= n;
    return u;
}

double dissipativity_margin(const SparseOperator& op, double lambda, const GridFunction& u, NormKind norm)
{
    GridFunction w = op.apply(u);
    w.values = lambda * u.values - w.values;
    if (norm == NormKind::l1) return w.norm_1() - lambda * u.norm_1();
    return w.norm_inf() - lambda * u.norm_inf();
}

std::vector<DissipativityReport> dissipativity_check(const SparseOperator& op, const std::vector<double>& lambdas,
                                                     int n_functions, std::uint64_t seed,
                                                     const DissipativityOptions& options)
{
    if (n_functions < 1) throw PreconditionError("dissipativity_check: n_functions must be >= 1");
    for (double l : lambdas) {
        if (!(l > 0.0)) throw PreconditionError("dissipativity_check: lambdas must be positive");
    }
    const auto n = static_cast<std::size_t>(n_functions);
    std::vector<std::vector<double>> margins(lambdas.size(), std::vector<double>(n));
    parallel_for(n, [&](std::size_t k) {
        Engine rng = make_engine(seed, k);
        const GridFunction u = random_bump(op.grid(), rng, options.bumps, options.norm);
        for (std::size_t j = 0; j < lambdas.size(); ++j) {
            margins[j][k] = dissipativity_margin(op, lambdas[j], u, options.norm);
        }
    });

    std::vector<DissipativityReport> out;
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        DissipativityReport rep;
        rep.lambda = lambdas[j];
        rep.margins = std::move(margins[j]);
        rep.min_margin = *std::min_element(rep.margins.begin(), rep.margins.end());
        rep.threshold = -options.c_tol * op.grid().spacing();
        rep.pass = rep.min_margin >= rep.threshold;
        out.push_back(std::move(rep));
    }
    return out;
}

double duality_set_pairing(const SparseOperator& jr, const GridFunction& u)
{
    const double n1 = u.norm_1();
    GridFunction f(u.grid);
    for (Eigen::Index i = 0; i < u.values.size(); ++i) {
        const double v = u.values[i];
        f.values[i] = v > 0.0 ? n1 : (v < 0.0 ? -n1 : 0.0);
    }
    return pairing(jr.apply(u), f);
}

}  // namespace levyfp
