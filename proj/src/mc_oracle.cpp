#include "levyfp/mc_oracle.hpp"

#include "levyfp/error.hpp"
#include "levyfp/levy_quadrature.hpp"
#include "levyfp/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace levyfp {

namespace {

constexpr double kMaxFlaggedFraction = 0.01;
constexpr double kKernelCutoff = 6.0;

// Law of the marks with |z| >= epsilon: categorical atoms, then the power density.
struct MarkSampler {
    std::vector<Atom> atoms;
    std::vector<double> cumulative;  // running atom mass
    double density_mass = 0.0;
    std::optional<PowerDensity> density;
    double eps = 0.0;
    int d = 1;

    double total() const { return (cumulative.empty() ? 0.0 : cumulative.back()) + density_mass; }

    Vec draw(Engine& rng) const
    {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double u = unit(rng) * total();
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it != cumulative.end()) return atoms[static_cast<std::size_t>(it - cumulative.begin())].z;

        const double beta = density->beta;
        const double lo = std::pow(eps, -beta);
        const double hi = std::isinf(density->z_max) ? 0.0 : std::pow(density->z_max, -beta);
        const double rho = std::pow(lo - unit(rng) * (lo - hi), -1.0 / beta);
        if (d == 1) {
            if (density->sided == Sidedness::one_sided) return Vec::Constant(1, rho);
            return Vec::Constant(1, unit(rng) < 0.5 ? -rho : rho);
        }
        return rho * unit_vector(rng, d);
    }
};

MarkSampler make_sampler(const LevyMeasure& measure, double eps)
{
    MarkSampler s;
    s.eps = eps;
    s.d = measure.d;
    double run = 0.0;
    for (const auto& atom : measure.atoms) {
        if (atom.z.norm() < eps) continue;
        run += atom.w;
        s.atoms.push_back(atom);
        s.cumulative.push_back(run);
    }
    if (measure.density && measure.density->z_max > eps) {
        s.density = measure.density;
        s.density_mass = measure.density->c * measure.surface_factor() *
                         power_integral(eps, measure.density->z_max, -1.0 - measure.density->beta);
    }
    return s;
}

bool finite(const Vec& v) { return v.allFinite(); }

}  // namespace

SampleSet simulate(const SdeModel& model, const LevyMeasure& measure, const InitialSampler& x0,
                   const McConfig& config)
{
    if (config.n_paths < 1) throw PreconditionError("simulate: n_paths must be >= 1");
    if (config.n_steps < 1) throw PreconditionError("simulate: n_steps must be >= 1");
    if (!(config.T > 0.0)) throw PreconditionError("simulate: T must be positive");
    if (!(config.epsilon > 0.0)) throw PreconditionError("simulate: epsilon must be positive");
    if (measure.d != model.d) throw PreconditionError("simulate: measure and model dimensions differ");

    const int d = model.d;
    const bool jumps = !model.jump_free && !measure.empty();
    MarkSampler marks;
    std::vector<QuadNode> compensator;
    SampleSet out;
    out.d = d;
    if (jumps) {
        marks = make_sampler(measure, config.epsilon);
        const QuadratureSplit split = split_measure(measure, config.epsilon, 0, std::numeric_limits<double>::infinity());
        for (const auto& node : split.outer) {
            if (node.z.norm() < 1.0) compensator.push_back(node);
        }
        out.dropped_moment = truncated_moment(measure, config.epsilon, 2.0);
        out.jump_rate = marks.total();
    }
    const double rate = out.jump_rate;
    const double dt = config.T / config.n_steps;

    auto drift = [&](const Vec& y) {
        Vec b = model.b(y);
        for (const auto& node : compensator) b -= node.w * model.p(y, node.z);
        return b;
    };

    const auto n = static_cast<std::size_t>(config.n_paths);
    std::vector<Vec> terminal(n);
    std::vector<char> flagged(n, 0);
    const std::size_t groups = config.antithetic ? (n + 1) / 2 : n;

    parallel_for(groups, [&](std::size_t g) {
        const std::size_t members = config.antithetic ? std::min<std::size_t>(2, n - 2 * g) : 1;
        for (std::size_t a = 0; a < members; ++a) {
            const std::size_t path = config.antithetic ? 2 * g + a : g;
            const double sign = a == 0 ? 1.0 : -1.0;
            Engine rng = make_engine(config.seed, g);
            std::normal_distribution<double> normal(0.0, 1.0);
            std::exponential_distribution<double> wait(rate > 0.0 ? rate : 1.0);

            Vec y = x0(rng);
            double next_jump = rate > 0.0 ? wait(rng) : std::numeric_limits<double>::infinity();
            double t = 0.0;
            bool ok = finite(y);
            auto diffuse = [&](double s) {
                if (s <= 0.0) return;
                Vec xi(model.noise_dim);
                for (int k = 0; k < model.noise_dim; ++k) xi[k] = sign * normal(rng);
                y += drift(y) * s + model.sigma(y) * (std::sqrt(s) * xi);
            };
            for (int step = 1; step <= config.n_steps && ok; ++step) {
                const double t_end = step == config.n_steps ? config.T : step * dt;
                while (next_jump < t_end && ok) {
                    diffuse(next_jump - t);
                    t = next_jump;
                    const Vec z = marks.draw(rng);
                    y += model.p(y, z);
                    next_jump += wait(rng);
                    ok = finite(y);
                }
                if (!ok) break;
                diffuse(t_end - t);
                t = t_end;
                ok = finite(y);
            }
            if (ok) {
                terminal[path] = std::move(y);
            } else {
                flagged[path] = 1;
            }
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (flagged[i]) {
            ++out.n_flagged;
        } else {
            out.points.push_back(std::move(terminal[i]));
        }
    }
    if (out.n_flagged > kMaxFlaggedFraction * config.n_paths) {
        throw PreconditionError(fmt::format("simulate: {} of {} paths produced non-finite states (limit 1%)",
                                            out.n_flagged, config.n_paths));
    }
    return out;
}

GridFunction kde_density(const SampleSet& samples, const Grid& grid, std::optional<double> bandwidth)
{
    const int d = grid.dim();
    if (samples.d != d) throw PreconditionError("kde_density: sample and grid dimensions differ");
    const std::size_t n = samples.points.size();
    if (n < 100) throw PreconditionError(fmt::format("kde_density: need at least 100 samples, got {}", n));
    if (bandwidth && !(*bandwidth > 0.0)) throw PreconditionError("kde_density: bandwidth must be positive");

    const double X = grid.half_width();
    const double h = grid.spacing();
    std::size_t inside = 0;
    for (const auto& p : samples.points) {
        if (p.lpNorm<Eigen::Infinity>() <= X) ++inside;
    }
    if (inside == 0) throw PreconditionError("kde_density: all samples lie outside the grid");

    Vec bw(d);
    for (int k = 0; k < d; ++k) {
        if (bandwidth) {
            bw[k] = *bandwidth;
            continue;
        }
        double mean = 0.0;
        for (const auto& p : samples.points) mean += p[k];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& p : samples.points) var += (p[k] - mean) * (p[k] - mean);
        var /= static_cast<double>(n - 1);
        bw[k] = 1.06 * std::sqrt(var) * std::pow(static_cast<double>(n), -0.2);
        if (!(bw[k] > 0.0)) bw[k] = h;
    }

    GridFunction u(grid);
    const int n_axis = grid.n_per_axis();
    std::vector<std::vector<std::pair<int, double>>> factors(static_cast<std::size_t>(d));
    for (const auto& p : samples.points) {
        bool empty = false;
        for (int k = 0; k < d; ++k) {
            auto& f = factors[static_cast<std::size_t>(k)];
            f.clear();
            const double reach = kKernelCutoff * bw[k];
            const int lo = std::max(0, static_cast<int>(std::ceil((p[k] - reach + X) / h)));
            const int hi = std::min(n_axis - 1, static_cast<int>(std::floor((p[k] + reach + X) / h)));
            for (int i = lo; i <= hi; ++i) {
                const double s = (grid.coord(i) - p[k]) / bw[k];
                f.emplace_back(i, std::exp(-0.5 * s * s));
            }
            if (f.empty()) empty = true;
        }
        if (empty) continue;
        // Tensor product over the axes.
        MultiIndex idx{0, 0, 0};
        std::array<std::size_t, 3> pos{0, 0, 0};
        while (true) {
            double w = 1.0;
            for (int k = 0; k < d; ++k) {
                const auto& [i, v] = factors[static_cast<std::size_t>(k)][pos[static_cast<std::size_t>(k)]];
                idx[static_cast<std::size_t>(k)] = i;
                w *= v;
            }
            u.values[static_cast<Eigen::Index>(grid.flat_index(idx))] += w;
            int k = d - 1;
            while (k >= 0 && ++pos[static_cast<std::size_t>(k)] == factors[static_cast<std::size_t>(k)].size()) {
                pos[static_cast<std::size_t>(k)] = 0;
                --k;
            }
            if (k < 0) break;
        }
    }
    const double mass = u.mass();
    if (!(mass > 0.0)) throw PreconditionError("kde_density: no kernel mass on the grid");
    u.values /= mass;
    return u;
}

double l1_distance(const GridFunction& u, const GridFunction& v)
{
    if (!(u.grid == v.grid)) throw PreconditionError("l1_distance: grid mismatch");
    return u.grid.cell_volume() * (u.values - v.values).lpNorm<1>();
}

void write_samples(std::ostream& out, const SampleSet& samples)
{
    for (const auto& p : samples.points) {
        for (Eigen::Index k = 0; k < p.size(); ++k) fmt::print(out, k == 0 ? "{:.17g}" : " {:.17g}", p[k]);
        out << '\n';
    }
}

}  // namespace levyfp
