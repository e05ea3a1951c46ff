#include "levyfp/grid.hpp"

#include "levyfp/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace levyfp {

Grid::Grid(int d, double half_width, double spacing) : d_(d), X_(half_width), h_(spacing)
{
    if (d < 1 || d > 3) throw PreconditionError(fmt::format("grid dimension must be 1..3, got {}", d));
    if (!(spacing > 0.0)) throw PreconditionError("grid spacing h must be positive");
    if (!(half_width > 0.0)) throw PreconditionError("grid half width X must be positive");
    const double cells = 2.0 * half_width / spacing;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * cells || rounded < 2.0) {
        throw PreconditionError(fmt::format("spacing h = {} must divide 2X = {} into at least 2 cells", spacing,
                                            2.0 * half_width));
    }
    n_ = static_cast<int>(rounded) + 1;
    N_ = 1;
    for (int k = 0; k < d_; ++k) N_ *= static_cast<std::size_t>(n_);
    cell_volume_ = std::pow(h_, d_);
}

Vec Grid::node(std::size_t flat) const
{
    const MultiIndex idx = multi_index(flat);
    Vec x(d_);
    for (int k = 0; k < d_; ++k) x[k] = coord(idx[static_cast<std::size_t>(k)]);
    return x;
}

MultiIndex Grid::multi_index(std::size_t flat) const
{
    MultiIndex idx{0, 0, 0};
    for (int k = d_ - 1; k >= 0; --k) {
        idx[static_cast<std::size_t>(k)] = static_cast<int>(flat % static_cast<std::size_t>(n_));
        flat /= static_cast<std::size_t>(n_);
    }
    return idx;
}

std::size_t Grid::flat_index(const MultiIndex& idx) const
{
    std::size_t flat = 0;
    for (int k = 0; k < d_; ++k) flat = flat * static_cast<std::size_t>(n_) + static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
    return flat;
}

bool Grid::contains(const MultiIndex& idx) const
{
    for (int k = 0; k < d_; ++k) {
        const int i = idx[static_cast<std::size_t>(k)];
        if (i < 0 || i >= n_) return false;
    }
    return true;
}

int Grid::boundary_distance(std::size_t flat) const
{
    const MultiIndex idx = multi_index(flat);
    int dist = n_;
    for (int k = 0; k < d_; ++k) {
        const int i = idx[static_cast<std::size_t>(k)];
        dist = std::min({dist, i, n_ - 1 - i});
    }
    return dist;
}

void Grid::interpolation_weights(const Vec& point, std::vector<std::pair<std::size_t, double>>& out) const
{
    out.clear();
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int k = 0; k < d_; ++k) {
        const double t = (point[k] + X_) / h_;
        if (!(t > -1.0 && t < n_)) return;  // entirely outside: all corners dropped
        const double fl = std::floor(t);
        base[static_cast<std::size_t>(k)] = static_cast<int>(fl);
        frac[static_cast<std::size_t>(k)] = t - fl;
    }
    const int corners = 1 << d_;
    for (int c = 0; c < corners; ++c) {
        MultiIndex idx{0, 0, 0};
        double w = 1.0;
        for (int k = 0; k < d_; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const bool upper = (c >> k) & 1;
            idx[ku] = base[ku] + (upper ? 1 : 0);
            w *= upper ? frac[ku] : 1.0 - frac[ku];
        }
        if (w == 0.0 || !contains(idx)) continue;
        out.emplace_back(flat_index(idx), w);
    }
}

bool Grid::operator==(const Grid& other) const
{
    return d_ == other.d_ && n_ == other.n_ && X_ == other.X_ && h_ == other.h_;
}

// ---------------------------------------------------------------------------

GridFunction::GridFunction(const Grid& g) : grid(g), values(Vec::Zero(static_cast<Eigen::Index>(g.size()))) {}

GridFunction::GridFunction(const Grid& g, Vec v) : grid(g), values(std::move(v))
{
    if (values.size() != static_cast<Eigen::Index>(g.size())) {
        throw PreconditionError(fmt::format("grid function has {} values for a grid of {} nodes", values.size(),
                                            g.size()));
    }
}

GridFunction GridFunction::sample(const Grid& g, const std::function<double(const Vec&)>& f)
{
    GridFunction u(g);
    for (std::size_t i = 0; i < g.size(); ++i) u.values[static_cast<Eigen::Index>(i)] = f(g.node(i));
    return u;
}

double GridFunction::norm_1() const { return grid.cell_volume() * values.cwiseAbs().sum(); }
double GridFunction::mass() const { return grid.cell_volume() * values.sum(); }
double GridFunction::norm_inf() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
double GridFunction::min() const { return values.size() ? values.minCoeff() : 0.0; }

int GridFunction::support_margin(double threshold) const
{
    int margin = grid.n_per_axis();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(values[static_cast<Eigen::Index>(i)]) > threshold) margin = std::min(margin, grid.boundary_distance(i));
    }
    return margin;
}

double pairing(const GridFunction& u, const GridFunction& f)
{
    if (!(u.grid == f.grid)) throw PreconditionError("pairing: grid mismatch");
    return u.grid.cell_volume() * u.values.dot(f.values);
}

}  // namespace levyfp
