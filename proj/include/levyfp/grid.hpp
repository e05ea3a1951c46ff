#pragma once

#include "levyfp/types.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace levyfp {

using MultiIndex = std::array<int, 3>;

/// Uniform lattice x_i = -X + i h on [-X, X]^d, 1 <= d <= 3. Functions on the
/// grid are extended by zero outside the box.
class Grid {
public:
    Grid() = default;
    /// `spacing` must divide 2 * half_width (to 1e-9 relative).
    Grid(int d, double half_width, double spacing);

    int dim() const { return d_; }
    double half_width() const { return X_; }
    double spacing() const { return h_; }
    int n_per_axis() const { return n_; }
    std::size_t size() const { return N_; }
    double cell_volume() const { return cell_volume_; }

    double coord(int i) const { return -X_ + i * h_; }
    Vec node(std::size_t flat) const;
    MultiIndex multi_index(std::size_t flat) const;
    std::size_t flat_index(const MultiIndex& idx) const;
    bool contains(const MultiIndex& idx) const;

    /// Number of whole cells between the node and the nearest face of the box.
    int boundary_distance(std::size_t flat) const;

    /// Multilinear interpolation weights at `point`. Corners outside the grid
    /// are dropped (zero extension) and zero weights are omitted.
    void interpolation_weights(const Vec& point, std::vector<std::pair<std::size_t, double>>& out) const;

    bool operator==(const Grid& other) const;

private:
    int d_ = 1;
    double X_ = 1.0;
    double h_ = 1.0;
    int n_ = 3;
    std::size_t N_ = 3;
    double cell_volume_ = 1.0;
};

/// Nodal values of a function on a Grid.
struct GridFunction {
    Grid grid;
    Vec values;

    GridFunction() = default;
    explicit GridFunction(const Grid& g);
    GridFunction(const Grid& g, Vec v);

    static GridFunction sample(const Grid& g, const std::function<double(const Vec&)>& f);

    /// h^d sum |u_i|
    double norm_1() const;
    /// h^d sum u_i
    double mass() const;
    double norm_inf() const;
    double min() const;
    /// Smallest boundary_distance over nodes where |u| > threshold, or n if none.
    int support_margin(double threshold = 0.0) const;
};

/// h^d-weighted pairing <u, f>_h. Throws PreconditionError on grid mismatch.
double pairing(const GridFunction& u, const GridFunction& f);

}  // namespace levyfp
