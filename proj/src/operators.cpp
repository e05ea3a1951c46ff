#include "levyfp/operators.hpp"

#include "levyfp/error.hpp"
#include "levyfp/inverse_flow.hpp"
#include "levyfp/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <optional>
#include <vector>

namespace levyfp {

namespace {

using Triplet = SparseOperator::Triplet;

void require_matching_radius(double r, const QuadratureSplit& quad)
{
    if (!(r > 0.0)) throw PreconditionError("operator assembly: r must be positive");
    if (std::abs(r - quad.r) > 1e-14 * r) {
        throw PreconditionError(fmt::format("operator assembly: r = {} does not match the quadrature split r = {}", r, quad.r));
    }
}

std::optional<std::size_t> shifted(const Grid& g, MultiIndex idx, int axis, int offset)
{
    idx[static_cast<std::size_t>(axis)] += offset;
    if (!g.contains(idx)) return std::nullopt;
    return g.flat_index(idx);
}

std::optional<std::size_t> shifted2(const Grid& g, MultiIndex idx, int a1, int o1, int a2, int o2)
{
    idx[static_cast<std::size_t>(a1)] += o1;
    idx[static_cast<std::size_t>(a2)] += o2;
    if (!g.contains(idx)) return std::nullopt;
    return g.flat_index(idx);
}

// b(x) - sum over outer nodes with |z| < 1 of w p(x, z): the compensator of the
// r <= |z| < 1 jumps moves into the drift.
struct LocalCoefficients {
    std::vector<Mat> a;
    std::vector<Vec> drift;
};

LocalCoefficients local_coefficients(const SdeModel& model, const Grid& grid, const QuadratureSplit& quad)
{
    LocalCoefficients c;
    c.a.resize(grid.size());
    c.drift.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec x = grid.node(i);
        try {
            const Coefficients co = eval_coefficients(model, x);
            Vec drift = co.b;
            if (!model.jump_free) {
                for (const auto& node : quad.outer) {
                    if (node.z.norm() < 1.0) drift -= node.w * eval_jump(model, x, node.z);
                }
            }
            c.a[i] = co.a;
            c.drift[i] = std::move(drift);
        } catch (const CoefficientError& e) {
            throw AssemblyError(fmt::format("coefficient {} not finite at node {} (x = {}): {}", e.coefficient(), i,
                                            format_point(x), e.what()));
        }
    }
    return c;
}

// Adds c_k (f_{i+e_k} - f_{i-e_k}) / (2h) to row i.
void add_gradient(const Grid& grid, std::size_t row, const MultiIndex& idx, const Vec& coef,
                  std::vector<Triplet>& out)
{
    const double h2 = 2.0 * grid.spacing();
    for (int k = 0; k < grid.dim(); ++k) {
        if (coef[k] == 0.0) continue;
        if (auto up = shifted(grid, idx, k, +1)) out.emplace_back(row, *up, coef[k] / h2);
        if (auto dn = shifted(grid, idx, k, -1)) out.emplace_back(row, *dn, -coef[k] / h2);
    }
}

double grid_divergence(const SdeModel& model, const Vec& x, const Vec& z, double h)
{
    double div = 0.0;
    Vec xp = x;
    Vec xm = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        xp[k] = x[k] + h;
        xm[k] = x[k] - h;
        div += (eval_jump(model, xp, z)[k] - eval_jump(model, xm, z)[k]) / (2.0 * h);
        xp[k] = x[k];
        xm[k] = x[k];
    }
    return div;
}

// ---------------------------------------------------------------------------
// Preimage-cell remap

using Point2 = std::array<double, 2>;

// Convex polygon with room for a quadrilateral clipped by four half planes.
struct Polygon {
    std::array<Point2, 12> v{};
    std::size_t n = 0;

    Polygon() = default;
    Polygon(std::initializer_list<Point2> pts)
    {
        for (const auto& p : pts) push_back(p);
    }
    void push_back(const Point2& p) { v[n++] = p; }
    std::size_t size() const { return n; }
    const Point2& operator[](std::size_t i) const { return v[i]; }
    const Point2* begin() const { return v.data(); }
    const Point2* end() const { return v.data() + n; }
};

// Sutherland-Hodgman against the half plane sign * (p[axis] - bound) >= 0.
Polygon clip_half_plane(const Polygon& poly, int axis, double bound, double sign)
{
    Polygon out;
    const std::size_t n = poly.size();
    if (n == 0) return out;
    auto inside = [&](const Point2& p) { return sign * (p[static_cast<std::size_t>(axis)] - bound) >= 0.0; };
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& cur = poly[i];
        const Point2& prev = poly[(i + n - 1) % n];
        const bool in_cur = inside(cur);
        const bool in_prev = inside(prev);
        if (in_cur != in_prev) {
            const auto a = static_cast<std::size_t>(axis);
            const double t = (bound - prev[a]) / (cur[a] - prev[a]);
            Point2 hit{prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])};
            hit[a] = bound;
            out.push_back(hit);
        }
        if (in_cur) out.push_back(cur);
    }
    return out;
}

double polygon_area(const Polygon& poly)
{
    double twice = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2& p = poly[i];
        const Point2& q = poly[(i + 1) % poly.size()];
        twice += p[0] * q[1] - q[0] * p[1];
    }
    return 0.5 * std::abs(twice);
}

// Face coordinate xi_f = -X - h/2 + f h, f = 0..n.
double face(const Grid& g, int f) { return -g.half_width() - 0.5 * g.spacing() + f * g.spacing(); }

// Displacement -q(x, z) of the preimage of x, with the node named on failure.
Vec face_shift(const SdeModel& model, const Vec& x, const Vec& z, double tol)
{
    try {
        return -solve_inverse(model, x, z, tol).q;
    } catch (const Error& e) {
        throw AssemblyError(fmt::format("inverse flow failed at cell face x = {}, z = {}: {}", format_point(x),
                                        format_point(z), e.what()));
    }
}

// Adds w (|y(cell_i) ∩ cell_l| / h^d - [l = i]) for every row i. Overlaps are
// computed in coordinates relative to cell i so the O(|q|) differences keep
// their relative precision.
void remap_conservative(const SdeModel& model, const Grid& grid, const Vec& z, double w, double tol,
                        std::vector<Triplet>& out)
{
    const int n = grid.n_per_axis();
    const double h = grid.spacing();

    if (grid.dim() == 1) {
        std::vector<double> shift(static_cast<std::size_t>(n) + 1);
        for (int f = 0; f <= n; ++f) shift[static_cast<std::size_t>(f)] = face_shift(model, Vec::Constant(1, face(grid, f)), z, tol)[0];
        for (int i = 0; i < n; ++i) {
            // Preimage of cell i is [a, b] relative to its left face.
            const double da = shift[static_cast<std::size_t>(i)];
            const double db = shift[static_cast<std::size_t>(i) + 1];
            const double a = da;
            const double b = h + db;
            if (!(b > a)) {
                throw AssemblyError(fmt::format("preimage of cell {} is not an interval for z = {}", i, format_point(z)));
            }
            const int l0 = std::max(0, i + static_cast<int>(std::floor(a / h)));
            const int l1 = std::min(n - 1, i + static_cast<int>(std::floor(b / h)));
            bool self = false;
            for (int l = l0; l <= l1; ++l) {
                // Written so the cell width cancels exactly for the adjacent
                // cells; the shifts can be far below the spacing.
                const int k = l - i;
                const double lo = da - k * h;
                const double hi = db - k * h;
                double overlap;
                if (hi >= 0.0) {
                    overlap = lo <= 0.0 ? h : (k + 1) * h - da;
                } else {
                    overlap = lo <= 0.0 ? db + (1 - k) * h : db - da + h;
                }
                if (!(overlap > 0.0)) continue;
                if (l == i) {
                    out.emplace_back(i, i, w * (std::min(db, 0.0) - std::max(da, 0.0)) / h);
                    self = true;
                } else {
                    out.emplace_back(i, l, w * overlap / h);
                }
            }
            if (!self) out.emplace_back(i, i, -w);
        }
        return;
    }

    if (grid.dim() != 2) {
        throw PreconditionError("conservative remap is implemented for d <= 2; use the interpolate scheme in d = 3");
    }
    const auto stride = static_cast<std::size_t>(n) + 1;
    std::vector<Point2> shift(stride * stride);
    for (int a = 0; a <= n; ++a) {
        for (int b = 0; b <= n; ++b) {
            const Vec s = face_shift(model, Vec{{face(grid, a), face(grid, b)}}, z, tol);
            shift[static_cast<std::size_t>(a) * stride + static_cast<std::size_t>(b)] = {s[0], s[1]};
        }
    }
    const double cell_area = h * h;
    for (int i1 = 0; i1 < n; ++i1) {
        for (int i2 = 0; i2 < n; ++i2) {
            auto vertex = [&](int a, int b) {
                const Point2& s = shift[static_cast<std::size_t>(a) * stride + static_cast<std::size_t>(b)];
                return Point2{(a - i1) * h + s[0], (b - i2) * h + s[1]};
            };
            const Polygon quad{vertex(i1, i2), vertex(i1 + 1, i2), vertex(i1 + 1, i2 + 1), vertex(i1, i2 + 1)};
            double xmin = quad[0][0], xmax = quad[0][0], ymin = quad[0][1], ymax = quad[0][1];
            for (const auto& p : quad) {
                xmin = std::min(xmin, p[0]);
                xmax = std::max(xmax, p[0]);
                ymin = std::min(ymin, p[1]);
                ymax = std::max(ymax, p[1]);
            }
            const int la0 = std::max(0, i1 + static_cast<int>(std::floor(xmin / h)));
            const int la1 = std::min(n - 1, i1 + static_cast<int>(std::floor(xmax / h)));
            const int lb0 = std::max(0, i2 + static_cast<int>(std::floor(ymin / h)));
            const int lb1 = std::min(n - 1, i2 + static_cast<int>(std::floor(ymax / h)));
            const std::size_t row = grid.flat_index({i1, i2, 0});
            double self = 0.0;
            for (int la = la0; la <= la1; ++la) {
                for (int lb = lb0; lb <= lb1; ++lb) {
                    const double x0 = (la - i1) * h;
                    const double y0 = (lb - i2) * h;
                    Polygon clipped = clip_half_plane(quad, 0, x0, +1.0);
                    clipped = clip_half_plane(clipped, 0, x0 + h, -1.0);
                    clipped = clip_half_plane(clipped, 1, y0, +1.0);
                    clipped = clip_half_plane(clipped, 1, y0 + h, -1.0);
                    if (clipped.size() < 3) continue;
                    const double area = polygon_area(clipped);
                    if (!(area > 0.0)) continue;
                    if (la == i1 && lb == i2) {
                        self = area;
                    } else {
                        out.emplace_back(row, grid.flat_index({la, lb, 0}), w * area / cell_area);
                    }
                }
            }
            out.emplace_back(row, row, w * (self / cell_area - 1.0));
        }
    }
}

// Builds an operator row by row in parallel. `row(i, out)` appends entries of
// row i; duplicates are summed within the row in insertion order.
template <class RowFn>
SparseOperator assemble_by_rows(const Grid& grid, OperatorPart part, double r, RowFn&& row)
{
    std::vector<std::vector<Triplet>> rows(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        std::vector<Triplet> t;
        row(i, t);
        std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) { return a.col() < b.col(); });
        auto& merged = rows[i];
        for (const auto& e : t) {
            if (!merged.empty() && merged.back().col() == e.col()) {
                merged.back() = Triplet(e.row(), e.col(), merged.back().value() + e.value());
            } else {
                merged.push_back(e);
            }
        }
    });
    std::size_t total = 0;
    for (const auto& r_i : rows) total += r_i.size();
    std::vector<Triplet> all;
    all.reserve(total);
    for (auto& r_i : rows) {
        all.insert(all.end(), r_i.begin(), r_i.end());
        std::vector<Triplet>().swap(r_i);
    }
    return SparseOperator::from_triplets(grid, all, part, r);
}

}  // namespace

// ---------------------------------------------------------------------------

SparseOperator assemble_Ar(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad)
{
    require_matching_radius(r, quad);
    if (model.d != grid.dim()) throw PreconditionError("assemble_Ar: model and grid dimensions differ");
    const LocalCoefficients c = local_coefficients(model, grid, quad);
    const double h = grid.spacing();
    const double inv_h2 = 1.0 / (h * h);
    const int d = grid.dim();

    std::vector<Triplet> t;
    t.reserve(grid.size() * static_cast<std::size_t>(1 + 4 * d + 2 * d * d));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const MultiIndex idx = grid.multi_index(i);
        for (int k = 0; k < d; ++k) {
            // 1/2 d_k d_k (a_kk u), coefficients taken at the column node.
            t.emplace_back(i, i, -c.a[i](k, k) * inv_h2);
            for (int s : {-1, +1}) {
                if (auto nb = shifted(grid, idx, k, s)) {
                    t.emplace_back(i, *nb, 0.5 * c.a[*nb](k, k) * inv_h2);
                    // -d_k (drift_k u)
                    t.emplace_back(i, *nb, -s * c.drift[*nb][k] / (2.0 * h));
                }
            }
            for (int l = k + 1; l < d; ++l) {
                // 1/2 (d_k d_l + d_l d_k)(a_kl u), 4-point cross stencil.
                for (int s : {-1, +1}) {
                    for (int q : {-1, +1}) {
                        if (auto nb = shifted2(grid, idx, k, s, l, q)) {
                            t.emplace_back(i, *nb, s * q * c.a[*nb](k, l) * 0.25 * inv_h2);
                        }
                    }
                }
            }
        }
    }
    return SparseOperator::from_triplets(grid, t, OperatorPart::A_r, r);
}

SparseOperator assemble_Ar_star(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad)
{
    require_matching_radius(r, quad);
    if (model.d != grid.dim()) throw PreconditionError("assemble_Ar_star: model and grid dimensions differ");
    const LocalCoefficients c = local_coefficients(model, grid, quad);
    const double h = grid.spacing();
    const double inv_h2 = 1.0 / (h * h);
    const int d = grid.dim();

    std::vector<Triplet> t;
    t.reserve(grid.size() * static_cast<std::size_t>(1 + 4 * d + 2 * d * d));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const MultiIndex idx = grid.multi_index(i);
        const Mat& a = c.a[i];
        const Vec& drift = c.drift[i];
        for (int k = 0; k < d; ++k) {
            t.emplace_back(i, i, -a(k, k) * inv_h2);
            for (int s : {-1, +1}) {
                if (auto nb = shifted(grid, idx, k, s)) {
                    t.emplace_back(i, *nb, 0.5 * a(k, k) * inv_h2 + s * drift[k] / (2.0 * h));
                }
            }
            for (int l = k + 1; l < d; ++l) {
                for (int s : {-1, +1}) {
                    for (int q : {-1, +1}) {
                        if (auto nb = shifted2(grid, idx, k, s, l, q)) {
                            t.emplace_back(i, *nb, s * q * a(k, l) * 0.25 * inv_h2);
                        }
                    }
                }
            }
        }
    }
    return SparseOperator::from_triplets(grid, t, OperatorPart::A_r_star, r);
}

SparseOperator assemble_Ir(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad,
                           const AssemblyOptions& options)
{
    require_matching_radius(r, quad);
    if (model.d != grid.dim()) throw PreconditionError("assemble_Ir: model and grid dimensions differ");
    const double r0 = admissible_radius(model);
    if (!(r < r0)) {
        throw PreconditionError(fmt::format("assemble_Ir: r = {:.6g} must be below r0 = 1/(8dK) = {:.6g}", r, r0));
    }
    if (model.jump_free || quad.inner.empty()) return SparseOperator::zero(grid, OperatorPart::I_r, r);

    // With the remap terms collected, the row reduces to
    //   w [R u]_i - w u_i + w p Du_i + w div_x p u_i        (conservative)
    //   w m [u(x_i - q)] + w p Du_i + w (div_x p - 1) u_i   (interpolate)
    // since the m q and -q m gradient terms and the +-m diagonal terms cancel.
    const double h = grid.spacing();
    // One matrix per quadrature node, built in parallel batches and summed in
    // node order so the result does not depend on the thread count.
    auto node_matrix = [&](const QuadNode& node) {
        const Vec& z = node.z;
        const double w = node.w;
        std::vector<Triplet> t;
        std::vector<std::pair<std::size_t, double>> weights;
        try {
            if (options.remap == RemapScheme::conservative) {
                remap_conservative(model, grid, z, w, options.inverse_tol, t);
            }
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const Vec x = grid.node(i);
                const MultiIndex idx = grid.multi_index(i);
                if (options.remap == RemapScheme::interpolate) {
                    InverseFlowResult flow;
                    try {
                        flow = solve_inverse(model, x, z, options.inverse_tol);
                    } catch (const Error& e) {
                        throw AssemblyError(fmt::format("inverse flow failed at node {} (x = {}), z = {}: {}", i,
                                                        format_point(x), format_point(z), e.what()));
                    }
                    grid.interpolation_weights(x - flow.q, weights);
                    for (const auto& [col, c] : weights) t.emplace_back(i, col, w * flow.m * c);
                    t.emplace_back(i, i, -w);
                }
                add_gradient(grid, i, idx, w * eval_jump(model, x, z), t);
                t.emplace_back(i, i, w * grid_divergence(model, x, z, h));
            }
        } catch (const CoefficientError& e) {
            throw AssemblyError(fmt::format("I_r assembly at z = {}: {}", format_point(z), e.what()));
        }
        const auto n = static_cast<Eigen::Index>(grid.size());
        SparseOperator::Matrix m(n, n);
        m.setFromTriplets(t.begin(), t.end());
        return m;
    };

    constexpr std::size_t kBatch = 16;
    const auto n = static_cast<Eigen::Index>(grid.size());
    SparseOperator::Matrix total(n, n);
    std::vector<SparseOperator::Matrix> parts(std::min(kBatch, quad.inner.size()));
    for (std::size_t start = 0; start < quad.inner.size(); start += kBatch) {
        const std::size_t count = std::min(kBatch, quad.inner.size() - start);
        parallel_for(count, [&](std::size_t k) { parts[k] = node_matrix(quad.inner[start + k]); });
        for (std::size_t k = 0; k < count; ++k) {
            total += parts[k];
            parts[k] = SparseOperator::Matrix();
        }
    }
    total.prune(0.0);
    return SparseOperator(grid, std::move(total), OperatorPart::I_r, r);
}

SparseOperator assemble_Ir_star(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad)
{
    require_matching_radius(r, quad);
    if (model.d != grid.dim()) throw PreconditionError("assemble_Ir_star: model and grid dimensions differ");
    if (model.jump_free || quad.inner.empty()) return SparseOperator::zero(grid, OperatorPart::I_r_star, r);

    return assemble_by_rows(grid, OperatorPart::I_r_star, r, [&](std::size_t i, std::vector<Triplet>& t) {
        std::vector<std::pair<std::size_t, double>> weights;
        const Vec x = grid.node(i);
        const MultiIndex idx = grid.multi_index(i);
        for (const auto& node : quad.inner) {
            Vec p;
            try {
                p = eval_jump(model, x, node.z);
            } catch (const CoefficientError& e) {
                throw AssemblyError(fmt::format("I_r* assembly at node {}: {}", i, e.what()));
            }
            grid.interpolation_weights(x + p, weights);
            for (const auto& [col, c] : weights) t.emplace_back(i, col, node.w * c);
            t.emplace_back(i, i, -node.w);
            add_gradient(grid, i, idx, -node.w * p, t);
        }
    });
}

SparseOperator assemble_Jr_star(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad)
{
    require_matching_radius(r, quad);
    if (model.d != grid.dim()) throw PreconditionError("assemble_Jr_star: model and grid dimensions differ");
    if (model.jump_free || quad.outer.empty()) return SparseOperator::zero(grid, OperatorPart::J_r_star, r);

    return assemble_by_rows(grid, OperatorPart::J_r_star, r, [&](std::size_t i, std::vector<Triplet>& t) {
        std::vector<std::pair<std::size_t, double>> weights;
        const Vec y = grid.node(i);
        for (const auto& node : quad.outer) {
            Vec p;
            try {
                p = eval_jump(model, y, node.z);
            } catch (const CoefficientError& e) {
                throw AssemblyError(fmt::format("J_r* assembly at node {}: {}", i, e.what()));
            }
            grid.interpolation_weights(y + p, weights);
            for (const auto& [col, c] : weights) t.emplace_back(i, col, node.w * c);
            t.emplace_back(i, i, -node.w);
        }
    });
}

SparseOperator assemble_Jr(const SparseOperator& jr_star)
{
    return jr_star.transpose(OperatorPart::J_r);
}

AssembledOperators assemble_full(const SdeModel& model, const Grid& grid, double r, const QuadratureSplit& quad,
                                 const AssemblyOptions& options)
{
    AssembledOperators ops;
    ops.A_r = assemble_Ar(model, grid, r, quad);
    ops.I_r = assemble_Ir(model, grid, r, quad, options);
    ops.J_r_star = assemble_Jr_star(model, grid, r, quad);
    ops.J_r = assemble_Jr(ops.J_r_star);
    ops.A_r_star = assemble_Ar_star(model, grid, r, quad);
    ops.I_r_star = assemble_Ir_star(model, grid, r, quad);
    ops.L = add({&ops.A_r, &ops.I_r, &ops.J_r}, OperatorPart::L);
    ops.L_star = add({&ops.A_r_star, &ops.I_r_star, &ops.J_r_star}, OperatorPart::L_star);
    return ops;
}

double duality_gap(const SparseOperator& part, const SparseOperator& star, const GridFunction& u,
                   const GridFunction& f)
{
    return std::abs(pairing(part.apply(u), f) - pairing(u, star.apply(f)));
}

double max_jump_reach(const SdeModel& model, const QuadratureSplit& quad, const GridFunction& u, double threshold)
{
    if (model.jump_free) return 0.0;
    double reach = 0.0;
    for (std::size_t i = 0; i < u.grid.size(); ++i) {
        if (!(std::abs(u.values[static_cast<Eigen::Index>(i)]) > threshold)) continue;
        const Vec x = u.grid.node(i);
        for (const auto* nodes : {&quad.inner, &quad.outer}) {
            for (const auto& node : *nodes) reach = std::max(reach, eval_jump(model, x, node.z).norm());
        }
    }
    return reach;
}

void require_support_margin(const GridFunction& u, int cells, const char* who)
{
    const int margin = u.support_margin();
    if (margin < cells) {
        throw PreconditionError(fmt::format("{}: support comes within {} cells of the boundary, need at least {}", who,
                                            margin, cells));
    }
}

}  // namespace levyfp
