#pragma once

// Reference values computed independently of the library's numerics.

#include "levyfp/grid.hpp"
#include "levyfp/sparse_operator.hpp"

#include <functional>

namespace oracle {

using levyfp::Vec;

double normal_pdf(double x, double mean, double sd);
double normal_cdf(double x, double mean, double sd);

/// Total variation distance (L1) of N(m1, sd^2) and N(m2, sd^2).
double l1_equal_variance_normals(double m1, double m2, double sd);

/// Law at time t of dX = -theta X dt + sigma dB started at N(m0, s0^2).
struct Gaussian1d {
    double mean = 0.0;
    double sd = 1.0;
};
Gaussian1d ou_law(double m0, double s0, double theta, double sigma, double t);

/// Inverse of y + y z = x for the geometric jump map.
inline double geometric_y(double x, double z) { return x / (1.0 + z); }
inline double geometric_m(double z) { return 1.0 / (1.0 + z); }

/// Dense copy of an operator's matrix.
Eigen::MatrixXd dense(const levyfp::SparseOperator& op);

/// Large-jump operator of p(y,z) = z for one atom sitting k nodes to the
/// right, written out explicitly: (J u)_i = w (u_{i-k} - u_i), u = 0 off grid.
Vec node_aligned_jump(const Vec& u, int k, double w);

/// Calls f for every vector in {-1, 0, 1}^n (3^n calls).
void for_each_sign_pattern(int n, const std::function<void(const Vec&)>& f);

/// Composite Simpson rule with n (even) panels.
double simpson(const std::function<double(double)>& f, double a, double b, int n);

}  // namespace oracle
