#pragma once

#include <Eigen/Dense>

#include <string>

namespace levyfp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Renders a point as "a;b;c" (17 significant digits), the format used in CSV witness columns.
std::string format_point(const Vec& v);

}  // namespace levyfp
