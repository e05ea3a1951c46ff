#include "levyfp/sparse_operator.hpp"

#include "levyfp/error.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <ostream>

namespace levyfp {

std::string_view to_string(OperatorPart part)
{
    switch (part) {
    case OperatorPart::A_r: return "A_r";
    case OperatorPart::I_r: return "I_r";
    case OperatorPart::J_r: return "J_r";
    case OperatorPart::A_r_star: return "A_r_star";
    case OperatorPart::I_r_star: return "I_r_star";
    case OperatorPart::J_r_star: return "J_r_star";
    case OperatorPart::L: return "L";
    case OperatorPart::L_star: return "L_star";
    case OperatorPart::custom: return "custom";
    }
    return "custom";
}

SparseOperator::SparseOperator(Grid grid, Matrix matrix, OperatorPart part, double r)
    : grid_(std::move(grid)), matrix_(std::move(matrix)), part_(part), r_(r)
{
    const auto n = static_cast<Eigen::Index>(grid_.size());
    if (matrix_.rows() != n || matrix_.cols() != n) {
        throw PreconditionError(fmt::format("operator is {}x{} on a grid of {} nodes", matrix_.rows(), matrix_.cols(), n));
    }
    matrix_.makeCompressed();
}

SparseOperator SparseOperator::zero(const Grid& grid, OperatorPart part, double r)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    return SparseOperator(grid, Matrix(n, n), part, r);
}

SparseOperator SparseOperator::from_triplets(const Grid& grid, const std::vector<Triplet>& triplets, OperatorPart part,
                                             double r)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    Matrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.prune(0.0);
    return SparseOperator(grid, std::move(m), part, r);
}

GridFunction SparseOperator::apply(const GridFunction& u) const
{
    if (!(u.grid == grid_)) throw PreconditionError("apply: grid mismatch");
    return GridFunction(grid_, matrix_ * u.values);
}

SparseOperator SparseOperator::transpose(OperatorPart part) const
{
    Matrix t = matrix_.transpose();
    return SparseOperator(grid_, std::move(t), part, r_);
}

Vec SparseOperator::column_sums() const
{
    Vec sums = Vec::Zero(matrix_.cols());
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        for (Matrix::InnerIterator it(matrix_, i); it; ++it) sums[it.col()] += it.value();
    }
    return sums;
}

Vec SparseOperator::row_sums() const
{
    Vec sums = Vec::Zero(matrix_.rows());
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        for (Matrix::InnerIterator it(matrix_, i); it; ++it) sums[i] += it.value();
    }
    return sums;
}

double SparseOperator::norm_l1() const
{
    Vec sums = Vec::Zero(matrix_.cols());
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        for (Matrix::InnerIterator it(matrix_, i); it; ++it) sums[it.col()] += std::abs(it.value());
    }
    return sums.size() ? sums.maxCoeff() : 0.0;
}

double SparseOperator::norm_linf() const
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        double row = 0.0;
        for (Matrix::InnerIterator it(matrix_, i); it; ++it) row += std::abs(it.value());
        worst = std::max(worst, row);
    }
    return worst;
}

void SparseOperator::write_coo(std::ostream& out) const
{
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
        for (Matrix::InnerIterator it(matrix_, i); it; ++it) {
            fmt::print(out, "{} {} {:.17g}\n", it.row(), it.col(), it.value());
        }
    }
}

SparseOperator add(const std::vector<const SparseOperator*>& terms, OperatorPart part)
{
    if (terms.empty()) throw PreconditionError("add: no operators");
    SparseOperator::Matrix sum = terms.front()->matrix();
    for (std::size_t k = 1; k < terms.size(); ++k) {
        if (!(terms[k]->grid() == terms.front()->grid())) throw PreconditionError("add: grid mismatch");
        sum += terms[k]->matrix();
    }
    return SparseOperator(terms.front()->grid(), std::move(sum), part, terms.front()->r());
}

}  // namespace levyfp
