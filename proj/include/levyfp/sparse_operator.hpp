#pragma once

#include "levyfp/grid.hpp"

#include <Eigen/Sparse>

#include <iosfwd>
#include <string_view>
#include <vector>

namespace levyfp {

enum class OperatorPart { A_r, I_r, J_r, A_r_star, I_r_star, J_r_star, L, L_star, custom };

std::string_view to_string(OperatorPart part);

/// N x N row-compressed matrix acting on grid functions of one Grid.
class SparseOperator {
public:
    using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
    using Triplet = Eigen::Triplet<double>;

    SparseOperator() = default;
    SparseOperator(Grid grid, Matrix matrix, OperatorPart part, double r = 0.0);

    static SparseOperator zero(const Grid& grid, OperatorPart part, double r = 0.0);
    /// Duplicate (row, col) entries are summed.
    static SparseOperator from_triplets(const Grid& grid, const std::vector<Triplet>& triplets, OperatorPart part,
                                        double r = 0.0);

    const Grid& grid() const { return grid_; }
    const Matrix& matrix() const { return matrix_; }
    OperatorPart part() const { return part_; }
    double r() const { return r_; }
    std::size_t size() const { return grid_.size(); }
    std::size_t nnz() const { return static_cast<std::size_t>(matrix_.nonZeros()); }

    GridFunction apply(const GridFunction& u) const;

    /// Plain matrix transpose. On a uniform grid the h^d weights of the
    /// pairing cancel, so <T u, f>_h = <u, transpose(T) f>_h exactly.
    SparseOperator transpose(OperatorPart part) const;

    /// Induced norm on (R^N, h^d |.|_1): largest absolute column sum.
    double norm_l1() const;
    /// Induced norm on (R^N, |.|_inf): largest absolute row sum.
    double norm_linf() const;
    Vec column_sums() const;
    Vec row_sums() const;

    /// Coordinate format, one "row col value" triple per line, 17 significant digits.
    void write_coo(std::ostream& out) const;

private:
    Grid grid_;
    Matrix matrix_;
    OperatorPart part_ = OperatorPart::custom;
    double r_ = 0.0;
};

/// Sum of operators on the same grid, tagged with `part`.
SparseOperator add(const std::vector<const SparseOperator*>& terms, OperatorPart part);

}  // namespace levyfp
