#pragma once

#include <numeric>
#include <vector>

#include "lfgam/bases.hpp"

namespace lfgam {

/// Row-wise Kronecker product of margin designs. Column index of a product
/// of margin columns (a_1, ..., a_d) is lexicographic with the first margin
/// varying slowest.
inline Matrix tensor_design(const std::vector<Matrix>& margins) {
    if (margins.empty()) throw Error(ErrorKind::Dimension, "tensor product needs at least one margin");
    const Eigen::Index n = margins.front().rows();
    for (const auto& m : margins)
        if (m.rows() != n)
            throw Error(ErrorKind::Dimension, "tensor margins have different row counts (" +
                                                  std::to_string(n) + " vs " + std::to_string(m.rows()) +
                                                  ")");
    Matrix out = margins.front();
    for (std::size_t j = 1; j < margins.size(); ++j) {
        const Matrix& next = margins[j];
        Matrix prod(n, out.cols() * next.cols());
        for (Eigen::Index a = 0; a < out.cols(); ++a)
            for (Eigen::Index b = 0; b < next.cols(); ++b)
                prod.col(a * next.cols() + b) = out.col(a).cwiseProduct(next.col(b));
        out = std::move(prod);
    }
    return out;
}

/// Single-row version of tensor_design, used when summing over matrix cells.
inline Eigen::RowVectorXd tensor_row(const std::vector<Eigen::RowVectorXd>& rows) {
    Eigen::RowVectorXd out = rows.front();
    for (std::size_t j = 1; j < rows.size(); ++j) {
        const auto& next = rows[j];
        Eigen::RowVectorXd prod(out.size() * next.size());
        for (Eigen::Index a = 0; a < out.size(); ++a)
            prod.segment(a * next.size(), next.size()) = out(a) * next;
        out = std::move(prod);
    }
    return out;
}

inline Matrix kronecker(const Matrix& A, const Matrix& B) {
    Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

/// One expanded penalty per margin: I (x) ... (x) S_j (x) ... (x) I, matching
/// the column ordering of tensor_design. Each carries its own smoothing
/// parameter.
inline std::vector<Matrix> tensor_penalties(const std::vector<Matrix>& margin_penalties) {
    for (const auto& S : margin_penalties)
        if (S.rows() != S.cols()) throw Error(ErrorKind::Dimension, "margin penalty must be square");
    std::vector<Matrix> out;
    out.reserve(margin_penalties.size());
    for (std::size_t j = 0; j < margin_penalties.size(); ++j) {
        Matrix acc = Matrix::Identity(1, 1);
        for (std::size_t m = 0; m < margin_penalties.size(); ++m) {
            const auto dim = margin_penalties[m].rows();
            acc = kronecker(acc, m == j ? margin_penalties[m] : Matrix::Identity(dim, dim));
        }
        out.push_back(std::move(acc));
    }
    return out;
}

inline int tensor_null_space_dim(const std::vector<int>& margin_null_dims) {
    return std::accumulate(margin_null_dims.begin(), margin_null_dims.end(), 1, std::multiplies<>());
}

} // namespace lfgam
