#pragma once

#include <span>
#include <vector>

#include "odsd/matrix.hpp"

namespace odsd {

/// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted
/// descending; vectors are unit-norm columns in matching order. Each column is
/// oriented so its largest-magnitude entry is non-negative (magnitude ties go
/// to the lowest row index).
struct EigResult {
    std::vector<double> values;
    Matrix vectors;  // n x n, column j pairs with values[j]
};

/// Input must be square with max |M - M^T| <= 1e-10; it is symmetrized
/// internally as (M + M^T) / 2.
EigResult sym_eig(const Matrix& m);

/// Adjoint of sym_eig. The eigenvector rotation uses the damped gap factor
/// F_ij = (l_j - l_i) / ((l_j - l_i)^2 + eps) so near-repeated eigenvalues
/// stay finite. Returns the symmetric gradient wrt the input matrix.
Matrix sym_eig_backward(const EigResult& eig, std::span<const double> grad_values,
                        const Matrix& grad_vectors, double eps = 1e-8);

}  // namespace odsd
