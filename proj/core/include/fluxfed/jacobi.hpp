#pragma once

#include <vector>

#include "fluxfed/matrix.hpp"

namespace fluxfed {

struct EigenDecomposition {
    std::vector<double> values;  // descending
    Matrix vectors;              // column j pairs with values[j]
};

// Cyclic Jacobi for symmetric matrices. Sweeps the strict upper triangle in a
// fixed (row-major) order until every off-diagonal magnitude drops below tol;
// the identical operation sequence on identical input gives bit-identical
// output on every machine and thread count.
EigenDecomposition jacobi_eigen_symmetric(const Matrix& a, double tol = 1e-12,
                                          int max_sweeps = 100);

}  // namespace fluxfed
