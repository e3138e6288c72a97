#pragma once

#include "bgan/netcore.hpp"

namespace bgan {

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Stops once the
/// off-diagonal Frobenius norm falls below tol times the matrix norm.
SymmetricEigen jacobi_eigen(const Matrix& S, double tol = 1e-13, int max_sweeps = 100);

}  // namespace bgan
