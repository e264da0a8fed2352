#pragma once

#include <vector>

#include "hmae/linalg.hpp"

namespace hmae {

struct EigenDecomposition {
  std::vector<double> values;  ///< descending
  Matrix vectors;              ///< column j pairs with values[j]
  int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for dense symmetric matrices. Rotates until the
/// largest off-diagonal magnitude drops below tol * ||a||_F.
/// Throws ValidationError when `a` holds a non-finite entry.
EigenDecomposition sym_eig(const SymMatrix& a, double tol = 1e-13);

}  // namespace hmae
