#pragma once

#include <Eigen/Sparse>

#include "specopt/mesh.hpp"

namespace specopt {

// Thin wrapper over a symmetric sparse matrix. After Dirichlet elimination a
// constrained row/column holds only its diagonal entry: 1 for stiffness
// operators (keeps factorizations definite) and 0 for mass operators (so
// constrained dofs carry no spectral weight and produce no spurious pencil
// eigenvalues).
struct SparseSymOperator {
  Eigen::SparseMatrix<double> mat;

  SparseSymOperator() = default;
  explicit SparseSymOperator(Eigen::SparseMatrix<double> m) : mat(std::move(m)) {}

  int rows() const { return static_cast<int>(mat.rows()); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return mat * x; }

  // max |A - A^T| entry, for assembly sanity checks
  double symmetry_error() const;

  void eliminate_dirichlet(const DofMap& dofs, double diag_value);
};

}  // namespace specopt
