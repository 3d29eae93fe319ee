#include "specopt/sparse_operator.hpp"

namespace specopt {

double SparseSymOperator::symmetry_error() const {
  Eigen::SparseMatrix<double> d = mat - Eigen::SparseMatrix<double>(mat.transpose());
  double e = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(d, k); it; ++it)
      e = std::max(e, std::abs(it.value()));
  return e;
}

void SparseSymOperator::eliminate_dirichlet(const DofMap& dofs, double diag_value) {
  for (int k = 0; k < mat.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(mat, k); it; ++it) {
      const int r = static_cast<int>(it.row());
      const int c = static_cast<int>(it.col());
      if (dofs.is_constrained(r) || dofs.is_constrained(c))
        it.valueRef() = (r == c) ? diag_value : 0.0;
    }
  }
}

}  // namespace specopt
