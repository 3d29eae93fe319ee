#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "specopt/sparse_operator.hpp"

namespace specopt {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EigenPair {
  double lambda = 0.0;
  Eigen::VectorXd w;       // M-normalized, zeros on constrained dofs
  double residual = 0.0;   // ||K w - lambda M w|| / (||K w|| + lambda ||M w||)
  bool near_degenerate = false;
};

struct Spectrum {
  std::vector<EigenPair> pairs;  // ascending eigenvalues
  int lanczos_dim = 0;
  int restarts = 0;

  // 1-based accessor matching the selection indices n_r
  double lambda(int index1) const { return pairs.at(index1 - 1).lambda; }
  const Eigen::VectorXd& mode(int index1) const { return pairs.at(index1 - 1).w; }
};

// Reusable reduction to free dofs plus the Cholesky factorization of the
// reduced stiffness. Free dofs are detected from the mass diagonal (Dirichlet
// elimination writes zeros there). The sparsity pattern is analyzed once.
struct EigenWorkspace {
  std::vector<int> full2free, free2full;
  Eigen::SparseMatrix<double> K_ff, M_ff;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  bool pattern_ready = false;
  // start vector carried over from the previous solve (free dofs); greatly
  // shortens the Lanczos run when the pencil changes only slightly
  Eigen::VectorXd warm_start;

  void build_free_set(const SparseSymOperator& M);
  void factorize(const SparseSymOperator& K);
  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;
  Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const;
  // Solves K u = rhs on the free dofs of the last factorized stiffness.
  Eigen::VectorXd solve_full(const Eigen::VectorXd& rhs) const;
};

// Smallest k eigenpairs of K w = lambda M w by shift-invert Lanczos at
// shift 0 with full M-reorthogonalization, deterministic start vector from
// the given seed. Near-degenerate neighbours (gap < 1e-8 relative) are
// flagged on both pairs.
Spectrum solve_generalized(const SparseSymOperator& K, const SparseSymOperator& M,
                           int k, double tol = 1e-9, std::uint64_t seed = 42,
                           EigenWorkspace* ws = nullptr);

double rayleigh_quotient(const SparseSymOperator& K, const SparseSymOperator& M,
                         const Eigen::VectorXd& w);

// Fraction of the modal mass carried by the material phases:
// (w^T M_material w) / (w^T M w).
double material_fraction(const Eigen::VectorXd& w, const SparseSymOperator& M_material,
                         const SparseSymOperator& M);

}  // namespace specopt
