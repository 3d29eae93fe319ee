#pragma once

#include <Eigen/Dense>
#include <vector>

#include "specopt/eigensolver.hpp"
#include "specopt/problem.hpp"

namespace specopt {

// J(phi) = sum_r c_r lambda_{n_r} + gamma E(phi) + w_c (load . u_c).
// The eigenvalue indices are 1-based; weights are typically negative
// (maximization) with an optional positive compliance weight.
struct ObjectiveSpec {
  std::vector<int> eigen_indices;
  std::vector<double> weights;
  double gamma = 1e-4;
  double compliance_weight = 0.0;

  int num_modes() const;  // largest selected index (0 when purely geometric)
  void validate(const Problem& prob) const;
};

// Nodal dual coefficients of dJ/dphi and its parts, so that the pairing with
// a nodal variation eta is sum_n dual.row(n) . eta.row(n). Each part carries
// its objective weight; dual is their exact sum. Clamped rows are zero and
// vector-valued fields are tangentially projected (components sum to zero).
struct GradientField {
  Eigen::MatrixXd dual;
  Eigen::MatrixXd eigen_part, gl_part, compliance_part;

  // L2 norm of the Riesz representative under the lumped nodal weights
  double l2(const std::vector<double>& node_weight) const;
};

// One objective evaluation: value, reported parts, and the state solutions
// needed for the gradient.
struct Evaluation {
  double J = 0.0;
  double glandau = 0.0;     // E(phi), without the gamma factor
  double compliance = 0.0;  // load . u_c, without its weight
  std::vector<double> lambdas;  // selected eigenvalues in index order
  Spectrum spectrum;
  Eigen::VectorXd u_c;  // compliance displacement (size 0 when unused)
  bool near_degenerate = false;
};

// Interface energy E(phi) = int (eps/2)|grad phi|^2 + (1/eps) psi0(phi): the
// gradient term uses the assembled Laplacian, the potential term the lumped
// nodal rule (consistent with the pointwise obstacle projection). Throws if
// phi violates the simplex constraints beyond 1e-8 unless enforce_obstacle
// is cleared (penalty constraint mode).
double ginzburg_landau_energy(const Problem& prob, const PhaseField& phi,
                              bool enforce_obstacle = true);

// Dual of gamma * dE/dphi: gamma*eps*L*phi + (gamma/eps)*w_n*psi0'(phi_n).
Eigen::MatrixXd ginzburg_landau_gradient(const Problem& prob, const PhaseField& phi,
                                         double gamma);

// Dual of d lambda_r / dphi for an M-normalized eigenpair:
// int C'(phi) E(w):E(w) eta - lambda int rho'(phi) rho_spatial |w|^2 eta.
// Throws if the eigenvector is not M-normalized to 1e-8.
Eigen::MatrixXd eigenvalue_gradient_density(const Problem& prob, const PhaseField& phi,
                                            const MaterialSamples& samples,
                                            const EigenPair& pair);

// Dual of d(load . u_c)/dphi = -int C'(phi) E(u_c):E(u_c) eta.
Eigen::MatrixXd compliance_gradient_density(const Problem& prob, const PhaseField& phi,
                                            const MaterialSamples& samples,
                                            const Eigen::VectorXd& u_c);

// Reusable state across evaluations: eigensolver factorization pattern and
// warm starts, plus the assembled load vector. relax_obstacle lets the
// penalty constraint mode evaluate fields with small negative parts.
struct EvalWorkspace {
  EigenWorkspace eig;
  Eigen::VectorXd load;
  bool load_ready = false;
  double eig_tol = 1e-9;
  std::uint64_t seed = 42;
  bool relax_obstacle = false;
};

Evaluation evaluate_objective(const Problem& prob, const ObjectiveSpec& spec,
                              const PhaseField& phi, EvalWorkspace& ws);

// Full gradient assembled from an evaluation at the same phi.
GradientField total_gradient(const Problem& prob, const ObjectiveSpec& spec,
                             const PhaseField& phi, const Evaluation& eval);

}  // namespace specopt
