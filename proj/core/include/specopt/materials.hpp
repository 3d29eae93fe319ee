#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace specopt {

// Design field on the Gibbs simplex (components >= 0, summing to 1), one
// value set per node, void phase last. The two-phase case is stored as the
// scalar difference u = phi^1 - phi^2 in [-1,1] (single column); three or
// more phases store all components explicitly.
struct PhaseField {
  int n_phases = 2;
  Eigen::MatrixXd values;  // n_nodes x 1 (two-phase scalar view) or n_nodes x N

  static PhaseField scalar(Eigen::VectorXd u);
  static PhaseField vector(Eigen::MatrixXd v);

  int num_nodes() const { return static_cast<int>(values.rows()); }
  bool is_scalar() const { return values.cols() == 1; }

  double scalar_at(int node) const { return values(node, 0); }
  // Full component vector at a node (length n_phases) in either storage.
  Eigen::VectorXd vector_at(int node) const;
  // Scalar material-minus-void view phi^1 - phi^2 per node (n_phases == 2).
  Eigen::VectorXd scalar_view() const;

  // Largest violation of the box/simplex and sum constraints (diagnostic).
  double constraint_violation() const;
};

// Smooth part psi0 of the multi-obstacle potential; the indicator of the
// simplex is enforced by projection and never evaluated here.
// Prototype: psi0(phi) = (1 - |phi|^2)/2.
struct Potential {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> deriv;

  static Potential double_obstacle(int n_phases);

  // Scalar two-phase form psi0(u) = (1 - u^2)/2 for u in [-1,1].
  static double scalar_value(double u) { return 0.5 * (1.0 - u * u); }
  static double scalar_deriv(double u) { return -u; }
};

// Isotropic plane-strain tensor acting as C e = 2 mu e + lame tr(e) I,
// stored as mu2 = 2*mu and lame.
struct IsoTensor {
  double mu2 = 0.0;
  double lame = 0.0;
};

struct PhaseMaterial {
  double mu = 0.0;    // shear modulus
  double lame = 0.0;  // first Lame parameter
  double rho = 0.0;   // mass density
};

PhaseMaterial isotropic_material(double young, double poisson, double rho);

// Interpolated stiffness C(phi) and density rho(phi) across phases:
//   C(phi)   = sum_i C^i s(a_M([P phi]^i))  +  eps^k Cvoid s(a_V([P phi]^N))
//   rho(phi) = sum_i rho^i s(b_M([P phi]^i)) + eps^l rhovoid s(b_V([P phi]^N))
// with the quadratic interpolants a_M(t) = b_M(t) = t^2 and
// a_V(t) = b_V(t) = 1 - (t-1)^2, the C^1,1 value clamp s = sigma_omega, and
// P the affine projection restoring component sum 1. The void scale factors
// default to alpha_bar * (first material) and beta_bar * (its density).
struct MaterialModel {
  std::vector<PhaseMaterial> solids;  // the N-1 material phases
  PhaseMaterial void_shape;           // unscaled void stiffness/density shape
  double alpha_bar = 2e-4;            // void stiffness scale (times eps^k)
  double beta_bar = 1e-4;             // void density scale (times eps^l)
  int k_exp = 1;                      // stiffness exponent in eps
  int l_exp = 2;                      // density exponent in eps
  double omega = 0.1;                 // cutoff blend width
  double epsilon = 0.02;              // current interface width

  static MaterialModel two_phase(double young, double poisson, double rho,
                                 double alpha_bar, double beta_bar);

  int n_phases() const { return static_cast<int>(solids.size()) + 1; }
  double eps_k() const;
  double eps_l() const;

  // quadratic interpolants (0 at 0, 1 at 1, positive in between)
  static double interp_solid(double t) { return t * t; }
  static double interp_solid_deriv(double t) { return 2.0 * t; }
  static double interp_void(double t) { return 1.0 - (t - 1.0) * (t - 1.0); }
  static double interp_void_deriv(double t) { return -2.0 * (t - 1.0); }

  // C^1,1 clamp sigma_omega: identity on [0,1], cubic blends on (-omega,0)
  // and (1,1+omega), constant -omega / 1+omega outside.
  double cutoff(double v) const;
  double cutoff_deriv(double v) const;

  // Pointwise evaluation for a component vector of length n_phases.
  IsoTensor stiffness_at(const Eigen::VectorXd& phi) const;
  double density_at(const Eigen::VectorXd& phi, bool include_void = true) const;
  // Partial derivatives with respect to each component (P-chain rule applied);
  // outputs have length n_phases and sum to zero across components.
  void stiffness_deriv(const Eigen::VectorXd& phi, std::vector<IsoTensor>& d) const;
  void density_deriv(const Eigen::VectorXd& phi, Eigen::VectorXd& d) const;

  // Scalar two-phase fast path, u = phi^1 - phi^2 in [-1,1].
  IsoTensor stiffness_scalar(double u) const;
  IsoTensor stiffness_scalar_deriv(double u) const;
  double density_scalar(double u, bool include_void = true) const;
  double density_scalar_deriv(double u) const;
};

}  // namespace specopt
