#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <vector>

#include "specopt/objective.hpp"
#include "specopt/problem.hpp"

namespace specopt {

// Minimal transition energy between two pure phases: the geodesic length of
// a simplex path from e_i to e_j in the degenerate metric sqrt(2 psi0). This
// is the perimeter weight per unit interface length in the sharp limit.
struct TransitionConstant {
  int i = 0, j = 1;            // phase pair, zero-based
  double sigma = 0.0;          // geodesic length
  double profile_energy = 0.0; // int |d/dz profile|^2, equals sigma at optimum
  Eigen::MatrixXd path;        // discretized geodesic, one simplex point per row
};

// Scalar two-phase convention sigma = int_{-1}^{1} sqrt(2 psi0(u)) du. The
// substitution u = sin(theta) removes the square-root endpoint singularity,
// leaving a smooth integrand for the composite rule.
TransitionConstant transition_constant_scalar(
    const std::function<double(double)>& psi0 = [](double u) {
      return Potential::scalar_value(u);
    });

// General pair on the n-phase simplex: shortest path on a barycentric lattice
// (subdivision `lattice` per edge) seeded into an elastic smoothing pass with
// `path_points` movable points. Throws when the smoothing fails to settle.
TransitionConstant transition_constant(const Potential& psi0, int n_phases,
                                       int i, int j, int lattice = 48,
                                       int path_points = 160);

// Oriented zero-level polyline of a nodal scalar field: the material side
// (u >= level) lies to the left of the traversal direction.
struct InterfacePolyline {
  Eigen::Matrix<double, Eigen::Dynamic, 2> pts;
  bool closed = false;
  // filled by refine_with_geometry:
  Eigen::Matrix<double, Eigen::Dynamic, 2> normal;  // unit, material -> void
  Eigen::VectorXd kappa;  // signed curvature kappa = -div_Gamma(normal)

  double length() const;
};

// Marching squares over the cell grid with linear edge interpolation. Saddle
// cells are disambiguated by the corner average. Chains are closed loops or
// end on the domain boundary.
std::vector<InterfacePolyline> extract_interfaces(const StructuredMesh& mesh,
                                                  const Eigen::VectorXd& u,
                                                  double level = 0.0);

// Resamples a chain to roughly uniform spacing and attaches outward normals
// and curvature from circumscribed circles over five-point stencils, with a
// short moving-average pass to damp extraction noise.
InterfacePolyline refine_with_geometry(const InterfacePolyline& chain,
                                       double spacing);

double total_perimeter(const std::vector<InterfacePolyline>& chains);

// |E(phi) - sigma * P| / E(phi) with P the extracted interface perimeter:
// how closely the interface energy matches its sharp perimeter limit.
// Returns 0 for a pure-phase field; throws when E > 0 but no zero level set
// exists. Two-phase fields only.
double gamma_limit_check(const Problem& prob, const PhaseField& phi,
                         double sigma);

// |int eps |grad phi|^2 - (2/eps) int psi0(phi)| / E(phi): vanishing for the
// optimal 1D transition profile. Returns 0 for a pure-phase field.
double equipartition_residual(const Problem& prob, const PhaseField& phi);

// One interface sample of the sharp-limit stationarity residual.
struct GmvSample {
  double x = 0.0, y = 0.0;
  double kappa = 0.0;
  double curv_term = 0.0;   // gamma * sigma * kappa
  double mass_term = 0.0;   // sum_r c_r lambda_r rho_M |w_r|^2
  double stiff_term = 0.0;  // -sum_r c_r C^M E(w_r):E(w_r)
};

struct GmvReport {
  std::vector<GmvSample> samples;
  double theta_fit = 0.0;       // constant multiplier minimizing the residual
  double rms = 0.0;             // RMS of curv+mass+stiff+gamma*theta
  double normalized_rms = 0.0;  // rms over the RMS of the stacked terms
};

// First-order sharp-interface optimality residual for the single-material
// case: gamma*sigma*kappa + sum_r c_r (lambda_r rho_M |w_r|^2 -
// C^M E(w_r):E(w_r)) + gamma*theta evaluated at interface points pushed
// pi*eps/2 + 2h into the material (past the diffuse layer), with the unknown
// constant theta fitted by least squares. c_r = weights[r] is the partial
// derivative of the eigenvalue aggregate.
GmvReport gmv_residual(const Problem& prob, const PhaseField& phi,
                       const Spectrum& spectrum, const ObjectiveSpec& spec,
                       double sigma);

// Same residual over caller-provided interface geometry (chains must carry
// normals and curvature, e.g. from refine_with_geometry or analytic shapes).
GmvReport gmv_residual(const Problem& prob,
                       const std::vector<InterfacePolyline>& chains,
                       const Spectrum& spectrum, const ObjectiveSpec& spec,
                       double sigma);

struct JunctionAngles {
  double x = 0.0, y = 0.0;
  std::array<double, 3> angles{};  // degrees between adjacent arms, sum 360
};

// Locates cells whose corners carry three distinct majority phases, clusters
// them into junction points, and measures the directions of the three
// pairwise interfaces on a sampling circle around each junction. Two-phase
// fields return an empty list.
std::vector<JunctionAngles> triple_junction_angles(const Problem& prob,
                                                   const PhaseField& phi);

// A-posteriori Lagrange multipliers explaining the projected gradient:
// lambda_hat (componentwise-equal part of the sum constraint), theta_hat
// (constant mean-constraint multiplier, components summing to zero in vector
// mode), mu_hat >= 0 (obstacle multiplier on active nodes). kkt_residual is
// the lumped L2 norm of the remainder the three parts cannot explain.
struct MultiplierEstimate {
  Eigen::VectorXd theta_hat;   // one entry per stored component
  Eigen::MatrixXd mu_hat;      // nodes x components, nonnegative
  Eigen::VectorXd lambda_hat;  // nodal value shared by all components
  double kkt_residual = 0.0;
  double complementarity = 0.0;  // max over nodes of mu_hat * distance-to-bound

  // lambda_hat replicated across components (equal columns by construction)
  Eigen::MatrixXd lambda_matrix(int ncomp) const;
};

MultiplierEstimate recover_multipliers(const Problem& prob, const PhaseField& phi,
                                       const GradientField& grad);

}  // namespace specopt
