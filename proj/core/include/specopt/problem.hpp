#pragma once

#include <Eigen/Sparse>
#include <optional>
#include <vector>

#include "specopt/fem.hpp"
#include "specopt/materials.hpp"
#include "specopt/mesh.hpp"

namespace specopt {

struct Box {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

  bool contains(double x, double y) const {
    const double tol = 1e-12;
    return x >= x0 - tol && x <= x1 + tol && y >= y0 - tol && y <= y1 + tol;
  }
};

// Constant traction g on the part of one outer edge whose arclength
// coordinate (x along bottom/top, y along left/right) lies in [from,to].
struct TractionSpec {
  Edge edge = Edge::right;
  double from = 0.0, to = 0.0;
  double gx = 0.0, gy = 0.0;
};

// Discrete setting of one optimization problem: mesh, displacement boundary
// conditions, material model, heavy-density box (with the design clamped to
// pure material there), mean constraint, and optional compliance traction.
struct Problem {
  StructuredMesh mesh;
  DofMap dofs;
  MaterialModel model;

  // spatial density factor: rho_factor inside rho_box, 1 elsewhere
  std::optional<Box> rho_box;
  double rho_factor = 1.0;
  bool clamp_rho_box = true;  // hold phi at pure material inside rho_box

  double scalar_mean = 0.0;     // mean of u = phi^1 - phi^2 (two phases)
  Eigen::VectorXd vector_mean;  // componentwise mean on the simplex (N >= 3)

  std::optional<TractionSpec> traction;

  // derived by finalize()
  std::vector<std::uint8_t> clamped;      // per node, 1 = design held fixed
  std::vector<double> node_weight;        // lumped nodal quadrature weights
  Eigen::SparseMatrix<double> laplacian;  // scalar Neumann Laplacian

  int n_phases() const { return model.n_phases(); }
  bool scalar_mode() const { return model.n_phases() == 2; }
  int num_clamped() const;

  // Fills the derived members and validates the setup. Must be called after
  // the descriptive fields are set and before any evaluation.
  void finalize();

  // rho_spatial callable for mass assembly; null when the factor is trivial.
  const SpatialDensity* spatial_density() const {
    return spatial_fn_ ? &spatial_fn_ : nullptr;
  }

  // Boundary load vector (zero-length when no traction is configured).
  Eigen::VectorXd traction_vector() const;

  // Overwrites clamped nodes with the pure-material value (u=1 or e_1).
  void apply_clamp(PhaseField& phi) const;

  // Admissible constant field at the prescribed mean (clamp not applied).
  PhaseField constant_field() const;

 private:
  SpatialDensity spatial_fn_;  // empty when rho_box absent or factor 1
};

}  // namespace specopt
