#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "specopt/materials.hpp"
#include "specopt/mesh.hpp"
#include "specopt/sparse_operator.hpp"

namespace specopt {

// Shape values and physical gradients of the four bilinear basis functions at
// the 2x2 Gauss points of one cell; w is the physical weight per point.
struct QuadCache {
  double N[4][4];
  double dNdx[4][4];
  double dNdy[4][4];
  double w = 0.0;

  QuadCache(double hx, double hy);
};

// Optional spatially varying density factor rho(x) multiplying the
// interpolated density (used for the heavy tip block of the beam runs).
using SpatialDensity = std::function<double(double, double)>;

// Material coefficients sampled at every quadrature point (cell-major,
// 4 points per cell): stiffness tensor, full density, and the density with
// the void contribution dropped (for modal material fractions).
struct MaterialSamples {
  std::vector<IsoTensor> stiff;
  std::vector<double> rho;
  std::vector<double> rho_material;
};

MaterialSamples sample_material(const StructuredMesh& mesh, const PhaseField& phi,
                                const MaterialModel& model,
                                const SpatialDensity* rho_spatial = nullptr);

// Elasticity stiffness  K_ab = int C(phi) E(N_a) : E(N_b)  and mass
// M_ab = int rho(phi) rho(x) N_a N_b, Q1 vector elements, 2x2 Gauss.
// Dirichlet dofs are eliminated (diagonal 1 in K, 0 in M).
SparseSymOperator assemble_stiffness(const StructuredMesh& mesh,
                                     const MaterialSamples& samples,
                                     const DofMap& dofs);
SparseSymOperator assemble_mass(const StructuredMesh& mesh,
                                const MaterialSamples& samples, const DofMap& dofs,
                                bool material_only = false);

SparseSymOperator assemble_stiffness(const StructuredMesh& mesh, const PhaseField& phi,
                                     const MaterialModel& model, const DofMap& dofs);
SparseSymOperator assemble_mass(const StructuredMesh& mesh, const PhaseField& phi,
                                const MaterialModel& model, const DofMap& dofs,
                                const SpatialDensity* rho_spatial = nullptr,
                                bool material_only = false);

// Boundary load  f_a = int_{Gamma_g} g . N_a ds  on the part of the chosen
// edge with arclength coordinate in [from,to] (x along bottom/top, y along
// left/right), 2-point Gauss per clipped element trace. Rows of constrained
// dofs are zeroed.
Eigen::VectorXd assemble_traction(const StructuredMesh& mesh, const DofMap& dofs,
                                  Edge edge, double from, double to, double gx,
                                  double gy);

// Scalar Neumann Laplacian (unit coefficient) on nodal fields.
Eigen::SparseMatrix<double> assemble_scalar_laplacian(const StructuredMesh& mesh);

}  // namespace specopt
