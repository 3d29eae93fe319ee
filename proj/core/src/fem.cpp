#include "specopt/fem.hpp"

#include <cmath>
#include <stdexcept>

namespace specopt {

namespace {
// reference corners in the order of StructuredMesh::cell_nodes
constexpr double kXi[4] = {-1.0, 1.0, 1.0, -1.0};
constexpr double kEta[4] = {-1.0, -1.0, 1.0, 1.0};
const double kGauss = 1.0 / std::sqrt(3.0);
using Triplet = Eigen::Triplet<double>;
}  // namespace

QuadCache::QuadCache(double hx, double hy) {
  w = 0.25 * hx * hy;
  const double gp[2] = {-kGauss, kGauss};
  for (int q = 0; q < 4; ++q) {
    const double xi = gp[q % 2], eta = gp[q / 2];
    for (int a = 0; a < 4; ++a) {
      N[q][a] = 0.25 * (1.0 + kXi[a] * xi) * (1.0 + kEta[a] * eta);
      dNdx[q][a] = 0.25 * kXi[a] * (1.0 + kEta[a] * eta) * (2.0 / hx);
      dNdy[q][a] = 0.25 * kEta[a] * (1.0 + kXi[a] * xi) * (2.0 / hy);
    }
  }
}

MaterialSamples sample_material(const StructuredMesh& mesh, const PhaseField& phi,
                                const MaterialModel& model,
                                const SpatialDensity* rho_spatial) {
  if (phi.num_nodes() != mesh.num_nodes())
    throw std::invalid_argument("sample_material: field/mesh size mismatch");
  if (phi.n_phases != model.n_phases())
    throw std::invalid_argument("sample_material: phase count mismatch");

  const QuadCache qc(mesh.hx(), mesh.hy());
  const int nc = mesh.num_cells();
  MaterialSamples s;
  s.stiff.resize(4 * nc);
  s.rho.resize(4 * nc);
  s.rho_material.resize(4 * nc);

  const bool scalar = phi.is_scalar();
  const double gp[2] = {-kGauss, kGauss};

#ifdef SPECOPT_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int c = 0; c < nc; ++c) {
    const auto nodes = mesh.cell_nodes(c);
    const double x0 = mesh.cell_x0(c), y0 = mesh.cell_y0(c);
    Eigen::VectorXd pv;
    for (int q = 0; q < 4; ++q) {
      double spatial = 1.0;
      if (rho_spatial) {
        const double xq = x0 + 0.5 * mesh.hx() * (1.0 + gp[q % 2]);
        const double yq = y0 + 0.5 * mesh.hy() * (1.0 + gp[q / 2]);
        spatial = (*rho_spatial)(xq, yq);
      }
      if (scalar) {
        double u = 0.0;
        for (int a = 0; a < 4; ++a) u += qc.N[q][a] * phi.values(nodes[a], 0);
        s.stiff[4 * c + q] = model.stiffness_scalar(u);
        s.rho[4 * c + q] = spatial * model.density_scalar(u, true);
        s.rho_material[4 * c + q] = spatial * model.density_scalar(u, false);
      } else {
        pv.setZero(phi.n_phases);
        for (int a = 0; a < 4; ++a)
          pv += qc.N[q][a] * phi.values.row(nodes[a]).transpose();
        s.stiff[4 * c + q] = model.stiffness_at(pv);
        s.rho[4 * c + q] = spatial * model.density_at(pv, true);
        s.rho_material[4 * c + q] = spatial * model.density_at(pv, false);
      }
    }
  }
  return s;
}

namespace {

// one 8x8 element block scattered into the triplet slots for cell c
template <class Kernel>
SparseSymOperator assemble_vector_operator(const StructuredMesh& mesh,
                                           const DofMap& dofs, Kernel&& kernel,
                                           double diag_value) {
  const int nc = mesh.num_cells();
  std::vector<Triplet> trips(static_cast<size_t>(nc) * 64);

#ifdef SPECOPT_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int c = 0; c < nc; ++c) {
    double ke[8][8] = {};
    kernel(c, ke);
    const auto nodes = mesh.cell_nodes(c);
    size_t slot = static_cast<size_t>(c) * 64;
    for (int a = 0; a < 4; ++a)
      for (int ca = 0; ca < 2; ++ca)
        for (int b = 0; b < 4; ++b)
          for (int cb = 0; cb < 2; ++cb)
            trips[slot++] = Triplet(2 * nodes[a] + ca, 2 * nodes[b] + cb,
                                    ke[2 * a + ca][2 * b + cb]);
  }

  SparseSymOperator op;
  op.mat.resize(dofs.num_dofs(), dofs.num_dofs());
  op.mat.setFromTriplets(trips.begin(), trips.end());
  op.eliminate_dirichlet(dofs, diag_value);
  return op;
}

}  // namespace

SparseSymOperator assemble_stiffness(const StructuredMesh& mesh,
                                     const MaterialSamples& samples,
                                     const DofMap& dofs) {
  const QuadCache qc(mesh.hx(), mesh.hy());
  auto kernel = [&](int c, double ke[8][8]) {
    for (int q = 0; q < 4; ++q) {
      const IsoTensor& ct = samples.stiff[4 * c + q];
      const double c1 = (ct.mu2 + ct.lame) * qc.w;  // 2mu + lame
      const double c2 = ct.lame * qc.w;
      const double c3 = 0.5 * ct.mu2 * qc.w;  // mu
      for (int a = 0; a < 4; ++a) {
        const double ax = qc.dNdx[q][a], ay = qc.dNdy[q][a];
        for (int b = 0; b < 4; ++b) {
          const double bx = qc.dNdx[q][b], by = qc.dNdy[q][b];
          ke[2 * a][2 * b] += ax * bx * c1 + ay * by * c3;
          ke[2 * a][2 * b + 1] += ax * by * c2 + ay * bx * c3;
          ke[2 * a + 1][2 * b] += ay * bx * c2 + ax * by * c3;
          ke[2 * a + 1][2 * b + 1] += ay * by * c1 + ax * bx * c3;
        }
      }
    }
  };
  return assemble_vector_operator(mesh, dofs, kernel, 1.0);
}

SparseSymOperator assemble_mass(const StructuredMesh& mesh,
                                const MaterialSamples& samples, const DofMap& dofs,
                                bool material_only) {
  const QuadCache qc(mesh.hx(), mesh.hy());
  const std::vector<double>& rho = material_only ? samples.rho_material : samples.rho;
  auto kernel = [&](int c, double ke[8][8]) {
    for (int q = 0; q < 4; ++q) {
      const double rw = rho[4 * c + q] * qc.w;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const double m = rw * qc.N[q][a] * qc.N[q][b];
          ke[2 * a][2 * b] += m;
          ke[2 * a + 1][2 * b + 1] += m;
        }
    }
  };
  return assemble_vector_operator(mesh, dofs, kernel, 0.0);
}

SparseSymOperator assemble_stiffness(const StructuredMesh& mesh, const PhaseField& phi,
                                     const MaterialModel& model, const DofMap& dofs) {
  return assemble_stiffness(mesh, sample_material(mesh, phi, model), dofs);
}

SparseSymOperator assemble_mass(const StructuredMesh& mesh, const PhaseField& phi,
                                const MaterialModel& model, const DofMap& dofs,
                                const SpatialDensity* rho_spatial, bool material_only) {
  return assemble_mass(mesh, sample_material(mesh, phi, model, rho_spatial), dofs,
                       material_only);
}

Eigen::VectorXd assemble_traction(const StructuredMesh& mesh, const DofMap& dofs,
                                  Edge edge, double from, double to, double gx,
                                  double gy) {
  if (!(to > from))
    throw std::invalid_argument("assemble_traction: empty segment");
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dofs.num_dofs());

  const bool horizontal = (edge == Edge::bottom || edge == Edge::top);
  const double h = horizontal ? mesh.hx() : mesh.hy();
  const int nseg = horizontal ? mesh.nx : mesh.ny;
  const double span = horizontal ? mesh.lx : mesh.ly;
  if (from < -1e-12 || to > span + 1e-12)
    throw std::invalid_argument("assemble_traction: segment outside the edge");

  auto edge_node = [&](int k) {
    switch (edge) {
      case Edge::left: return mesh.node_id(0, k);
      case Edge::right: return mesh.node_id(mesh.nx, k);
      case Edge::bottom: return mesh.node_id(k, 0);
      case Edge::top: return mesh.node_id(k, mesh.ny);
    }
    return -1;
  };

  const double gq[2] = {-kGauss, kGauss};
  for (int k = 0; k < nseg; ++k) {
    const double s0 = k * h, s1 = (k + 1) * h;
    const double a = std::max(s0, from), b = std::min(s1, to);
    if (b - a < 1e-14 * span) continue;
    const int n0 = edge_node(k), n1 = edge_node(k + 1);
    if (dofs.is_constrained(2 * n0) || dofs.is_constrained(2 * n1))
      throw std::invalid_argument(
          "assemble_traction: segment touches the Dirichlet boundary");
    for (int q = 0; q < 2; ++q) {
      const double s = 0.5 * (a + b) + 0.5 * (b - a) * gq[q];
      const double wq = 0.5 * (b - a);
      const double t1 = (s - s0) / h;  // linear trace shape functions
      const double t0 = 1.0 - t1;
      f[2 * n0] += wq * t0 * gx;
      f[2 * n0 + 1] += wq * t0 * gy;
      f[2 * n1] += wq * t1 * gx;
      f[2 * n1 + 1] += wq * t1 * gy;
    }
  }
  return f;
}

Eigen::SparseMatrix<double> assemble_scalar_laplacian(const StructuredMesh& mesh) {
  const QuadCache qc(mesh.hx(), mesh.hy());
  double ke[4][4] = {};
  for (int q = 0; q < 4; ++q)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        ke[a][b] += qc.w * (qc.dNdx[q][a] * qc.dNdx[q][b] + qc.dNdy[q][a] * qc.dNdy[q][b]);

  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(mesh.num_cells()) * 16);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        trips.emplace_back(nodes[a], nodes[b], ke[a][b]);
  }
  Eigen::SparseMatrix<double> L(mesh.num_nodes(), mesh.num_nodes());
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

}  // namespace specopt
