#include "specopt/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace specopt {

int ObjectiveSpec::num_modes() const {
  int k = 0;
  for (int n : eigen_indices) k = std::max(k, n);
  return k;
}

void ObjectiveSpec::validate(const Problem& prob) const {
  if (eigen_indices.size() != weights.size())
    throw std::invalid_argument("objective: one weight per eigenvalue index required");
  for (int n : eigen_indices)
    if (n < 1)
      throw std::invalid_argument("objective: eigenvalue indices are 1-based");
  if (gamma <= 0.0)
    throw std::invalid_argument("objective: gamma must be positive");
  if (compliance_weight != 0.0 && !prob.traction)
    throw std::invalid_argument("objective: compliance term requires a traction");
}

double GradientField::l2(const std::vector<double>& node_weight) const {
  double s = 0.0;
  for (int n = 0; n < dual.rows(); ++n)
    s += dual.row(n).squaredNorm() / node_weight[n];
  return std::sqrt(s);
}

double ginzburg_landau_energy(const Problem& prob, const PhaseField& phi,
                              bool enforce_obstacle) {
  if (enforce_obstacle && phi.constraint_violation() > 1e-8)
    throw std::invalid_argument(
        "ginzburg_landau_energy: field violates the admissible set");
  const double eps = prob.model.epsilon;
  double grad = 0.0, pot = 0.0;
  for (int c = 0; c < phi.values.cols(); ++c)
    grad += phi.values.col(c).dot(prob.laplacian * phi.values.col(c));
  for (int n = 0; n < phi.num_nodes(); ++n) {
    const double p = phi.is_scalar()
                         ? Potential::scalar_value(phi.values(n, 0))
                         : 0.5 * (1.0 - phi.values.row(n).squaredNorm());
    pot += prob.node_weight[n] * p;
  }
  return 0.5 * eps * grad + pot / eps;
}

Eigen::MatrixXd ginzburg_landau_gradient(const Problem& prob, const PhaseField& phi,
                                         double gamma) {
  const double eps = prob.model.epsilon;
  Eigen::MatrixXd g(phi.num_nodes(), phi.values.cols());
  for (int c = 0; c < phi.values.cols(); ++c)
    g.col(c) = eps * (prob.laplacian * phi.values.col(c));
  // psi0'(phi) = -phi under the lumped nodal rule
  for (int n = 0; n < phi.num_nodes(); ++n)
    g.row(n) -= (prob.node_weight[n] / eps) * phi.values.row(n);
  return gamma * g;
}

namespace {

// Shared sensitivity assembly: accumulates per-node dual coefficients of
//   stiff_factor * int C'(phi) E(w):E(w) eta
// + mass_factor  * int rho'(phi) rho_spatial |w|^2 eta
// and reports the consistent-mass norm w^T M w on the side.
Eigen::MatrixXd assemble_sensitivity(const Problem& prob, const PhaseField& phi,
                                     const MaterialSamples& samples,
                                     const Eigen::VectorXd& w, double stiff_factor,
                                     double mass_factor, double* mnorm_out) {
  const StructuredMesh& mesh = prob.mesh;
  const QuadCache qc(mesh.hx(), mesh.hy());
  const double g1 = 1.0 / std::sqrt(3.0);
  const double gp[2] = {-g1, g1};
  const SpatialDensity* sp = prob.spatial_density();
  const bool scalar = phi.is_scalar();
  const int ncomp = static_cast<int>(phi.values.cols());

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(phi.num_nodes(), ncomp);
  double mnorm = 0.0;
  Eigen::VectorXd pv, dr;
  std::vector<IsoTensor> dc;

  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto nodes = mesh.cell_nodes(c);
    double wx[4], wy[4];
    for (int a = 0; a < 4; ++a) {
      wx[a] = w[2 * nodes[a]];
      wy[a] = w[2 * nodes[a] + 1];
    }
    for (int q = 0; q < 4; ++q) {
      double e11 = 0, e22 = 0, e12 = 0, vx = 0, vy = 0;
      for (int a = 0; a < 4; ++a) {
        e11 += qc.dNdx[q][a] * wx[a];
        e22 += qc.dNdy[q][a] * wy[a];
        e12 += 0.5 * (qc.dNdy[q][a] * wx[a] + qc.dNdx[q][a] * wy[a]);
        vx += qc.N[q][a] * wx[a];
        vy += qc.N[q][a] * wy[a];
      }
      const double esq = e11 * e11 + e22 * e22 + 2.0 * e12 * e12;
      const double tr2 = (e11 + e22) * (e11 + e22);
      const double wsq = vx * vx + vy * vy;
      mnorm += qc.w * samples.rho[4 * c + q] * wsq;

      double spatial = 1.0;
      if (sp) {
        const double xq = mesh.cell_x0(c) + 0.5 * mesh.hx() * (1.0 + gp[q % 2]);
        const double yq = mesh.cell_y0(c) + 0.5 * mesh.hy() * (1.0 + gp[q / 2]);
        spatial = (*sp)(xq, yq);
      }

      if (scalar) {
        double u = 0.0;
        for (int a = 0; a < 4; ++a) u += qc.N[q][a] * phi.values(nodes[a], 0);
        const IsoTensor dct = prob.model.stiffness_scalar_deriv(u);
        const double drho = prob.model.density_scalar_deriv(u);
        const double val = stiff_factor * (dct.mu2 * esq + dct.lame * tr2) +
                           mass_factor * drho * spatial * wsq;
        for (int a = 0; a < 4; ++a) g(nodes[a], 0) += qc.w * qc.N[q][a] * val;
      } else {
        pv.setZero(ncomp);
        for (int a = 0; a < 4; ++a)
          pv += qc.N[q][a] * phi.values.row(nodes[a]).transpose();
        prob.model.stiffness_deriv(pv, dc);
        prob.model.density_deriv(pv, dr);
        for (int i = 0; i < ncomp; ++i) {
          const double val = stiff_factor * (dc[i].mu2 * esq + dc[i].lame * tr2) +
                             mass_factor * dr[i] * spatial * wsq;
          for (int a = 0; a < 4; ++a) g(nodes[a], i) += qc.w * qc.N[q][a] * val;
        }
      }
    }
  }
  if (mnorm_out) *mnorm_out = mnorm;
  return g;
}

}  // namespace

Eigen::MatrixXd eigenvalue_gradient_density(const Problem& prob, const PhaseField& phi,
                                            const MaterialSamples& samples,
                                            const EigenPair& pair) {
  double mnorm = 0.0;
  Eigen::MatrixXd g = assemble_sensitivity(prob, phi, samples, pair.w, 1.0,
                                           -pair.lambda, &mnorm);
  if (std::abs(mnorm - 1.0) > 1e-8)
    throw std::invalid_argument(
        "eigenvalue_gradient_density: eigenvector is not M-normalized");
  return g;
}

Eigen::MatrixXd compliance_gradient_density(const Problem& prob, const PhaseField& phi,
                                            const MaterialSamples& samples,
                                            const Eigen::VectorXd& u_c) {
  return assemble_sensitivity(prob, phi, samples, u_c, -1.0, 0.0, nullptr);
}

Evaluation evaluate_objective(const Problem& prob, const ObjectiveSpec& spec,
                              const PhaseField& phi, EvalWorkspace& ws) {
  spec.validate(prob);
  Evaluation ev;
  ev.glandau = ginzburg_landau_energy(prob, phi, !ws.relax_obstacle);
  ev.J = spec.gamma * ev.glandau;

  const bool need_eigen = !spec.eigen_indices.empty();
  const bool need_comp = spec.compliance_weight != 0.0;
  if (!need_eigen && !need_comp) return ev;

  const MaterialSamples samples =
      sample_material(prob.mesh, phi, prob.model, prob.spatial_density());
  const SparseSymOperator K = assemble_stiffness(prob.mesh, samples, prob.dofs);
  const SparseSymOperator M = assemble_mass(prob.mesh, samples, prob.dofs);

  if (need_eigen) {
    ev.spectrum =
        solve_generalized(K, M, spec.num_modes(), ws.eig_tol, ws.seed, &ws.eig);
    for (size_t r = 0; r < spec.eigen_indices.size(); ++r) {
      const int idx = spec.eigen_indices[r];
      ev.lambdas.push_back(ev.spectrum.lambda(idx));
      ev.J += spec.weights[r] * ev.spectrum.lambda(idx);
      if (ev.spectrum.pairs[idx - 1].near_degenerate) ev.near_degenerate = true;
    }
  }
  if (need_comp) {
    if (!ws.load_ready) {
      ws.load = prob.traction_vector();
      ws.load_ready = true;
    }
    if (!need_eigen) {
      if (ws.eig.full2free.size() != static_cast<size_t>(M.rows()))
        ws.eig.build_free_set(M);
      ws.eig.factorize(K);
    }
    ev.u_c = ws.eig.solve_full(ws.load);
    ev.compliance = ws.load.dot(ev.u_c);
    ev.J += spec.compliance_weight * ev.compliance;
  }
  return ev;
}

GradientField total_gradient(const Problem& prob, const ObjectiveSpec& spec,
                             const PhaseField& phi, const Evaluation& eval) {
  const int nn = prob.mesh.num_nodes();
  const int ncomp = static_cast<int>(phi.values.cols());
  GradientField g;
  g.gl_part = ginzburg_landau_gradient(prob, phi, spec.gamma);
  g.eigen_part = Eigen::MatrixXd::Zero(nn, ncomp);
  g.compliance_part = Eigen::MatrixXd::Zero(nn, ncomp);

  if (!spec.eigen_indices.empty() || eval.u_c.size() > 0) {
    const MaterialSamples samples =
        sample_material(prob.mesh, phi, prob.model, prob.spatial_density());
    for (size_t r = 0; r < spec.eigen_indices.size(); ++r) {
      const EigenPair& pair = eval.spectrum.pairs.at(spec.eigen_indices[r] - 1);
      g.eigen_part +=
          spec.weights[r] * eigenvalue_gradient_density(prob, phi, samples, pair);
    }
    if (eval.u_c.size() > 0)
      g.compliance_part = spec.compliance_weight *
                          compliance_gradient_density(prob, phi, samples, eval.u_c);
  }

  // clamped nodes are not design variables; vector fields live in the
  // tangent space of the sum constraint
  auto post = [&](Eigen::MatrixXd& part) {
    for (int n = 0; n < nn; ++n) {
      if (!prob.clamped.empty() && prob.clamped[n]) {
        part.row(n).setZero();
      } else if (ncomp > 1) {
        part.row(n).array() -= part.row(n).mean();
      }
    }
  };
  post(g.gl_part);
  post(g.eigen_part);
  post(g.compliance_part);
  g.dual = g.gl_part + g.eigen_part + g.compliance_part;
  return g;
}

}  // namespace specopt
