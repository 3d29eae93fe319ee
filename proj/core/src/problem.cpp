#include "specopt/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace specopt {

int Problem::num_clamped() const {
  int n = 0;
  for (auto c : clamped) n += c;
  return n;
}

void Problem::finalize() {
  if (mesh.nx < 1 || mesh.ny < 1)
    throw std::invalid_argument("problem: mesh not set");
  if (static_cast<int>(dofs.constrained.size()) != 2 * mesh.num_nodes())
    throw std::invalid_argument("problem: dof map does not match the mesh");
  if (model.solids.empty())
    throw std::invalid_argument("problem: no material phases");
  if (rho_factor < 1.0)
    throw std::invalid_argument("problem: spatial density factor must be >= 1");

  if (scalar_mode()) {
    if (scalar_mean <= -1.0 || scalar_mean >= 1.0)
      throw std::invalid_argument("problem: scalar mean must lie in (-1,1)");
  } else {
    if (vector_mean.size() != n_phases())
      throw std::invalid_argument("problem: mean vector size must equal the phase count");
    double sum = 0.0;
    for (int i = 0; i < vector_mean.size(); ++i) {
      if (vector_mean[i] <= 0.0 || vector_mean[i] >= 1.0)
        throw std::invalid_argument("problem: mean components must lie in (0,1)");
      sum += vector_mean[i];
    }
    if (std::abs(sum - 1.0) > 1e-10)
      throw std::invalid_argument("problem: mean components must sum to 1");
  }

  node_weight = lumped_node_weights(mesh);
  laplacian = assemble_scalar_laplacian(mesh);

  clamped.assign(mesh.num_nodes(), 0);
  if (rho_box && clamp_rho_box) {
    for (int n = 0; n < mesh.num_nodes(); ++n)
      if (rho_box->contains(mesh.node_x(n), mesh.node_y(n))) clamped[n] = 1;
  }

  if (rho_box && rho_factor != 1.0) {
    const Box box = *rho_box;
    const double f = rho_factor;
    spatial_fn_ = [box, f](double x, double y) {
      return box.contains(x, y) ? f : 1.0;
    };
  } else {
    spatial_fn_ = nullptr;
  }
}

Eigen::VectorXd Problem::traction_vector() const {
  if (!traction) return Eigen::VectorXd();
  return assemble_traction(mesh, dofs, traction->edge, traction->from,
                           traction->to, traction->gx, traction->gy);
}

void Problem::apply_clamp(PhaseField& phi) const {
  if (clamped.empty()) return;
  for (int n = 0; n < phi.num_nodes(); ++n) {
    if (!clamped[n]) continue;
    if (phi.is_scalar()) {
      phi.values(n, 0) = 1.0;
    } else {
      phi.values.row(n).setZero();
      phi.values(n, 0) = 1.0;
    }
  }
}

PhaseField Problem::constant_field() const {
  const int nn = mesh.num_nodes();
  if (scalar_mode())
    return PhaseField::scalar(Eigen::VectorXd::Constant(nn, scalar_mean));
  Eigen::MatrixXd v(nn, n_phases());
  for (int n = 0; n < nn; ++n) v.row(n) = vector_mean.transpose();
  return PhaseField::vector(v);
}

}  // namespace specopt
