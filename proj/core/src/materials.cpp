#include "specopt/materials.hpp"

#include <cmath>
#include <stdexcept>

namespace specopt {

PhaseField PhaseField::scalar(Eigen::VectorXd u) {
  PhaseField f;
  f.n_phases = 2;
  f.values = std::move(u);
  return f;
}

PhaseField PhaseField::vector(Eigen::MatrixXd v) {
  if (v.cols() < 2)
    throw std::invalid_argument("PhaseField::vector: need at least two phases");
  PhaseField f;
  f.n_phases = static_cast<int>(v.cols());
  f.values = std::move(v);
  return f;
}

Eigen::VectorXd PhaseField::vector_at(int node) const {
  if (is_scalar()) {
    const double u = values(node, 0);
    Eigen::VectorXd v(2);
    v << 0.5 * (1.0 + u), 0.5 * (1.0 - u);
    return v;
  }
  return values.row(node).transpose();
}

Eigen::VectorXd PhaseField::scalar_view() const {
  if (is_scalar()) return values.col(0);
  if (n_phases != 2)
    throw std::logic_error("PhaseField::scalar_view: only defined for two phases");
  return values.col(0) - values.col(1);
}

double PhaseField::constraint_violation() const {
  double v = 0.0;
  if (is_scalar()) {
    for (int n = 0; n < num_nodes(); ++n)
      v = std::max(v, std::abs(values(n, 0)) - 1.0);
    return std::max(v, 0.0);
  }
  for (int n = 0; n < num_nodes(); ++n) {
    double sum = 0.0;
    for (int i = 0; i < n_phases; ++i) {
      sum += values(n, i);
      v = std::max(v, -values(n, i));
    }
    v = std::max(v, std::abs(sum - 1.0));
  }
  return std::max(v, 0.0);
}

Potential Potential::double_obstacle(int n_phases) {
  Potential p;
  p.value = [](const Eigen::VectorXd& phi) { return 0.5 * (1.0 - phi.squaredNorm()); };
  p.deriv = [](const Eigen::VectorXd& phi) { return Eigen::VectorXd(-phi); };
  (void)n_phases;
  return p;
}

PhaseMaterial isotropic_material(double young, double poisson, double rho) {
  PhaseMaterial m;
  m.mu = young / (2.0 * (1.0 + poisson));
  m.lame = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  m.rho = rho;
  return m;
}

MaterialModel MaterialModel::two_phase(double young, double poisson, double rho,
                                       double alpha_bar, double beta_bar) {
  MaterialModel m;
  m.solids = {isotropic_material(young, poisson, rho)};
  m.alpha_bar = alpha_bar;
  m.beta_bar = beta_bar;
  m.void_shape.mu = alpha_bar * m.solids[0].mu;
  m.void_shape.lame = alpha_bar * m.solids[0].lame;
  m.void_shape.rho = beta_bar * m.solids[0].rho;
  return m;
}

double MaterialModel::eps_k() const { return std::pow(epsilon, k_exp); }
double MaterialModel::eps_l() const { return std::pow(epsilon, l_exp); }

// Cubic Hermite blends: a(v) = v - v^2/omega - v^3/omega^2 on (-omega,0) with
// a(-omega) = -omega, a'(-omega) = 0, and the mirrored b on (1,1+omega).
double MaterialModel::cutoff(double v) const {
  if (v >= 0.0 && v <= 1.0) return v;
  if (v <= -omega) return -omega;
  if (v >= 1.0 + omega) return 1.0 + omega;
  if (v < 0.0) return v - v * v / omega - v * v * v / (omega * omega);
  const double t = v - 1.0;
  return 1.0 + t + t * t / omega - t * t * t / (omega * omega);
}

double MaterialModel::cutoff_deriv(double v) const {
  if (v >= 0.0 && v <= 1.0) return 1.0;
  if (v <= -omega || v >= 1.0 + omega) return 0.0;
  if (v < 0.0) return 1.0 - 2.0 * v / omega - 3.0 * v * v / (omega * omega);
  const double t = v - 1.0;
  return 1.0 + 2.0 * t / omega - 3.0 * t * t / (omega * omega);
}

namespace {
// Affine projection restoring sum(phi) = 1 along the direction (1,...,1).
inline Eigen::VectorXd project_sum_one(const Eigen::VectorXd& phi) {
  const int n = static_cast<int>(phi.size());
  const double shift = (1.0 - phi.sum()) / n;
  return phi.array() + shift;
}
}  // namespace

IsoTensor MaterialModel::stiffness_at(const Eigen::VectorXd& phi) const {
  if (static_cast<int>(phi.size()) != n_phases())
    throw std::invalid_argument("stiffness_at: component count mismatch");
  const Eigen::VectorXd p = project_sum_one(phi);
  IsoTensor c;
  const int nm = static_cast<int>(solids.size());
  for (int i = 0; i < nm; ++i) {
    const double f = cutoff(interp_solid(p[i]));
    c.mu2 += 2.0 * solids[i].mu * f;
    c.lame += solids[i].lame * f;
  }
  const double fv = eps_k() * cutoff(interp_void(p[nm]));
  c.mu2 += 2.0 * void_shape.mu * fv;
  c.lame += void_shape.lame * fv;
  return c;
}

double MaterialModel::density_at(const Eigen::VectorXd& phi, bool include_void) const {
  if (static_cast<int>(phi.size()) != n_phases())
    throw std::invalid_argument("density_at: component count mismatch");
  const Eigen::VectorXd p = project_sum_one(phi);
  double r = 0.0;
  const int nm = static_cast<int>(solids.size());
  for (int i = 0; i < nm; ++i) r += solids[i].rho * cutoff(interp_solid(p[i]));
  if (include_void) r += eps_l() * void_shape.rho * cutoff(interp_void(p[nm]));
  return r;
}

void MaterialModel::stiffness_deriv(const Eigen::VectorXd& phi,
                                    std::vector<IsoTensor>& d) const {
  const int n = n_phases();
  if (static_cast<int>(phi.size()) != n)
    throw std::invalid_argument("stiffness_deriv: component count mismatch");
  const Eigen::VectorXd p = project_sum_one(phi);
  d.assign(n, IsoTensor{});
  const int nm = n - 1;
  // chain factors g_i = d/dp_i of the i-th interpolated weight
  std::vector<double> g(n);
  for (int i = 0; i < nm; ++i)
    g[i] = cutoff_deriv(interp_solid(p[i])) * interp_solid_deriv(p[i]);
  g[nm] = eps_k() * cutoff_deriv(interp_void(p[nm])) * interp_void_deriv(p[nm]);
  // dp_i/dphi_m = delta_im - 1/N
  for (int m = 0; m < n; ++m) {
    IsoTensor t;
    for (int i = 0; i < nm; ++i) {
      const double w = g[i] * (((i == m) ? 1.0 : 0.0) - 1.0 / n);
      t.mu2 += 2.0 * solids[i].mu * w;
      t.lame += solids[i].lame * w;
    }
    const double wv = g[nm] * (((nm == m) ? 1.0 : 0.0) - 1.0 / n);
    t.mu2 += 2.0 * void_shape.mu * wv;
    t.lame += void_shape.lame * wv;
    d[m] = t;
  }
}

void MaterialModel::density_deriv(const Eigen::VectorXd& phi, Eigen::VectorXd& d) const {
  const int n = n_phases();
  if (static_cast<int>(phi.size()) != n)
    throw std::invalid_argument("density_deriv: component count mismatch");
  const Eigen::VectorXd p = project_sum_one(phi);
  d.setZero(n);
  const int nm = n - 1;
  std::vector<double> g(n);
  for (int i = 0; i < nm; ++i)
    g[i] = solids[i].rho * cutoff_deriv(interp_solid(p[i])) * interp_solid_deriv(p[i]);
  g[nm] = eps_l() * void_shape.rho * cutoff_deriv(interp_void(p[nm])) *
          interp_void_deriv(p[nm]);
  for (int m = 0; m < n; ++m) {
    double t = 0.0;
    for (int i = 0; i < n; ++i) t += g[i] * (((i == m) ? 1.0 : 0.0) - 1.0 / n);
    d[m] = t;
  }
}

// Two-phase fast path: with s = (1+u)/2 the void component is 1-s, so the
// weights are s(a_M(s)) and s(a_V(1-s)) = s(1-s^2) before the cutoff.
IsoTensor MaterialModel::stiffness_scalar(double u) const {
  const double s = 0.5 * (1.0 + u);
  const double fm = cutoff(interp_solid(s));
  const double fv = eps_k() * cutoff(interp_void(1.0 - s));
  IsoTensor c;
  c.mu2 = 2.0 * (solids[0].mu * fm + void_shape.mu * fv);
  c.lame = solids[0].lame * fm + void_shape.lame * fv;
  return c;
}

IsoTensor MaterialModel::stiffness_scalar_deriv(double u) const {
  const double s = 0.5 * (1.0 + u);
  // d/du = (1/2) d/ds; the void argument 1-s contributes a factor -1
  const double gm = 0.5 * cutoff_deriv(interp_solid(s)) * interp_solid_deriv(s);
  const double gv =
      -0.5 * eps_k() * cutoff_deriv(interp_void(1.0 - s)) * interp_void_deriv(1.0 - s);
  IsoTensor c;
  c.mu2 = 2.0 * (solids[0].mu * gm + void_shape.mu * gv);
  c.lame = solids[0].lame * gm + void_shape.lame * gv;
  return c;
}

double MaterialModel::density_scalar(double u, bool include_void) const {
  const double s = 0.5 * (1.0 + u);
  double r = solids[0].rho * cutoff(interp_solid(s));
  if (include_void) r += eps_l() * void_shape.rho * cutoff(interp_void(1.0 - s));
  return r;
}

double MaterialModel::density_scalar_deriv(double u) const {
  const double s = 0.5 * (1.0 + u);
  const double gm = 0.5 * cutoff_deriv(interp_solid(s)) * interp_solid_deriv(s);
  const double gv =
      -0.5 * eps_l() * cutoff_deriv(interp_void(1.0 - s)) * interp_void_deriv(1.0 - s);
  return solids[0].rho * gm + void_shape.rho * gv;
}

}  // namespace specopt
