#include "specopt/projection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace specopt {

Eigen::VectorXd project_simplex(const Eigen::VectorXd& y) {
  const int n = static_cast<int>(y.size());
  std::vector<double> s(y.data(), y.data() + n);
  std::sort(s.begin(), s.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (int j = 0; j < n; ++j) {
    cum += s[j];
    const double t = (1.0 - cum) / (j + 1);
    if (s[j] + t > 0.0) tau = t;
  }
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = std::max(y[i] + tau, 0.0);
  return x;
}

namespace {

bool clamped_at(const Problem& prob, int n) {
  return !prob.clamped.empty() && prob.clamped[n] != 0;
}

// componentwise mean target, accepting the scalar two-phase description
Eigen::VectorXd mean_target(const Problem& prob, int N) {
  if (prob.vector_mean.size() == N) return prob.vector_mean;
  if (N == 2) {
    Eigen::VectorXd m(2);
    m << 0.5 * (1.0 + prob.scalar_mean), 0.5 * (1.0 - prob.scalar_mean);
    return m;
  }
  throw std::invalid_argument("projection: mean vector size mismatch");
}

ProjectionResult project_scalar(const Problem& prob, const PhaseField& field) {
  const int nn = field.num_nodes();
  const std::vector<double>& wgt = prob.node_weight;
  const double area = prob.mesh.area();
  const double mean_tol = 1e-12 * std::max(1.0, area);

  double fixed_sum = 0.0, free_w = 0.0;
  double vmin = 1.0, vmax = -1.0;
  for (int n = 0; n < nn; ++n) {
    if (clamped_at(prob, n)) {
      fixed_sum += wgt[n];
    } else {
      free_w += wgt[n];
      vmin = std::min(vmin, field.values(n, 0));
      vmax = std::max(vmax, field.values(n, 0));
    }
  }
  const double want = prob.scalar_mean * area - fixed_sum;
  if (free_w <= 0.0 || want < -free_w - 1e-12 || want > free_w + 1e-12)
    throw std::invalid_argument("project_admissible: mean unreachable under the clamp");

  auto free_mean = [&](double c) {
    double s = 0.0;
    for (int n = 0; n < nn; ++n)
      if (!clamped_at(prob, n))
        s += wgt[n] * std::clamp(field.values(n, 0) + c, -1.0, 1.0);
    return s;
  };

  ProjectionResult out;
  out.field = field;
  out.active = Eigen::MatrixXi::Zero(nn, 1);

  // short-circuit keeps the projection bitwise idempotent
  bool admissible = std::abs(free_mean(0.0) - want) <= mean_tol;
  for (int n = 0; admissible && n < nn; ++n) {
    const double u = field.values(n, 0);
    if (clamped_at(prob, n) ? (u != 1.0) : (std::abs(u) > 1.0)) admissible = false;
  }
  if (!admissible) {
    double lo = -1.0 - vmax, hi = 1.0 - vmin, c = 0.0;
    if (free_mean(lo) - want >= 0.0) {
      c = lo;
    } else if (free_mean(hi) - want <= 0.0) {
      c = hi;
    } else {
      for (int it = 0; it < 200; ++it) {
        c = 0.5 * (lo + hi);
        const double f = free_mean(c) - want;
        if (std::abs(f) <= 0.25 * mean_tol) break;
        (f < 0.0 ? lo : hi) = c;
        if (hi - lo <= 1e-16 * std::max({1.0, std::abs(lo), std::abs(hi)})) break;
      }
    }
    out.scalar_shift = c;
    for (int n = 0; n < nn; ++n) {
      if (clamped_at(prob, n)) {
        out.field.values(n, 0) = 1.0;
      } else {
        out.field.values(n, 0) = std::clamp(field.values(n, 0) + c, -1.0, 1.0);
      }
    }
  }
  for (int n = 0; n < nn; ++n) {
    if (clamped_at(prob, n)) continue;
    const double u = out.field.values(n, 0);
    if (u <= -1.0)
      out.active(n, 0) = -1;
    else if (u >= 1.0)
      out.active(n, 0) = 1;
  }
  return out;
}

ProjectionResult project_vector(const Problem& prob, const PhaseField& field) {
  const int nn = field.num_nodes();
  const int N = field.n_phases;
  const std::vector<double>& wgt = prob.node_weight;
  const double area = prob.mesh.area();
  const double mean_tol = 1e-12 * std::max(1.0, area);

  double fixed_w = 0.0, free_w = 0.0;
  for (int n = 0; n < nn; ++n) (clamped_at(prob, n) ? fixed_w : free_w) += wgt[n];
  Eigen::VectorXd want = mean_target(prob, N) * area;
  want[0] -= fixed_w;  // clamped nodes sit at the first material vertex
  if (free_w <= 0.0)
    throw std::invalid_argument("project_admissible: no free nodes");
  for (int i = 0; i < N; ++i)
    if (want[i] < -1e-12 || want[i] > free_w + 1e-12)
      throw std::invalid_argument("project_admissible: mean unreachable under the clamp");

  auto free_mean = [&](const Eigen::VectorXd& c, Eigen::VectorXd& m) {
    m.setZero(N);
    for (int n = 0; n < nn; ++n)
      if (!clamped_at(prob, n))
        m += wgt[n] * project_simplex(field.values.row(n).transpose() + c);
  };

  ProjectionResult out;
  out.field = field;
  out.active = Eigen::MatrixXi::Zero(nn, N);

  Eigen::VectorXd m(N), c = Eigen::VectorXd::Zero(N);
  free_mean(c, m);
  bool admissible = (m - want).lpNorm<Eigen::Infinity>() <= mean_tol;
  for (int n = 0; admissible && n < nn; ++n) {
    if (clamped_at(prob, n)) {
      if (field.values(n, 0) != 1.0 ||
          field.values.row(n).tail(N - 1).cwiseAbs().maxCoeff() != 0.0)
        admissible = false;
    } else {
      if (field.values.row(n).minCoeff() < 0.0 ||
          std::abs(field.values.row(n).sum() - 1.0) > 1e-13)
        admissible = false;
    }
  }

  if (!admissible) {
    // semismooth Newton on the reduced shift (sum of c is zero); the FD
    // Jacobian of the piecewise-linear mean map is regularized when flat
    Eigen::VectorXd f = m - want;
    double mu = 1e-10;
    for (int it = 0; it < 300 && f.lpNorm<Eigen::Infinity>() > 0.5 * mean_tol; ++it) {
      Eigen::MatrixXd J(N - 1, N - 1);
      const double h = 1e-7 * std::max(1.0, c.lpNorm<Eigen::Infinity>());
      Eigen::VectorXd mp(N);
      for (int j = 0; j < N - 1; ++j) {
        Eigen::VectorXd cp = c;
        cp[j] += h;
        cp[N - 1] -= h;
        free_mean(cp, mp);
        J.col(j) = (mp - m).head(N - 1) / h;
      }
      Eigen::VectorXd step(N - 1);
      bool ok = false;
      for (int t = 0; t < 60 && !ok; ++t) {
        Eigen::MatrixXd Jr = J + mu * Eigen::MatrixXd::Identity(N - 1, N - 1);
        step = Jr.fullPivLu().solve(-f.head(N - 1));
        Eigen::VectorXd cn = c;
        cn.head(N - 1) += step;
        cn[N - 1] = -cn.head(N - 1).sum();
        free_mean(cn, mp);
        if ((mp - want).norm() < f.norm()) {
          c = cn;
          m = mp;
          f = mp - want;
          mu = std::max(mu * 0.25, 1e-12);
          ok = true;
        } else {
          mu *= 10.0;
        }
      }
      if (!ok)
        throw std::runtime_error("project_admissible: mean shift iteration stalled");
    }
    if (f.lpNorm<Eigen::Infinity>() > mean_tol)
      throw std::runtime_error("project_admissible: mean constraint not met");
    out.vector_shift = c;
    for (int n = 0; n < nn; ++n) {
      if (clamped_at(prob, n)) {
        out.field.values.row(n).setZero();
        out.field.values(n, 0) = 1.0;
      } else {
        out.field.values.row(n) =
            project_simplex(field.values.row(n).transpose() + c).transpose();
      }
    }
  } else {
    out.vector_shift = Eigen::VectorXd::Zero(N);
  }
  for (int n = 0; n < nn; ++n)
    if (!clamped_at(prob, n))
      for (int i = 0; i < N; ++i)
        if (out.field.values(n, i) <= 0.0) out.active(n, i) = 1;
  return out;
}

}  // namespace

ProjectionResult project_admissible(const Problem& prob, const PhaseField& field) {
  if (field.num_nodes() != prob.mesh.num_nodes())
    throw std::invalid_argument("project_admissible: field/mesh size mismatch");
  return field.is_scalar() ? project_scalar(prob, field)
                           : project_vector(prob, field);
}

PhaseField project_affine(const Problem& prob, const PhaseField& field) {
  PhaseField out = field;
  const int nn = out.num_nodes();
  const std::vector<double>& wgt = prob.node_weight;
  const double area = prob.mesh.area();

  if (!out.is_scalar()) {
    const int N = out.n_phases;
    for (int n = 0; n < nn; ++n)
      out.values.row(n).array() += (1.0 - out.values.row(n).sum()) / N;
  }
  prob.apply_clamp(out);

  double free_w = 0.0;
  for (int n = 0; n < nn; ++n)
    if (!clamped_at(prob, n)) free_w += wgt[n];
  if (free_w <= 0.0)
    throw std::invalid_argument("project_affine: no free nodes");

  if (out.is_scalar()) {
    double total = 0.0;
    for (int n = 0; n < nn; ++n) total += wgt[n] * out.values(n, 0);
    const double c = (prob.scalar_mean * area - total) / free_w;
    for (int n = 0; n < nn; ++n)
      if (!clamped_at(prob, n)) out.values(n, 0) += c;
  } else {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(out.n_phases);
    for (int n = 0; n < nn; ++n) total += wgt[n] * out.values.row(n).transpose();
    const Eigen::VectorXd c =
        (mean_target(prob, out.n_phases) * area - total) / free_w;
    for (int n = 0; n < nn; ++n)
      if (!clamped_at(prob, n)) out.values.row(n) += c.transpose();
  }
  return out;
}

}  // namespace specopt
