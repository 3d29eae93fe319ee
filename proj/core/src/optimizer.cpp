#include "specopt/optimizer.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace specopt {

namespace {

double dist_l2(const Problem& prob, const Eigen::MatrixXd& a,
               const Eigen::MatrixXd& b) {
  double s = 0.0;
  for (int n = 0; n < a.rows(); ++n)
    s += prob.node_weight[n] * (a.row(n) - b.row(n)).squaredNorm();
  return std::sqrt(s);
}

// H1 smoothing (gamma*eps*L + lumped mass)^-1 applied columnwise
struct Smoother {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;

  void prepare(const Problem& prob, double gamma) {
    Eigen::SparseMatrix<double> S =
        (gamma * prob.model.epsilon) * prob.laplacian;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(S.rows());
    for (int n = 0; n < S.rows(); ++n) t.emplace_back(n, n, prob.node_weight[n]);
    Eigen::SparseMatrix<double> D(S.rows(), S.cols());
    D.setFromTriplets(t.begin(), t.end());
    S += D;
    ldlt.compute(S);
    if (ldlt.info() != Eigen::Success)
      throw SolverError("optimizer: smoothing operator factorization failed");
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& dual) const {
    Eigen::MatrixXd d(dual.rows(), dual.cols());
    for (int c = 0; c < dual.cols(); ++c) d.col(c) = ldlt.solve(dual.col(c));
    return d;
  }
};

Eigen::MatrixXd search_direction(const Problem& prob, const OptimizerOptions& opts,
                                 const Smoother& sm, const GradientField& g) {
  if (opts.h1_smoothing) return sm.apply(g.dual);
  Eigen::MatrixXd d = g.dual;
  for (int n = 0; n < d.rows(); ++n) d.row(n) /= prob.node_weight[n];
  return d;
}

}  // namespace

double penalty_term(const Problem& prob, const PhaseField& phi) {
  double s = 0.0;
  for (int n = 0; n < phi.num_nodes(); ++n) {
    if (phi.is_scalar()) {
      const double u = phi.values(n, 0);
      const double a = std::min(0.5 * (1.0 + u), 0.0);
      const double b = std::min(0.5 * (1.0 - u), 0.0);
      s += prob.node_weight[n] * (a * a + b * b);
    } else {
      for (int i = 0; i < phi.values.cols(); ++i) {
        const double m = std::min(phi.values(n, i), 0.0);
        s += prob.node_weight[n] * m * m;
      }
    }
  }
  return s;
}

Eigen::MatrixXd penalty_gradient_dual(const Problem& prob, const PhaseField& phi) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(phi.num_nodes(), phi.values.cols());
  for (int n = 0; n < phi.num_nodes(); ++n) {
    if (!prob.clamped.empty() && prob.clamped[n]) continue;
    if (phi.is_scalar()) {
      const double u = phi.values(n, 0);
      g(n, 0) = prob.node_weight[n] * (std::min(0.5 * (1.0 + u), 0.0) -
                                       std::min(0.5 * (1.0 - u), 0.0));
    } else {
      for (int i = 0; i < phi.values.cols(); ++i)
        g(n, i) = prob.node_weight[n] * 2.0 * std::min(phi.values(n, i), 0.0);
    }
  }
  return g;
}

double negative_part_l2(const Problem& prob, const PhaseField& phi) {
  return std::sqrt(penalty_term(prob, phi));
}

OptState run(const Problem& prob, const ObjectiveSpec& spec,
             const OptimizerOptions& opts, const PhaseField& phi0,
             EvalWorkspace* ws, const RowCallback& on_row) {
  spec.validate(prob);
  EvalWorkspace local_ws;
  if (!ws) ws = &local_ws;
  ws->relax_obstacle = opts.penalty_mode;

  std::vector<double> deltas;
  if (opts.penalty_mode) {
    deltas = opts.delta_schedule;
    if (deltas.empty())
      throw std::invalid_argument("optimizer: penalty mode needs a delta schedule");
    for (size_t i = 0; i < deltas.size(); ++i)
      if (deltas[i] <= 0.0 || (i > 0 && deltas[i] >= deltas[i - 1]))
        throw std::invalid_argument(
            "optimizer: delta schedule must be positive and strictly decreasing");
  } else {
    deltas = {0.0};
  }

  Smoother sm;
  if (opts.h1_smoothing) sm.prepare(prob, spec.gamma);

  OptState st;
  st.phi = phi0;
  st.tau = opts.tau_init;

  int iter = 0;
  auto push_row = [&](const Evaluation& ev, double Jval, double step,
                      double gradnorm) {
    HistoryRow row;
    row.iter = iter;
    row.J = Jval;
    row.lambdas = ev.lambdas;
    row.glandau = ev.glandau;
    row.compliance = ev.compliance;
    row.step = step;
    row.gradnorm = gradnorm;
    st.history.push_back(row);
    if (on_row) on_row(st.history.back());
  };

  Evaluation ev;
  double pi = 0.0;
  bool first_stage = true;

  for (double delta : deltas) {
    const bool pen = opts.penalty_mode;
    const double wpen = pen ? spec.gamma / (prob.model.epsilon * delta) : 0.0;
    auto project_here = [&](const PhaseField& f) {
      return pen ? project_affine(prob, f) : project_admissible(prob, f).field;
    };
    auto value_of = [&](const Evaluation& e, const PhaseField& f) {
      return pen ? e.J + wpen * penalty_term(prob, f) : e.J;
    };

    st.phi = project_here(st.phi);
    ev = evaluate_objective(prob, spec, st.phi, *ws);
    double Jcur = value_of(ev, st.phi);
    GradientField g = total_gradient(prob, spec, st.phi, ev);
    if (pen) {
      g.gl_part += wpen * penalty_gradient_dual(prob, st.phi);
      g.dual = g.gl_part + g.eigen_part + g.compliance_part;
    }
    // the weighted-metric gradient map; the smoothed direction only steers the
    // steps, the stationarity measure stays with this map so that bound-active
    // nodes (where smoothing leaks neighbor gradients in) cannot keep it from
    // vanishing at a constrained stationary point
    auto raw_direction = [&](const GradientField& gf) {
      Eigen::MatrixXd r = gf.dual;
      for (int n = 0; n < r.rows(); ++n) r.row(n) /= prob.node_weight[n];
      return r;
    };
    Eigen::MatrixXd d = search_direction(prob, opts, sm, g);
    Eigen::MatrixXd draw = raw_direction(g);
    auto stationarity = [&]() {
      PhaseField t = st.phi;
      t.values -= draw;
      return dist_l2(prob, st.phi.values, project_here(t).values);
    };
    pi = stationarity();
    const double pi_target = opts.tol_abs + opts.tol_rel * pi;
    st.degeneracy_warned = st.degeneracy_warned || ev.near_degenerate;
    if (first_stage) {
      st.stationarity0 = pi;
      push_row(ev, Jcur, 0.0, g.l2(prob.node_weight));
      first_stage = false;
    }
    st.stop = StopReason::max_iterations;

    double tau_raw = opts.tau_init;
    int smooth_fails = 0;
    PhaseField cand;
    Evaluation cand_ev;
    double cand_J = 0.0;
    // accepted steps must beat both the Armijo model and the evaluation noise
    // of J, otherwise roundoff-level "decreases" drag the step memory to zero
    auto try_direction = [&](const Eigen::MatrixXd& dir, double& tau_mem) {
      double tau_try = tau_mem * 2.0;
      const double noise =
          32.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(Jcur));
      for (int h = 0; h <= opts.max_halvings; ++h, tau_try *= 0.5) {
        PhaseField t = st.phi;
        t.values -= tau_try * dir;
        t = project_here(t);
        const double dd = dist_l2(prob, st.phi.values, t.values);
        if (dd == 0.0) break;  // step rounds away: stalled
        Evaluation et = evaluate_objective(prob, spec, t, *ws);
        const double Jt = value_of(et, t);
        if (Jt <= Jcur - std::max(opts.armijo_c1 / tau_try * dd * dd, noise)) {
          cand = std::move(t);
          cand_ev = std::move(et);
          cand_J = Jt;
          tau_mem = tau_try;
          return true;
        }
      }
      return false;
    };

    while (iter < opts.max_iter) {
      if (pi <= pi_target) {
        st.stop = StopReason::stationary;
        break;
      }
      bool accepted = false;
      double step_taken = 0.0;
      if (opts.h1_smoothing) {
        // near bang-bang configurations the smoothed direction exhausts its
        // descent while the raw map still moves; fall back, and stop offering
        // the smoothed direction once it has failed repeatedly
        const bool try_smooth = smooth_fails < 2;
        if (try_smooth && try_direction(d, st.tau)) {
          accepted = true;
          step_taken = st.tau;
        } else {
          if (try_smooth) ++smooth_fails;
          if (try_direction(draw, tau_raw)) {
            accepted = true;
            step_taken = tau_raw;
          }
        }
      } else if (try_direction(d, st.tau)) {
        accepted = true;
        step_taken = st.tau;
      }
      if (!accepted) {
        st.stop = StopReason::line_search_failed;
        break;
      }
      ++iter;
      st.iterations = iter;
      st.phi = std::move(cand);
      ev = std::move(cand_ev);
      Jcur = cand_J;
      st.degeneracy_warned = st.degeneracy_warned || ev.near_degenerate;
      g = total_gradient(prob, spec, st.phi, ev);
      if (pen) {
        g.gl_part += wpen * penalty_gradient_dual(prob, st.phi);
        g.dual = g.gl_part + g.eigen_part + g.compliance_part;
      }
      d = search_direction(prob, opts, sm, g);
      draw = raw_direction(g);
      pi = stationarity();
      push_row(ev, Jcur, step_taken, g.l2(prob.node_weight));
    }
  }

  st.eval = std::move(ev);
  st.stationarity = pi;
  return st;
}

std::vector<ContinuationEntry> epsilon_continuation(
    Problem& prob, const ObjectiveSpec& spec, const OptimizerOptions& opts,
    const std::vector<double>& schedule, const PhaseField& phi0,
    std::vector<std::string>* warnings, EvalWorkspace* ws,
    const RowCallback& on_row) {
  if (schedule.empty())
    throw std::invalid_argument("epsilon_continuation: empty schedule");
  for (size_t i = 1; i < schedule.size(); ++i)
    if (!(schedule[i] < schedule[i - 1]))
      throw std::invalid_argument(
          "epsilon_continuation: schedule must be strictly decreasing");

  std::vector<ContinuationEntry> out;
  PhaseField phi = phi0;
  const double h = std::max(prob.mesh.hx(), prob.mesh.hy());
  for (double eps : schedule) {
    if (warnings && h > 0.5 * eps)
      warnings->push_back("interface width eps=" + std::to_string(eps) +
                          " is under-resolved by the mesh size h=" +
                          std::to_string(h));
    prob.model.epsilon = eps;
    ContinuationEntry e;
    e.epsilon = eps;
    e.state = run(prob, spec, opts, phi, ws, on_row);
    e.gamma_energy = spec.gamma * e.state.eval.glandau;
    e.lambda1 = e.state.eval.lambdas.empty() ? 0.0 : e.state.eval.lambdas[0];
    phi = e.state.phi;
    out.push_back(std::move(e));
  }
  return out;
}

PhaseField penalty_mode_step(const Problem& prob, const ObjectiveSpec& spec,
                             const PhaseField& phi, double delta, double tau,
                             EvalWorkspace* ws) {
  if (delta <= 0.0)
    throw std::invalid_argument("penalty_mode_step: delta must be positive");
  EvalWorkspace local_ws;
  if (!ws) ws = &local_ws;
  const bool saved = ws->relax_obstacle;
  ws->relax_obstacle = true;
  Evaluation ev = evaluate_objective(prob, spec, phi, *ws);
  GradientField g = total_gradient(prob, spec, phi, ev);
  ws->relax_obstacle = saved;

  const double wpen = spec.gamma / (prob.model.epsilon * delta);
  const Eigen::MatrixXd dual = g.dual + wpen * penalty_gradient_dual(prob, phi);
  PhaseField out = phi;
  for (int n = 0; n < out.num_nodes(); ++n)
    out.values.row(n) -= (tau / prob.node_weight[n]) * dual.row(n);
  return project_affine(prob, out);
}

PhaseField solve_penalty_scalar(const Problem& prob, const Eigen::VectorXd& forcing,
                                double gamma, double delta, const PhaseField& phi0,
                                bool include_psi0, int max_iter) {
  if (delta <= 0.0)
    throw std::invalid_argument("solve_penalty_scalar: delta must be positive");
  if (!phi0.is_scalar())
    throw std::invalid_argument("solve_penalty_scalar: scalar storage required");
  if (prob.num_clamped() > 0)
    throw std::invalid_argument("solve_penalty_scalar: clamped nodes unsupported");
  const int n = phi0.num_nodes();
  if (forcing.size() != n)
    throw std::invalid_argument("solve_penalty_scalar: forcing size mismatch");

  const double eps = prob.model.epsilon;
  const double area = prob.mesh.area();
  const Eigen::SparseMatrix<double>& L = prob.laplacian;
  const std::vector<double>& wv = prob.node_weight;
  const double cpen = gamma / (eps * delta);
  const double mean_target = prob.scalar_mean * area;

  auto psihat_p = [](double v) {
    return std::min(0.5 * (1.0 + v), 0.0) - std::min(0.5 * (1.0 - v), 0.0);
  };
  auto psihat_pp = [](double v) { return (v < -1.0 || v > 1.0) ? 0.5 : 0.0; };

  Eigen::VectorXd u = phi0.values.col(0);
  double theta = 0.0;

  auto residual = [&](const Eigen::VectorXd& uu, double th, Eigen::VectorXd& R) {
    R = gamma * eps * (L * uu);
    for (int i = 0; i < n; ++i) {
      double r = cpen * wv[i] * psihat_p(uu[i]);
      if (include_psi0) r -= (gamma / eps) * wv[i] * uu[i];
      R[i] += r - forcing[i] + th * wv[i];
    }
  };
  auto mean_of = [&](const Eigen::VectorXd& uu) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += wv[i] * uu[i];
    return s;
  };

  Eigen::VectorXd R(n), Rt(n);
  residual(u, theta, R);
  double rm = mean_of(u) - mean_target;
  double merit = R.squaredNorm() + rm * rm;
  // the residual cannot be evaluated below the roundoff of the stiff penalty
  // rows (entries cpen*w_i*psihat'), so the target keeps that noise floor
  double wmax = 0.0;
  for (int i = 0; i < n; ++i) wmax = std::max(wmax, wv[i]);
  const double noise_floor =
      1024.0 * std::numeric_limits<double>::epsilon() * cpen * wmax;
  const double rtol =
      1e-11 * std::max(1.0, forcing.lpNorm<Eigen::Infinity>()) + noise_floor;
  const double mtol = 1e-12 * std::max(1.0, area);
  double reg = 0.0;

  for (int it = 0; it < max_iter; ++it) {
    if (R.lpNorm<Eigen::Infinity>() <= rtol && std::abs(rm) <= mtol) break;

    // bordered semismooth Newton system [[H, w], [w', 0]]
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(L.nonZeros()) + 3 * n);
    for (int k = 0; k < L.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator li(L, k); li; ++li)
        trips.emplace_back(static_cast<int>(li.row()), static_cast<int>(li.col()),
                           gamma * eps * li.value());
    for (int i = 0; i < n; ++i) {
      double dia = cpen * wv[i] * psihat_pp(u[i]) + reg * wv[i];
      if (include_psi0) dia -= (gamma / eps) * wv[i];
      trips.emplace_back(i, i, dia);
      trips.emplace_back(i, n, wv[i]);
      trips.emplace_back(n, i, wv[i]);
    }
    Eigen::SparseMatrix<double> A(n + 1, n + 1);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
      reg = (reg == 0.0 ? 1e-8 : reg * 100.0);
      if (reg > 1e12)
        throw SolverError("solve_penalty_scalar: singular Newton system");
      continue;
    }
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = -R;
    rhs[n] = -rm;
    const Eigen::VectorXd dustep = lu.solve(rhs);

    double step = 1.0;
    bool ok = false;
    for (int h = 0; h < 30; ++h, step *= 0.5) {
      const Eigen::VectorXd ut = u + step * dustep.head(n);
      const double tht = theta + step * dustep[n];
      residual(ut, tht, Rt);
      const double rmt = mean_of(ut) - mean_target;
      const double mt = Rt.squaredNorm() + rmt * rmt;
      if (mt < merit * (1.0 - 1e-4 * step) || mt <= rtol * rtol) {
        u = ut;
        theta = tht;
        R = Rt;
        rm = rmt;
        merit = mt;
        ok = true;
        break;
      }
    }
    if (!ok) {
      reg = (reg == 0.0 ? 1e-8 : reg * 100.0);
      if (reg > 1e12) throw SolverError("solve_penalty_scalar: no progress");
    } else if (reg > 0.0) {
      reg = (reg < 1e-13 ? 0.0 : reg * 0.1);
    }
  }
  if (R.lpNorm<Eigen::Infinity>() > rtol || std::abs(rm) > mtol)
    throw SolverError("solve_penalty_scalar: Newton did not converge");

  PhaseField out = phi0;
  out.values.col(0) = u;
  return out;
}

PhaseField solve_obstacle_scalar(const Problem& prob, const Eigen::VectorXd& forcing,
                                 double gamma, const PhaseField& phi0,
                                 bool include_psi0) {
  // drive the penalty to machine level with warm-started continuation, then
  // snap the remaining violation away
  PhaseField f = phi0;
  for (double d : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12})
    f = solve_penalty_scalar(prob, forcing, gamma, d, f, include_psi0, 400);
  return project_admissible(prob, f).field;
}

}  // namespace specopt
