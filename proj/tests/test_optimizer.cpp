#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "specopt/optimizer.hpp"

using namespace specopt;

namespace {

Problem make_problem(int nx, int ny, bool dirichlet_left) {
  Problem p;
  p.mesh = build_mesh(nx, ny, 2.0, 1.0);
  p.dofs = DofMap(p.mesh);
  if (dirichlet_left) p.dofs.constrain_edge(p.mesh, Edge::left);
  p.model = MaterialModel::two_phase(1.0, 0.3, 1.0, 2e-4, 1e-4);
  p.model.epsilon = 0.3;
  p.scalar_mean = 0.0;
  p.finalize();
  return p;
}

PhaseField random_field(const Problem& prob, std::uint64_t seed, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  Eigen::VectorXd u(prob.mesh.num_nodes());
  for (int n = 0; n < u.size(); ++n) u[n] = dist(rng);
  return PhaseField::scalar(u);
}

double weighted_mean(const Problem& prob, const Eigen::VectorXd& u) {
  double num = 0.0, den = 0.0;
  for (int n = 0; n < u.size(); ++n) {
    num += prob.node_weight[n] * u[n];
    den += prob.node_weight[n];
  }
  return num / den;
}

double wnorm(const Problem& prob, const Eigen::MatrixXd& a) {
  double s = 0.0;
  for (int n = 0; n < a.rows(); ++n)
    s += prob.node_weight[n] * a.row(n).squaredNorm();
  return std::sqrt(s);
}

ObjectiveSpec pure_interface_spec(double gamma) {
  ObjectiveSpec s;
  s.gamma = gamma;
  return s;
}

ObjectiveSpec eigen_spec(double gamma) {
  ObjectiveSpec s;
  s.eigen_indices = {1};
  s.weights = {-1.0};
  s.gamma = gamma;
  return s;
}

}  // namespace

TEST_CASE("a discrete stationary start stops without iterating") {
  // the zero field is a stationary point of the interface energy at mean 0:
  // both the Laplacian term and psi0' vanish there
  Problem prob = make_problem(8, 4, false);
  const auto spec = pure_interface_spec(1.0);
  OptimizerOptions opts;
  const auto phi0 = PhaseField::scalar(Eigen::VectorXd::Zero(prob.mesh.num_nodes()));
  const auto st = run(prob, spec, opts, phi0);
  CHECK(st.iterations == 0);
  CHECK(st.stop == StopReason::stationary);
  CHECK(st.history.size() == 1);
  CHECK(st.stationarity == 0.0);
}

TEST_CASE("interface energy descent: monotone, feasible, convergent") {
  Problem prob = make_problem(16, 8, false);
  const auto spec = pure_interface_spec(1.0);
  OptimizerOptions opts;
  opts.max_iter = 400;
  opts.tol_rel = 1e-3;
  const auto st = run(prob, spec, opts, random_field(prob, 3, 0.5));

  CHECK(st.stop == StopReason::stationary);
  CHECK(st.history.size() == static_cast<size_t>(st.iterations + 1));
  for (size_t i = 0; i + 1 < st.history.size(); ++i)
    CHECK(st.history[i + 1].J < st.history[i].J);
  // iterates stay admissible
  CHECK(st.phi.constraint_violation() <= 1e-12);
  CHECK(weighted_mean(prob, st.phi.values.col(0)) == doctest::Approx(0.0).epsilon(1e-9));
  // history rows carry the recorded iteration numbers 0..n
  for (size_t i = 0; i < st.history.size(); ++i)
    CHECK(st.history[i].iter == static_cast<int>(i));
}

TEST_CASE("eigenvalue run is monotone and ends near stationarity") {
  Problem prob = make_problem(8, 4, true);
  prob.model.epsilon = 0.2;
  const auto spec = eigen_spec(1e-3);
  OptimizerOptions opts;
  opts.max_iter = 1500;
  opts.tol_rel = 1e-5;
  opts.tol_abs = 1e-12;
  EvalWorkspace ws;
  const auto st = run(prob, spec, opts, random_field(prob, 11, 0.3), &ws);

  for (size_t i = 0; i + 1 < st.history.size(); ++i)
    CHECK(st.history[i + 1].J <= st.history[i].J);
  CHECK(st.phi.constraint_violation() <= 1e-12);
  // the first eigenvalue grows under maximization
  CHECK(st.history.back().lambdas[0] > st.history.front().lambdas[0]);

  SUBCASE("stationarity implies the discrete gradient inequality") {
    REQUIRE(st.stop == StopReason::stationary);
    const auto grad = total_gradient(prob, spec, st.phi, st.eval);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      const auto cand = project_admissible(prob, random_field(prob, rng(), 1.5));
      const Eigen::MatrixXd diff = cand.field.values - st.phi.values;
      double pairing = 0.0;
      for (int n = 0; n < diff.rows(); ++n)
        pairing += grad.dual.row(n).dot(diff.row(n));
      const double scale =
          grad.l2(prob.node_weight) * wnorm(prob, diff) + std::abs(st.eval.J);
      CHECK(pairing >= -1e-3 * scale);
    }
  }
}

TEST_CASE("continuation runs the schedule and reports stages") {
  Problem prob = make_problem(16, 8, false);
  const auto spec = pure_interface_spec(1.0);
  OptimizerOptions opts;
  opts.max_iter = 200;
  std::vector<std::string> warnings;
  const auto phi0 = random_field(prob, 5, 0.4);
  auto entries = epsilon_continuation(prob, spec, opts, {0.3, 0.15}, phi0, &warnings);

  REQUIRE(entries.size() == 2);
  CHECK(entries[0].epsilon == 0.3);
  CHECK(entries[1].epsilon == 0.15);
  CHECK(prob.model.epsilon == 0.15);
  for (const auto& e : entries) {
    CHECK(e.gamma_energy == spec.gamma * e.state.eval.glandau);
    CHECK(e.lambda1 == 0.0);  // no eigenvalue term configured
  }
  // h = 0.125 under-resolves eps = 0.15 but not eps = 0.3
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("under-resolved") != std::string::npos);

  SUBCASE("schedule validation") {
    CHECK_THROWS_AS(epsilon_continuation(prob, spec, opts, {}, phi0),
                    std::invalid_argument);
    CHECK_THROWS_AS(epsilon_continuation(prob, spec, opts, {0.1, 0.1}, phi0),
                    std::invalid_argument);
  }
}

TEST_CASE("a single-entry schedule reproduces a direct run bitwise") {
  const auto spec = eigen_spec(1e-3);
  OptimizerOptions opts;
  opts.max_iter = 40;
  const auto reference = [&] {
    Problem prob = make_problem(8, 4, true);
    prob.model.epsilon = 0.2;
    return run(prob, spec, opts, random_field(prob, 13, 0.3));
  }();
  Problem prob = make_problem(8, 4, true);
  auto entries =
      epsilon_continuation(prob, spec, opts, {0.2}, random_field(prob, 13, 0.3));
  REQUIRE(entries.size() == 1);
  const auto& st = entries[0].state;
  REQUIRE(st.history.size() == reference.history.size());
  for (size_t i = 0; i < st.history.size(); ++i) {
    CHECK(st.history[i].J == reference.history[i].J);
    CHECK(st.history[i].step == reference.history[i].step);
    CHECK(st.history[i].gradnorm == reference.history[i].gradnorm);
    REQUIRE(st.history[i].lambdas.size() == reference.history[i].lambdas.size());
    for (size_t r = 0; r < st.history[i].lambdas.size(); ++r)
      CHECK(st.history[i].lambdas[r] == reference.history[i].lambdas[r]);
  }
}

TEST_CASE("identical runs produce identical histories") {
  const auto spec = eigen_spec(1e-3);
  OptimizerOptions opts;
  opts.max_iter = 30;
  auto once = [&] {
    Problem prob = make_problem(8, 4, true);
    prob.model.epsilon = 0.2;
    return run(prob, spec, opts, random_field(prob, 17, 0.3));
  };
  const auto a = once();
  const auto b = once();
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].J == b.history[i].J);
    CHECK(a.history[i].gradnorm == b.history[i].gradnorm);
  }
  CHECK((a.phi.values - b.phi.values).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("penalty helpers: values, gradients, and one step") {
  Problem prob = make_problem(8, 4, false);
  const int nn = prob.mesh.num_nodes();

  SUBCASE("zero on admissible fields") {
    const auto adm = project_admissible(prob, random_field(prob, 3, 1.5)).field;
    CHECK(penalty_term(prob, adm) == 0.0);
    CHECK(negative_part_l2(prob, adm) == 0.0);
    CHECK(penalty_gradient_dual(prob, adm).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("known value for a constant violation") {
    // u = -1.2 puts phi^1 = -0.1 below zero everywhere:
    // integral of 0.1^2 over the area-2 domain
    const auto f = PhaseField::scalar(Eigen::VectorXd::Constant(nn, -1.2));
    CHECK(penalty_term(prob, f) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(negative_part_l2(prob, f) ==
          doctest::Approx(0.1 * std::sqrt(2.0)).epsilon(1e-12));
  }

  SUBCASE("one penalized step reduces the violation and keeps the mean") {
    Eigen::VectorXd u(nn);
    for (int n = 0; n < nn; ++n) {
      const double x = prob.mesh.node_x(n);
      u[n] = x < 1.0 ? -2.0 : (x > 1.0 ? 2.0 : 0.0);
    }
    PhaseField phi = PhaseField::scalar(u);
    const double before = negative_part_l2(prob, phi);
    REQUIRE(before > 0.0);
    const auto spec = pure_interface_spec(1.0);
    const auto out = penalty_mode_step(prob, spec, phi, 1e-3, 1e-4);
    CHECK(negative_part_l2(prob, out) < before);
    CHECK(weighted_mean(prob, out.values.col(0)) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(penalty_mode_step(prob, spec, phi, 0.0), std::invalid_argument);
  }
}

TEST_CASE("penalty-mode descent drives the violation down") {
  Problem prob = make_problem(8, 4, false);
  const auto spec = pure_interface_spec(1.0);
  OptimizerOptions opts;
  opts.max_iter = 300;
  opts.penalty_mode = true;
  opts.delta_schedule = {1e-2, 1e-3};
  const auto st = run(prob, spec, opts, random_field(prob, 23, 0.5));
  CHECK(negative_part_l2(prob, st.phi) <= 0.05);
  CHECK(weighted_mean(prob, st.phi.values.col(0)) == doctest::Approx(0.0).epsilon(1e-9));

  SUBCASE("schedule validation") {
    OptimizerOptions bad = opts;
    bad.delta_schedule = {};
    CHECK_THROWS_AS(run(prob, spec, bad, random_field(prob, 1, 0.2)),
                    std::invalid_argument);
    bad.delta_schedule = {1e-2, 1e-2};
    CHECK_THROWS_AS(run(prob, spec, bad, random_field(prob, 1, 0.2)),
                    std::invalid_argument);
  }
}

TEST_CASE("scalar penalty model problem approaches the obstacle solution") {
  Problem prob;
  prob.mesh = build_mesh(16, 8, 2.0, 1.0);
  prob.dofs = DofMap(prob.mesh);
  prob.model = MaterialModel::two_phase(1.0, 0.3, 1.0, 2e-4, 1e-4);
  prob.model.epsilon = 0.1;
  prob.scalar_mean = 0.0;
  prob.finalize();
  const int nn = prob.mesh.num_nodes();

  // forcing that pushes the solution through both bounds
  Eigen::VectorXd f(nn);
  for (int n = 0; n < nn; ++n)
    f[n] = -2.0 * prob.node_weight[n] * std::cos(M_PI * prob.mesh.node_x(n) / 2.0);

  const double gamma = 1.0;
  PhaseField u = PhaseField::scalar(Eigen::VectorXd::Zero(nn));
  std::vector<double> viol;
  for (double delta : {1e-2, 2.5e-3, 6.25e-4}) {
    u = solve_penalty_scalar(prob, f, gamma, delta, u, false);
    CHECK(weighted_mean(prob, u.values.col(0)) == doctest::Approx(0.0).epsilon(1e-8));
    viol.push_back(negative_part_l2(prob, u));
  }
  REQUIRE(viol[0] > 0.0);  // constraints actually bind
  CHECK(viol[1] < viol[0]);
  CHECK(viol[2] < viol[1]);

  // deep in the schedule the solution matches the obstacle-mode reference
  const auto tight = solve_penalty_scalar(prob, f, gamma, 1e-6, u, false);
  const auto obst =
      solve_obstacle_scalar(prob, f, gamma, PhaseField::scalar(Eigen::VectorXd::Zero(nn)), false);
  CHECK(obst.values.col(0).minCoeff() >= -1.0);
  CHECK(obst.values.col(0).maxCoeff() <= 1.0);
  CHECK((tight.values - obst.values).lpNorm<Eigen::Infinity>() <= 1e-3);

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(solve_penalty_scalar(prob, f, gamma, 0.0, u, false),
                    std::invalid_argument);
    Eigen::VectorXd short_f(3);
    CHECK_THROWS_AS(solve_penalty_scalar(prob, short_f, gamma, 1e-2, u, false),
                    std::invalid_argument);
  }
}
