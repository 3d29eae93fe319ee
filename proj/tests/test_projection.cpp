#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "specopt/projection.hpp"

using namespace specopt;

namespace {

Problem scalar_problem(double mean, bool with_clamp) {
  Problem p;
  p.mesh = build_mesh(8, 4, 2.0, 1.0);
  p.dofs = DofMap(p.mesh);
  p.model = MaterialModel::two_phase(1.0, 0.3, 1.0, 2e-4, 1e-4);
  p.scalar_mean = mean;
  if (with_clamp) {
    p.rho_box = Box{1.75, 2.0, 0.25, 0.75};
    p.rho_factor = 10.0;
    p.clamp_rho_box = true;
  }
  p.finalize();
  return p;
}

Problem vector_problem(const Eigen::Vector3d& mean) {
  Problem p;
  p.mesh = build_mesh(6, 3, 2.0, 1.0);
  p.dofs = DofMap(p.mesh);
  p.model = MaterialModel::two_phase(1.0, 0.3, 1.0, 2e-4, 1e-4);
  p.model.solids.push_back(isotropic_material(2.0, 0.25, 0.6));
  p.vector_mean = mean;
  p.finalize();
  return p;
}

PhaseField random_scalar(const Problem& prob, std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> dist(-amp, amp);
  Eigen::VectorXd u(prob.mesh.num_nodes());
  for (int n = 0; n < u.size(); ++n) u[n] = dist(rng);
  return PhaseField::scalar(u);
}

PhaseField random_vector(const Problem& prob, std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> dist(-amp, amp);
  Eigen::MatrixXd v(prob.mesh.num_nodes(), prob.n_phases());
  for (int n = 0; n < v.rows(); ++n)
    for (int c = 0; c < v.cols(); ++c) v(n, c) = dist(rng);
  return PhaseField::vector(v);
}

// weighted inner product of nodal fields
double wdot(const Problem& prob, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double s = 0.0;
  for (int n = 0; n < a.rows(); ++n)
    s += prob.node_weight[n] * a.row(n).dot(b.row(n));
  return s;
}

double weighted_mean(const Problem& prob, const Eigen::VectorXd& u) {
  double num = 0.0, den = 0.0;
  for (int n = 0; n < u.size(); ++n) {
    num += prob.node_weight[n] * u[n];
    den += prob.node_weight[n];
  }
  return num / den;
}

// Exhaustive active-set oracle for the simplex projection: tries every
// support set, projects onto its affine hull, and keeps the best feasible
// candidate with no gradient pointing into the support.
Eigen::VectorXd simplex_oracle(const Eigen::VectorXd& y) {
  const int n = static_cast<int>(y.size());
  Eigen::VectorXd best;
  double best_d = 1e300;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> sup;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) sup.push_back(i);
    double s = 0.0;
    for (int i : sup) s += y[i];
    const double tau = (s - 1.0) / static_cast<double>(sup.size());
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    bool ok = true;
    for (int i : sup) {
      p[i] = y[i] - tau;
      if (p[i] < -1e-13) ok = false;
    }
    if (!ok) continue;
    const double d = (y - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

// Dykstra's alternating projection between the pointwise obstacle set and
// the weighted mean hyperplane(s); converges to the exact projection onto
// the intersection in the lumped metric.
Eigen::MatrixXd dykstra_oracle(const Problem& prob, const Eigen::MatrixXd& x0,
                               int iters) {
  const int nn = static_cast<int>(x0.rows());
  const int nc = static_cast<int>(x0.cols());
  const bool scalar = nc == 1;
  double W = 0.0;
  for (int n = 0; n < nn; ++n) W += prob.node_weight[n];

  Eigen::MatrixXd x = x0;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(nn, nc);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(nn, nc);
  for (int it = 0; it < iters; ++it) {
    // obstacle (and clamp) set
    Eigen::MatrixXd y(nn, nc);
    Eigen::MatrixXd xp = x + p;
    for (int n = 0; n < nn; ++n) {
      const bool clamped = !prob.clamped.empty() && prob.clamped[n];
      if (scalar) {
        y(n, 0) = clamped ? 1.0 : std::clamp(xp(n, 0), -1.0, 1.0);
      } else if (clamped) {
        y.row(n).setZero();
        y(n, 0) = 1.0;
      } else {
        y.row(n) = simplex_oracle(xp.row(n).transpose()).transpose();
      }
    }
    p = xp - y;
    // mean hyperplane(s), weighted shift per component
    Eigen::MatrixXd yq = y + q;
    Eigen::MatrixXd z = yq;
    for (int c = 0; c < nc; ++c) {
      double target = scalar ? prob.scalar_mean : prob.vector_mean[c];
      double cur = 0.0;
      for (int n = 0; n < nn; ++n) cur += prob.node_weight[n] * yq(n, c);
      z.col(c).array() += (target * W - cur) / W;
    }
    q = yq - z;
    x = z;
  }
  return x;
}

}  // namespace

TEST_CASE("pointwise simplex projection matches the exhaustive oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(trial % 3);  // 2, 3, 4 phases
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = dist(rng);
    const Eigen::VectorXd p = project_simplex(y);
    const Eigen::VectorXd o = simplex_oracle(y);
    CHECK((p - o).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("known values") {
    Eigen::Vector3d c(0.5, 0.5, 0.5);
    CHECK((project_simplex(c) - Eigen::Vector3d::Constant(1.0 / 3))
              .lpNorm<Eigen::Infinity>() <= 1e-15);
    Eigen::Vector2d e(1.2, -0.3);
    CHECK((project_simplex(e) - Eigen::Vector2d(1.0, 0.0)).lpNorm<Eigen::Infinity>() <=
          1e-15);
    Eigen::Vector3d onsimplex(0.2, 0.5, 0.3);
    CHECK((project_simplex(onsimplex) - onsimplex).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("admissible projection: idempotence, mean, and variational inequality") {
  for (const bool with_clamp : {false, true}) {
    CAPTURE(with_clamp);
    Problem prob = scalar_problem(0.1, with_clamp);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = random_scalar(prob, rng, 1.8);
      const auto res = project_admissible(prob, x);
      const Eigen::VectorXd u = res.field.values.col(0);

      // feasibility
      CHECK(u.minCoeff() >= -1.0);
      CHECK(u.maxCoeff() <= 1.0);
      CHECK(weighted_mean(prob, u) == doctest::Approx(0.1).epsilon(1e-10));
      if (with_clamp)
        for (int n = 0; n < prob.mesh.num_nodes(); ++n)
          if (prob.clamped[n]) CHECK(u[n] == 1.0);

      // bitwise idempotence
      const auto res2 = project_admissible(prob, res.field);
      CHECK((res2.field.values - res.field.values).lpNorm<Eigen::Infinity>() == 0.0);

      // variational inequality against random admissible points
      for (int probe = 0; probe < 10; ++probe) {
        const auto xi = project_admissible(prob, random_scalar(prob, rng, 1.8));
        const double vi =
            wdot(prob, x.values - res.field.values, xi.field.values - res.field.values);
        CHECK(vi <= 1e-10);
      }

      // active set labels the binding bound
      for (int n = 0; n < prob.mesh.num_nodes(); ++n) {
        if (res.active(n, 0) == 1) CHECK(u[n] == 1.0);
        if (res.active(n, 0) == -1) CHECK(u[n] == -1.0);
      }
    }
  }
}

TEST_CASE("admissible projection agrees with the alternating-projection oracle") {
  SUBCASE("scalar with clamps") {
    Problem prob = scalar_problem(0.0, true);
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_scalar(prob, rng, 1.9);
      const auto res = project_admissible(prob, x);
      const auto oracle = dykstra_oracle(prob, x.values, 2000);
      CHECK((res.field.values - oracle).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
  }
  SUBCASE("three phases") {
    Problem prob = vector_problem(Eigen::Vector3d(0.4, 0.35, 0.25));
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_vector(prob, rng, 1.4);
      const auto res = project_admissible(prob, x);
      const auto oracle = dykstra_oracle(prob, x.values, 3000);
      CHECK((res.field.values - oracle).lpNorm<Eigen::Infinity>() <= 1e-7);
    }
  }
}

TEST_CASE("vector projection feasibility and idempotence") {
  Problem prob = vector_problem(Eigen::Vector3d(0.4, 0.35, 0.25));
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_vector(prob, rng, 1.5);
    const auto res = project_admissible(prob, x);
    const Eigen::MatrixXd& v = res.field.values;
    CHECK(v.minCoeff() >= 0.0);
    for (int n = 0; n < v.rows(); ++n)
      CHECK(v.row(n).sum() == doctest::Approx(1.0).epsilon(1e-10));
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd col = v.col(c);
      CHECK(weighted_mean(prob, col) ==
            doctest::Approx(prob.vector_mean[c]).epsilon(1e-10));
    }
    const auto res2 = project_admissible(prob, res.field);
    CHECK((res2.field.values - v).lpNorm<Eigen::Infinity>() == 0.0);

    // variational inequality in the vector setting
    for (int probe = 0; probe < 5; ++probe) {
      const auto xi = project_admissible(prob, random_vector(prob, rng, 1.5));
      const double vi = wdot(prob, x.values - v, xi.field.values - v);
      CHECK(vi <= 1e-10);
    }
  }
}

TEST_CASE("interior constant shifts exactly to the mean") {
  Problem prob = scalar_problem(0.0, false);
  const int nn = prob.mesh.num_nodes();
  const auto res = project_admissible(
      prob, PhaseField::scalar(Eigen::VectorXd::Constant(nn, 0.5)));
  CHECK(res.field.values.lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK(res.scalar_shift == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(res.active.cwiseAbs().sum() == 0);

  // an admissible input is a fixed point with zero shift
  const auto res2 = project_admissible(prob, prob.constant_field());
  CHECK(res2.scalar_shift == 0.0);
  CHECK((res2.field.values - prob.constant_field().values).lpNorm<Eigen::Infinity>() ==
        0.0);
}

TEST_CASE("affine projection restores means without the obstacle") {
  SUBCASE("scalar") {
    Problem prob = scalar_problem(0.2, false);
    std::mt19937_64 rng(3);
    const auto x = random_scalar(prob, rng, 3.0);
    const auto out = project_affine(prob, x);
    CHECK(weighted_mean(prob, out.values.col(0)) == doctest::Approx(0.2).epsilon(1e-12));
    // differs from the input by a constant; out-of-box values survive
    const Eigen::VectorXd d = out.values.col(0) - x.values.col(0);
    CHECK((d.array() - d[0]).abs().maxCoeff() <= 1e-13);
  }
  SUBCASE("vector") {
    Problem prob = vector_problem(Eigen::Vector3d(0.4, 0.35, 0.25));
    std::mt19937_64 rng(7);
    const auto x = random_vector(prob, rng, 2.0);
    const auto out = project_affine(prob, x);
    for (int n = 0; n < out.values.rows(); ++n)
      CHECK(out.values.row(n).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd col = out.values.col(c);
      CHECK(weighted_mean(prob, col) ==
            doctest::Approx(prob.vector_mean[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("unreachable mean is rejected") {
  // clamps force u = 1 on the right block; with the free nodes pinned at the
  // lower bound the lowest reachable mean still exceeds -0.9
  Problem prob = scalar_problem(-0.9, true);
  double wc = 0.0, W = 0.0;
  for (int n = 0; n < prob.mesh.num_nodes(); ++n) {
    W += prob.node_weight[n];
    if (prob.clamped[n]) wc += prob.node_weight[n];
  }
  REQUIRE((wc * 1.0 + (W - wc) * -1.0) / W > -0.9);
  std::mt19937_64 rng(1);
  const auto x = random_scalar(prob, rng, 1.0);
  CHECK_THROWS_AS(project_admissible(prob, x), std::invalid_argument);
}
