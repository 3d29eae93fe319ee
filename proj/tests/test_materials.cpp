#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "specopt/materials.hpp"

using namespace specopt;

namespace {

MaterialModel model_eps(double eps) {
  MaterialModel m = MaterialModel::two_phase(1.0, 0.3, 1.0, 2e-4, 1e-4);
  m.epsilon = eps;
  return m;
}

MaterialModel three_phase_model(double eps) {
  MaterialModel m = model_eps(eps);
  m.solids.push_back(isotropic_material(2.0, 0.2, 0.7));
  return m;
}

// best central difference over a small step sweep
double best_fd(const std::function<double(double)>& f, double x, double analytic) {
  double best = 1e300;
  for (double h : {1e-4, 1e-5, 1e-6, 1e-7}) {
    const double fd = (f(x + h) - f(x - h)) / (2.0 * h);
    best = std::min(best, std::abs(fd - analytic));
  }
  return best;
}

}  // namespace

TEST_CASE("isotropic material from Young's modulus and Poisson ratio") {
  // E = 1, nu = 0.3 gives mu ~ 0.38 and lame ~ 0.58
  const auto m = isotropic_material(1.0, 0.3, 1.0);
  CHECK(m.mu == doctest::Approx(1.0 / 2.6).epsilon(1e-12));
  CHECK(m.lame == doctest::Approx(0.3 / (1.3 * 0.4)).epsilon(1e-12));
  CHECK(m.mu == doctest::Approx(0.3846).epsilon(1e-3));
  CHECK(m.lame == doctest::Approx(0.5769).epsilon(1e-3));
}

TEST_CASE("interpolation endpoints reproduce pure phases") {
  const auto m = model_eps(0.02);
  SUBCASE("scalar material endpoint") {
    const auto C = m.stiffness_scalar(1.0);
    CHECK(C.mu2 == doctest::Approx(2.0 * m.solids[0].mu).epsilon(1e-14));
    CHECK(C.lame == doctest::Approx(m.solids[0].lame).epsilon(1e-14));
    CHECK(m.density_scalar(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("scalar void endpoint carries alpha_bar*eps and beta_bar*eps^2") {
    const auto C = m.stiffness_scalar(-1.0);
    const double a = 2e-4 * 0.02;  // alpha(-1) = 4e-6
    CHECK(a == doctest::Approx(4e-6));
    CHECK(C.mu2 == doctest::Approx(a * 2.0 * m.solids[0].mu).epsilon(1e-12));
    CHECK(C.lame == doctest::Approx(a * m.solids[0].lame).epsilon(1e-12));
    const double b = 1e-4 * 0.02 * 0.02;  // beta(-1) = 4e-8
    CHECK(b == doctest::Approx(4e-8));
    CHECK(m.density_scalar(-1.0) == doctest::Approx(b).epsilon(1e-12));
  }
  SUBCASE("vector endpoints, three phases") {
    const auto m3 = three_phase_model(0.02);
    Eigen::Vector3d e1(1, 0, 0), e2(0, 1, 0), e3(0, 0, 1);
    auto C1 = m3.stiffness_at(e1);
    CHECK(C1.mu2 == doctest::Approx(2.0 * m3.solids[0].mu).epsilon(1e-14));
    auto C2 = m3.stiffness_at(e2);
    CHECK(C2.mu2 == doctest::Approx(2.0 * m3.solids[1].mu).epsilon(1e-14));
    CHECK(C2.lame == doctest::Approx(m3.solids[1].lame).epsilon(1e-14));
    CHECK(m3.density_at(e1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m3.density_at(e2) == doctest::Approx(0.7).epsilon(1e-14));
    // pure void: eps^k * void shape
    auto C3 = m3.stiffness_at(e3);
    CHECK(C3.mu2 ==
          doctest::Approx(0.02 * 2.0 * m3.void_shape.mu).epsilon(1e-12));
    CHECK(m3.density_at(e3) ==
          doctest::Approx(0.02 * 0.02 * m3.void_shape.rho).epsilon(1e-12));
    CHECK(m3.density_at(e3, false) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("endpoint derivatives vanish on the void side") {
  const auto m = model_eps(0.02);
  // alpha'(-1) = 0 and beta'(-1) = 0 for the quadratic interpolations
  const auto dC = m.stiffness_scalar_deriv(-1.0);
  CHECK(std::abs(dC.mu2) < 1e-14);
  CHECK(std::abs(dC.lame) < 1e-14);
  CHECK(std::abs(m.density_scalar_deriv(-1.0)) < 1e-14);
}

TEST_CASE("scalar derivatives match finite differences") {
  const auto m = model_eps(0.02);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dist(-0.98, 0.98);
  for (int trial = 0; trial < 100; ++trial) {
    const double u = dist(rng);
    const auto d = m.stiffness_scalar_deriv(u);
    const double scale_mu = std::max(1e-8, std::abs(d.mu2));
    CHECK(best_fd([&](double x) { return m.stiffness_scalar(x).mu2; }, u, d.mu2) <=
          1e-5 * scale_mu + 1e-11);
    const double dr = m.density_scalar_deriv(u);
    CHECK(best_fd([&](double x) { return m.density_scalar(x); }, u, dr) <=
          1e-5 * std::max(1e-8, std::abs(dr)) + 1e-11);
  }
}

TEST_CASE("vector derivatives match finite differences at interior points") {
  const auto m3 = three_phase_model(0.05);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd phi(3);
    for (int i = 0; i < 3; ++i) phi[i] = dist(rng);
    phi /= phi.sum();

    std::vector<IsoTensor> dC;
    m3.stiffness_deriv(phi, dC);
    Eigen::VectorXd dr;
    m3.density_deriv(phi, dr);

    // tangentiality: component sums vanish by the projection chain rule
    double sum_mu = 0.0, sum_rho = 0.0;
    for (int i = 0; i < 3; ++i) {
      sum_mu += dC[i].mu2;
      sum_rho += dr[i];
    }
    CHECK(std::abs(sum_mu) < 1e-12);
    CHECK(std::abs(sum_rho) < 1e-12);

    for (int i = 0; i < 3; ++i) {
      auto fmu = [&](double t) {
        Eigen::VectorXd p = phi;
        p[i] += t;
        return m3.stiffness_at(p).mu2;
      };
      auto frho = [&](double t) {
        Eigen::VectorXd p = phi;
        p[i] += t;
        return m3.density_at(p);
      };
      const double scale = std::max({1.0, std::abs(dC[i].mu2), std::abs(dr[i])});
      CHECK(best_fd(fmu, 0.0, dC[i].mu2) <= 1e-5 * scale);
      CHECK(best_fd(frho, 0.0, dr[i]) <= 1e-5 * scale);
      ++checked;
    }
  }
  CHECK(checked == 300);
}

TEST_CASE("vector derivative at the barycenter is tight") {
  const auto m3 = three_phase_model(0.05);
  Eigen::VectorXd bary = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  std::vector<IsoTensor> dC;
  m3.stiffness_deriv(bary, dC);
  for (int i = 0; i < 3; ++i) {
    auto f = [&](double t) {
      Eigen::VectorXd p = bary;
      p[i] += t;
      return m3.stiffness_at(p).mu2;
    };
    CHECK(best_fd(f, 0.0, dC[i].mu2) <= 1e-6 * std::max(1.0, std::abs(dC[i].mu2)));
  }
}

TEST_CASE("potential values and derivative") {
  const auto pot = Potential::double_obstacle(3);
  SUBCASE("simplex vertices are well minima") {
    Eigen::Vector3d e2(0, 1, 0);
    CHECK(pot.value(e2) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(Potential::scalar_value(1.0) == doctest::Approx(0.0));
    CHECK(Potential::scalar_value(-1.0) == doctest::Approx(0.0));
  }
  SUBCASE("scalar midpoint value") {
    CHECK(Potential::scalar_value(0.0) == doctest::Approx(0.5));
  }
  SUBCASE("derivative matches finite differences") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::Vector3d p(dist(rng), dist(rng), dist(rng));
    const Eigen::VectorXd g = pot.deriv(p);
    for (int i = 0; i < 3; ++i) {
      auto f = [&](double t) {
        Eigen::Vector3d q = p;
        q[i] += t;
        return pot.value(q);
      };
      const double h = 1e-6;
      CHECK(std::abs((f(h) - f(-h)) / (2 * h) - g[i]) < 1e-8);
    }
    CHECK(Potential::scalar_deriv(0.25) == doctest::Approx(-0.25));
  }
}

TEST_CASE("cutoff is the identity inside, clamps outside, and is C1") {
  const auto m = model_eps(0.02);  // omega = 0.1
  CHECK(m.cutoff(0.3) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(m.cutoff(0.0) == doctest::Approx(0.0));
  CHECK(m.cutoff(1.0) == doctest::Approx(1.0));
  CHECK(m.cutoff(-0.5) == doctest::Approx(-0.1));   // exact clamp at -omega
  CHECK(m.cutoff(2.0) == doctest::Approx(1.1));     // exact clamp at 1+omega
  CHECK(m.cutoff_deriv(-0.5) == 0.0);
  CHECK(m.cutoff_deriv(2.0) == 0.0);

  // C1 continuity across the four junction points
  for (double v0 : {-0.1, 0.0, 1.0, 1.1}) {
    const double h = 1e-9;
    CHECK(m.cutoff(v0 + h) - m.cutoff(v0 - h) ==
          doctest::Approx(2 * h * m.cutoff_deriv(v0)).epsilon(1e-3));
    CHECK(std::abs(m.cutoff_deriv(v0 + h) - m.cutoff_deriv(v0 - h)) < 1e-6);
  }
  // blends stay within the clamped range (monotone)
  for (double v = -0.099; v < 0.0; v += 0.007)
    CHECK(m.cutoff(v) >= -0.1 - 1e-15);
  for (double v = 1.001; v < 1.099; v += 0.007)
    CHECK(m.cutoff(v) <= 1.1 + 1e-15);
}

TEST_CASE("positivity across the simplex") {
  const auto m3 = three_phase_model(0.02);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd phi(3);
    for (int i = 0; i < 3; ++i) phi[i] = dist(rng);
    const double s = phi.sum();
    if (s <= 0) continue;
    phi /= s;
    const auto C = m3.stiffness_at(phi);
    // C B : B = mu2 |B|^2 + lame tr(B)^2 >= theta |B|^2 needs mu2 > 0
    CHECK(C.mu2 > 0.0);
    CHECK(C.mu2 + 2.0 * C.lame > 0.0);  // trace direction
    CHECK(m3.density_at(phi) > 0.0);
  }
}

TEST_CASE("phase field views and violation metric") {
  Eigen::VectorXd u(3);
  u << 1.0, -0.5, 0.2;
  const auto f = PhaseField::scalar(u);
  CHECK(f.is_scalar());
  CHECK(f.n_phases == 2);
  const auto v1 = f.vector_at(1);
  CHECK(v1[0] == doctest::Approx(0.25));
  CHECK(v1[1] == doctest::Approx(0.75));
  CHECK(f.constraint_violation() == doctest::Approx(0.0));

  Eigen::VectorXd bad(2);
  bad << 1.3, -0.4;
  CHECK(PhaseField::scalar(bad).constraint_violation() == doctest::Approx(0.3));

  Eigen::MatrixXd m(2, 3);
  m << 0.5, 0.5, 0.0, 0.2, 0.9, -0.1;
  const auto g = PhaseField::vector(m);
  CHECK(g.constraint_violation() == doctest::Approx(0.1));
  CHECK(g.vector_at(0).sum() == doctest::Approx(1.0));
}
