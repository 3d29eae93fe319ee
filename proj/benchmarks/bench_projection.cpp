#include <benchmark/benchmark.h>

#include <random>

#include "specopt/problem.hpp"
#include "specopt/projection.hpp"

namespace {

specopt::Problem make_scalar(int nx, int ny) {
  specopt::Problem p;
  p.mesh = specopt::build_mesh(nx, ny, 2.0, 1.0);
  p.dofs = specopt::DofMap(p.mesh);
  p.dofs.constrain_edge(p.mesh, specopt::Edge::left);
  p.model = specopt::MaterialModel::two_phase(1.0, 0.3, 1.0, 2e-4, 1e-4);
  p.finalize();
  return p;
}

specopt::Problem make_three_phase(int nx, int ny) {
  specopt::Problem p;
  p.mesh = specopt::build_mesh(nx, ny, 1.0, 1.0);
  p.dofs = specopt::DofMap(p.mesh);
  p.dofs.constrain_edge(p.mesh, specopt::Edge::bottom);
  p.model = specopt::MaterialModel::two_phase(1.0, 0.3, 1.0, 2e-4, 1e-4);
  p.model.solids.push_back(specopt::isotropic_material(1.0, 0.3, 1.0));
  p.vector_mean = Eigen::Vector3d(0.35, 0.35, 0.3);
  p.finalize();
  return p;
}

void bm_project_scalar(benchmark::State& state) {
  const int nx = static_cast<int>(state.range(0));
  const auto prob = make_scalar(nx, nx / 2);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.6, 1.6);
  Eigen::VectorXd u(prob.mesh.num_nodes());
  for (int n = 0; n < u.size(); ++n) u[n] = dist(rng);
  const auto phi = specopt::PhaseField::scalar(u);
  for (auto _ : state) {
    auto res = specopt::project_admissible(prob, phi);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(bm_project_scalar)->Arg(64)->Arg(160);

void bm_project_vector(benchmark::State& state) {
  const int nx = static_cast<int>(state.range(0));
  const auto prob = make_three_phase(nx, nx);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-0.5, 1.5);
  Eigen::MatrixXd v(prob.mesh.num_nodes(), 3);
  for (int n = 0; n < v.rows(); ++n)
    for (int c = 0; c < 3; ++c) v(n, c) = dist(rng);
  const auto phi = specopt::PhaseField::vector(v);
  for (auto _ : state) {
    auto res = specopt::project_admissible(prob, phi);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(bm_project_vector)->Arg(48)->Arg(96);

void bm_project_simplex_point(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 2.0);
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 1024; ++i) {
    Eigen::VectorXd y(4);
    for (int c = 0; c < 4; ++c) y[c] = dist(rng);
    pts.push_back(y);
  }
  std::size_t i = 0;
  for (auto _ : state) {
    auto p = specopt::project_simplex(pts[i++ & 1023]);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(bm_project_simplex_point);

}  // namespace
