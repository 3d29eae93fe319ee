#include <benchmark/benchmark.h>

#include "specopt/eigensolver.hpp"
#include "specopt/fem.hpp"
#include "specopt/problem.hpp"

namespace {

specopt::Problem make_beam(int nx, int ny) {
  specopt::Problem p;
  p.mesh = specopt::build_mesh(nx, ny, 2.0, 1.0);
  p.dofs = specopt::DofMap(p.mesh);
  p.dofs.constrain_edge(p.mesh, specopt::Edge::left);
  p.model = specopt::MaterialModel::two_phase(1.0, 0.3, 1.0, 2e-4, 1e-4);
  p.model.epsilon = 0.02;
  p.finalize();
  return p;
}

specopt::PhaseField stripe_field(const specopt::StructuredMesh& mesh) {
  Eigen::VectorXd u(mesh.num_nodes());
  for (int n = 0; n < mesh.num_nodes(); ++n)
    u[n] = std::tanh((0.5 - mesh.node_y(n)) / 0.05);
  return specopt::PhaseField::scalar(std::move(u));
}

void bm_eigensolve_cold(benchmark::State& state) {
  const int nx = static_cast<int>(state.range(0));
  const auto prob = make_beam(nx, nx / 2);
  const auto phi = stripe_field(prob.mesh);
  const auto K = specopt::assemble_stiffness(prob.mesh, phi, prob.model, prob.dofs);
  const auto M = specopt::assemble_mass(prob.mesh, phi, prob.model, prob.dofs);
  for (auto _ : state) {
    specopt::EigenWorkspace ws;
    auto spec = specopt::solve_generalized(K, M, 3, 1e-9, 42, &ws);
    benchmark::DoNotOptimize(spec);
  }
}
BENCHMARK(bm_eigensolve_cold)->Arg(48)->Arg(96);

void bm_eigensolve_warm(benchmark::State& state) {
  const int nx = static_cast<int>(state.range(0));
  const auto prob = make_beam(nx, nx / 2);
  const auto phi = stripe_field(prob.mesh);
  const auto K = specopt::assemble_stiffness(prob.mesh, phi, prob.model, prob.dofs);
  const auto M = specopt::assemble_mass(prob.mesh, phi, prob.model, prob.dofs);
  specopt::EigenWorkspace ws;
  specopt::solve_generalized(K, M, 3, 1e-9, 42, &ws);
  for (auto _ : state) {
    auto spec = specopt::solve_generalized(K, M, 3, 1e-9, 42, &ws);
    benchmark::DoNotOptimize(spec);
  }
}
BENCHMARK(bm_eigensolve_warm)->Arg(48)->Arg(96);

}  // namespace
