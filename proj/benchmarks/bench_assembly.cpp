#include <benchmark/benchmark.h>

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

void bm_sample_material(benchmark::State& state) {
  const auto prob = make_beam(static_cast<int>(state.range(0)),
                              static_cast<int>(state.range(0)) / 2);
  const auto phi = stripe_field(prob.mesh);
  for (auto _ : state) {
    auto samples = specopt::sample_material(prob.mesh, phi, prob.model);
    benchmark::DoNotOptimize(samples);
  }
}
BENCHMARK(bm_sample_material)->Arg(64)->Arg(160);

void bm_assemble_stiffness(benchmark::State& state) {
  const auto prob = make_beam(static_cast<int>(state.range(0)),
                              static_cast<int>(state.range(0)) / 2);
  const auto phi = stripe_field(prob.mesh);
  const auto samples = specopt::sample_material(prob.mesh, phi, prob.model);
  for (auto _ : state) {
    auto K = specopt::assemble_stiffness(prob.mesh, samples, prob.dofs);
    benchmark::DoNotOptimize(K);
  }
}
BENCHMARK(bm_assemble_stiffness)->Arg(64)->Arg(160);

void bm_assemble_mass(benchmark::State& state) {
  const auto prob = make_beam(static_cast<int>(state.range(0)),
                              static_cast<int>(state.range(0)) / 2);
  const auto phi = stripe_field(prob.mesh);
  const auto samples = specopt::sample_material(prob.mesh, phi, prob.model);
  for (auto _ : state) {
    auto M = specopt::assemble_mass(prob.mesh, samples, prob.dofs);
    benchmark::DoNotOptimize(M);
  }
}
BENCHMARK(bm_assemble_mass)->Arg(64)->Arg(160);

}  // namespace

BENCHMARK_MAIN();
