#include "specopt/mesh.hpp"

#include <stdexcept>
#include <string>

namespace specopt {

StructuredMesh build_mesh(int nx, int ny, double lx, double ly) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("build_mesh: cell counts must be positive, got " +
                                std::to_string(nx) + "x" + std::to_string(ny));
  if (!(lx > 0.0) || !(ly > 0.0))
    throw std::invalid_argument("build_mesh: domain extents must be positive");
  StructuredMesh m;
  m.nx = nx;
  m.ny = ny;
  m.lx = lx;
  m.ly = ly;
  return m;
}

std::vector<double> lumped_node_weights(const StructuredMesh& mesh) {
  std::vector<double> w(mesh.num_nodes());
  const double cell = mesh.hx() * mesh.hy();
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const int i = mesh.node_i(n), j = mesh.node_j(n);
    const double fx = (i == 0 || i == mesh.nx) ? 0.5 : 1.0;
    const double fy = (j == 0 || j == mesh.ny) ? 0.5 : 1.0;
    w[n] = cell * fx * fy;
  }
  return w;
}

int DofMap::num_free() const {
  int nf = 0;
  for (auto c : constrained)
    if (!c) ++nf;
  return nf;
}

void DofMap::constrain_edge(const StructuredMesh& mesh, Edge e) {
  switch (e) {
    case Edge::left:
      for (int j = 0; j <= mesh.ny; ++j) constrain_node(mesh.node_id(0, j));
      break;
    case Edge::right:
      for (int j = 0; j <= mesh.ny; ++j) constrain_node(mesh.node_id(mesh.nx, j));
      break;
    case Edge::bottom:
      for (int i = 0; i <= mesh.nx; ++i) constrain_node(mesh.node_id(i, 0));
      break;
    case Edge::top:
      for (int i = 0; i <= mesh.nx; ++i) constrain_node(mesh.node_id(i, mesh.ny));
      break;
  }
}

}  // namespace specopt
