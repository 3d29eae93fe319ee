#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace specopt {

// Uniform axis-aligned quadrilateral grid on (0,lx) x (0,ly).
// Nodes are numbered row-major: node(i,j) = j*(nx+1) + i with i in [0,nx],
// j in [0,ny]. Cells likewise, with corner nodes listed counter-clockwise
// starting at the lower-left corner.
struct StructuredMesh {
  int nx = 0, ny = 0;
  double lx = 0.0, ly = 0.0;

  double hx() const { return lx / nx; }
  double hy() const { return ly / ny; }
  double area() const { return lx * ly; }
  int num_nodes() const { return (nx + 1) * (ny + 1); }
  int num_cells() const { return nx * ny; }

  int node_id(int i, int j) const { return j * (nx + 1) + i; }
  int node_i(int n) const { return n % (nx + 1); }
  int node_j(int n) const { return n / (nx + 1); }
  double node_x(int n) const { return node_i(n) * hx(); }
  double node_y(int n) const { return node_j(n) * hy(); }

  int cell_id(int i, int j) const { return j * nx + i; }
  double cell_x0(int c) const { return (c % nx) * hx(); }
  double cell_y0(int c) const { return (c / nx) * hy(); }
  std::array<int, 4> cell_nodes(int c) const {
    const int i = c % nx, j = c / nx;
    const int n0 = node_id(i, j);
    return {n0, n0 + 1, n0 + nx + 2, n0 + nx + 1};
  }
};

// Validates the parameters (positive cell counts and extents).
StructuredMesh build_mesh(int nx, int ny, double lx, double ly);

enum class Edge { left, right, bottom, top };

// Nodal integration weights of the bilinear hat functions (row sums of the
// consistent mass matrix): hx*hy scaled by 1, 1/2 or 1/4 for interior, edge
// and corner nodes. Serves as the lumped L2 inner product on nodal fields.
std::vector<double> lumped_node_weights(const StructuredMesh& mesh);

// Two displacement unknowns per node, numbered (2*node, 2*node+1).
// Dirichlet constraints are tracked here; assembly eliminates them by
// zeroing constrained rows/columns and writing a fixed diagonal value.
struct DofMap {
  int n_nodes = 0;
  std::vector<std::uint8_t> constrained;

  DofMap() = default;
  explicit DofMap(const StructuredMesh& mesh)
      : n_nodes(mesh.num_nodes()), constrained(2 * mesh.num_nodes(), 0) {}

  int num_dofs() const { return 2 * n_nodes; }
  int num_free() const;
  bool is_constrained(int dof) const { return constrained[dof] != 0; }
  void constrain_node(int node) {
    constrained[2 * node] = constrained[2 * node + 1] = 1;
  }
  void constrain_edge(const StructuredMesh& mesh, Edge e);
};

}  // namespace specopt
