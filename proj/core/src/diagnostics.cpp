#include "specopt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "specopt/projection.hpp"

namespace specopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 3-point Gauss rule on [0,1]
constexpr double kG3Node[3] = {0.11270166537925831, 0.5, 0.88729833462074169};
constexpr double kG3Weight[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

// metric length of the straight segment [a,b] under sqrt(2 psi0)
double seg_metric(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  const std::function<double(const Eigen::VectorXd&)>& psi0,
                  int subdiv = 1) {
  const double len = (b - a).norm();
  if (len == 0.0) return 0.0;
  double s = 0.0;
  for (int part = 0; part < subdiv; ++part) {
    const double t0 = static_cast<double>(part) / subdiv;
    const double t1 = static_cast<double>(part + 1) / subdiv;
    for (int q = 0; q < 3; ++q) {
      const double t = t0 + (t1 - t0) * kG3Node[q];
      const Eigen::VectorXd p = (1.0 - t) * a + t * b;
      s += kG3Weight[q] * (t1 - t0) * std::sqrt(std::max(2.0 * psi0(p), 0.0));
    }
  }
  return s * len;
}

double path_metric_length(const std::vector<Eigen::VectorXd>& path,
                          const std::function<double(const Eigen::VectorXd&)>& psi0,
                          int subdiv = 1) {
  double s = 0.0;
  for (size_t k = 0; k + 1 < path.size(); ++k)
    s += seg_metric(path[k], path[k + 1], psi0, subdiv);
  return s;
}

// resample a polyline in R^n to npts+1 points uniform in Euclidean arclength
std::vector<Eigen::VectorXd> resample_path(const std::vector<Eigen::VectorXd>& path,
                                           int npts) {
  std::vector<double> cum(path.size(), 0.0);
  for (size_t k = 1; k < path.size(); ++k)
    cum[k] = cum[k - 1] + (path[k] - path[k - 1]).norm();
  const double total = cum.back();
  std::vector<Eigen::VectorXd> out;
  out.reserve(npts + 1);
  size_t seg = 0;
  for (int k = 0; k <= npts; ++k) {
    const double s = total * k / npts;
    while (seg + 2 < path.size() && cum[seg + 1] < s) ++seg;
    const double ds = cum[seg + 1] - cum[seg];
    const double t = ds > 0.0 ? (s - cum[seg]) / ds : 0.0;
    out.push_back((1.0 - t) * path[seg] + t * path[seg + 1]);
  }
  out.front() = path.front();
  out.back() = path.back();
  return out;
}

}  // namespace

TransitionConstant transition_constant_scalar(
    const std::function<double(double)>& psi0) {
  TransitionConstant tc;
  tc.i = 0;
  tc.j = 1;
  // sigma = int_{-1}^{1} sqrt(2 psi0(u)) du; with u = sin(theta) the
  // integrand sqrt(2 psi0(sin theta)) cos(theta) is smooth at the endpoints
  const int n = 4096;  // composite Simpson intervals (even)
  const double a = -0.5 * kPi, b = 0.5 * kPi;
  const double h = (b - a) / n;
  auto f = [&](double th) {
    return std::sqrt(std::max(2.0 * psi0(std::sin(th)), 0.0)) * std::cos(th);
  };
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  tc.sigma = s * h / 3.0;

  // independent estimate straight in u (midpoint rule; the sqrt endpoint
  // singularity is integrable). At the optimal profile the equipartition
  // identity turns int |profile'|^2 dz into the same path integral.
  const int m = 20000;
  double e = 0.0;
  for (int k = 0; k < m; ++k) {
    const double u = -1.0 + 2.0 * (k + 0.5) / m;
    e += std::sqrt(std::max(2.0 * psi0(u), 0.0)) * (2.0 / m);
  }
  tc.profile_energy = e;

  // transition profile sampled as the path column
  const int np = 200;
  tc.path.resize(np + 1, 1);
  for (int k = 0; k <= np; ++k)
    tc.path(k, 0) = std::sin(-0.5 * kPi + kPi * k / np);
  return tc;
}

TransitionConstant transition_constant(const Potential& psi0, int n_phases,
                                       int i, int j, int lattice,
                                       int path_points) {
  if (n_phases < 2) throw std::invalid_argument("transition_constant: need >= 2 phases");
  if (i == j || i < 0 || j < 0 || i >= n_phases || j >= n_phases)
    throw std::invalid_argument("transition_constant: invalid phase pair");
  const int N = n_phases;
  const int M = std::max(lattice, 4);

  // barycentric lattice points: integer compositions of M into N parts
  std::vector<std::vector<int>> points;
  std::map<std::vector<int>, int> index;
  {
    std::vector<int> cur(N, 0);
    std::function<void(int, int)> rec = [&](int comp, int left) {
      if (comp == N - 1) {
        cur[comp] = left;
        index.emplace(cur, static_cast<int>(points.size()));
        points.push_back(cur);
        return;
      }
      for (int v = 0; v <= left; ++v) {
        cur[comp] = v;
        rec(comp + 1, left - v);
      }
    };
    rec(0, M);
  }
  auto to_simplex = [&](const std::vector<int>& k) {
    Eigen::VectorXd p(N);
    for (int c = 0; c < N; ++c) p[c] = static_cast<double>(k[c]) / M;
    return p;
  };

  // zero-sum integer moves up to two lattice steps per component
  std::vector<std::vector<int>> moves;
  {
    std::vector<int> mv(N, 0);
    std::function<void(int, int)> rec = [&](int comp, int sum) {
      if (comp == N) {
        if (sum == 0) {
          bool allz = true;
          for (int v : mv) allz = allz && v == 0;
          if (!allz) moves.push_back(mv);
        }
        return;
      }
      for (int v = -2; v <= 2; ++v) {
        mv[comp] = v;
        rec(comp + 1, sum + v);
      }
    };
    rec(0, 0);
  }

  // Dijkstra from e_i to e_j with edge weights from the degenerate metric
  std::vector<int> vi(N, 0), vj(N, 0);
  vi[i] = M;
  vj[j] = M;
  const int src = index.at(vi), dst = index.at(vj);
  const int np = static_cast<int>(points.size());
  std::vector<double> dist(np, std::numeric_limits<double>::infinity());
  std::vector<int> prev(np, -1);
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> queue;
  dist[src] = 0.0;
  queue.emplace(0.0, src);
  std::vector<int> nb(N);
  while (!queue.empty()) {
    auto [d, p] = queue.top();
    queue.pop();
    if (d > dist[p]) continue;
    if (p == dst) break;
    const Eigen::VectorXd pp = to_simplex(points[p]);
    for (const auto& mv : moves) {
      bool ok = true;
      for (int c = 0; c < N; ++c) {
        nb[c] = points[p][c] + mv[c];
        ok = ok && nb[c] >= 0;
      }
      if (!ok) continue;
      auto it = index.find(nb);
      if (it == index.end()) continue;
      const int q = it->second;
      const double w = seg_metric(pp, to_simplex(points[q]), psi0.value);
      if (dist[p] + w < dist[q]) {
        dist[q] = dist[p] + w;
        prev[q] = p;
        queue.emplace(dist[q], q);
      }
    }
  }
  if (prev[dst] < 0 && dst != src)
    throw std::runtime_error("transition_constant: lattice path search failed");

  std::vector<Eigen::VectorXd> path;
  for (int p = dst; p >= 0; p = prev[p]) {
    path.push_back(to_simplex(points[p]));
    if (p == src) break;
  }
  std::reverse(path.begin(), path.end());
  path = resample_path(path, std::max(path_points, 16));
  const int K = static_cast<int>(path.size()) - 1;

  // elastic smoothing: coordinate sweeps moving interior points off-lattice,
  // tangentially projected FD descent with backtracking per point
  auto local_len = [&](int k, const Eigen::VectorXd& p) {
    return seg_metric(path[k - 1], p, psi0.value) +
           seg_metric(p, path[k + 1], psi0.value);
  };
  double len = path_metric_length(path, psi0.value);
  double last_gain = std::numeric_limits<double>::infinity();
  int settled = 0;
  const int max_sweeps = 2000;
  int sweep = 0;
  for (; sweep < max_sweeps && settled < 5; ++sweep) {
    for (int k = 1; k < K; ++k) {
      const double f0 = local_len(k, path[k]);
      Eigen::VectorXd g(N);
      const double fdh = 1e-6;
      for (int c = 0; c < N; ++c) {
        Eigen::VectorXd pp = path[k], pm = path[k];
        pp[c] += fdh;
        pm[c] -= fdh;
        g[c] = (local_len(k, pp) - local_len(k, pm)) / (2.0 * fdh);
      }
      g.array() -= g.mean();  // keep the move tangent to the simplex
      const double gn = g.norm();
      if (gn < 1e-14) continue;
      const double spacing = 0.5 * ((path[k] - path[k - 1]).norm() +
                                    (path[k + 1] - path[k]).norm());
      double step = 0.5 * spacing;
      for (int trial = 0; trial < 8; ++trial, step *= 0.5) {
        const Eigen::VectorXd cand = project_simplex(path[k] - (step / gn) * g);
        if (local_len(k, cand) < f0 - 1e-15) {
          path[k] = cand;
          break;
        }
      }
    }
    if (sweep < 400 && sweep % 40 == 39) path = resample_path(path, K);
    const double nlen = path_metric_length(path, psi0.value);
    last_gain = len - nlen;
    len = nlen;
    settled = last_gain <= 1e-11 * std::max(1.0, len) ? settled + 1 : 0;
  }
  if (settled < 5 && last_gain > 1e-7 * std::max(1.0, len))
    throw std::runtime_error("transition_constant: path refinement did not converge");

  TransitionConstant tc;
  tc.i = i;
  tc.j = j;
  tc.sigma = path_metric_length(path, psi0.value, 4);
  // midpoint-rule estimate of the same degenerate length; at the optimal
  // profile this equals the profile gradient energy by equipartition
  double e = 0.0;
  for (size_t k = 0; k + 1 < path.size(); ++k) {
    const Eigen::VectorXd d = path[k + 1] - path[k];
    const int sub = 8;
    for (int q = 0; q < sub; ++q) {
      const Eigen::VectorXd p = path[k] + ((q + 0.5) / sub) * d;
      e += std::sqrt(std::max(2.0 * psi0.value(p), 0.0)) * d.norm() / sub;
    }
  }
  tc.profile_energy = e;
  tc.path.resize(path.size(), N);
  for (size_t k = 0; k < path.size(); ++k) tc.path.row(k) = path[k].transpose();
  tc.path.row(0) = Eigen::VectorXd::Unit(N, i).transpose();
  tc.path.row(tc.path.rows() - 1) = Eigen::VectorXd::Unit(N, j).transpose();
  return tc;
}

double InterfacePolyline::length() const {
  double s = 0.0;
  for (int k = 0; k + 1 < pts.rows(); ++k) s += (pts.row(k + 1) - pts.row(k)).norm();
  if (closed && pts.rows() > 2) s += (pts.row(0) - pts.row(pts.rows() - 1)).norm();
  return s;
}

double total_perimeter(const std::vector<InterfacePolyline>& chains) {
  double s = 0.0;
  for (const auto& c : chains) s += c.length();
  return s;
}

namespace {

struct MsSegment {
  long from_edge = -1, to_edge = -1;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

}  // namespace

std::vector<InterfacePolyline> extract_interfaces(const StructuredMesh& mesh,
                                                  const Eigen::VectorXd& u,
                                                  double level) {
  if (u.size() != mesh.num_nodes())
    throw std::invalid_argument("extract_interfaces: field size mismatch");
  const int nx = mesh.nx, ny = mesh.ny;
  const double hx = mesh.hx(), hy = mesh.hy();
  const long n_horiz = static_cast<long>(nx) * (ny + 1);
  auto he = [&](int i, int j) { return static_cast<long>(j) * nx + i; };
  auto ve = [&](int i, int j) {
    return n_horiz + static_cast<long>(j) * (nx + 1) + i;
  };
  Eigen::VectorXd f = u.array() - level;
  auto pos = [&](int n) { return f[n] >= 0.0; };

  struct Crossing {
    long edge;
    double x, y;
    bool exit;
  };

  std::vector<MsSegment> segs;
  std::vector<Crossing> cl;
  for (int cj = 0; cj < ny; ++cj) {
    for (int ci = 0; ci < nx; ++ci) {
      const int n0 = mesh.node_id(ci, cj), n1 = n0 + 1;
      const int n3 = n0 + nx + 1, n2 = n3 + 1;
      cl.clear();
      // canonical crossing points: horizontal from the left node, vertical
      // from the bottom node, so both adjacent cells compute identical bits
      auto horiz = [&](int na, int nb, long id, bool walk_fwd) {
        const bool pa = pos(na), pb = pos(nb);
        if (pa == pb) return;
        const double t = f[na] / (f[na] - f[nb]);
        const double x = mesh.node_x(na) + t * hx, y = mesh.node_y(na);
        const bool exit = walk_fwd ? pa : pb;
        cl.push_back({id, x, y, exit});
      };
      auto vert = [&](int na, int nb, long id, bool walk_fwd) {
        const bool pa = pos(na), pb = pos(nb);
        if (pa == pb) return;
        const double t = f[na] / (f[na] - f[nb]);
        const double x = mesh.node_x(na), y = mesh.node_y(na) + t * hy;
        const bool exit = walk_fwd ? pa : pb;
        cl.push_back({id, x, y, exit});
      };
      // counter-clockwise cell walk: bottom, right, top (reversed canonical),
      // left (reversed canonical)
      horiz(n0, n1, he(ci, cj), true);
      vert(n1, n2, ve(ci + 1, cj), true);
      horiz(n3, n2, he(ci, cj + 1), false);
      vert(n0, n3, ve(ci, cj), false);

      if (cl.empty()) continue;
      auto emit = [&](const Crossing& a, const Crossing& b) {
        segs.push_back({a.edge, b.edge, a.x, a.y, b.x, b.y});
      };
      if (cl.size() == 2) {
        if (cl[0].exit)
          emit(cl[0], cl[1]);
        else
          emit(cl[1], cl[0]);
      } else if (cl.size() == 4) {
        // saddle cell: the corner average decides how the positive region
        // connects through the center
        const double center = 0.25 * (f[n0] + f[n1] + f[n2] + f[n3]);
        for (int p = 0; p < 4; ++p) {
          if (!cl[p].exit) continue;
          const int q = center >= 0.0 ? (p + 1) % 4 : (p + 3) % 4;
          emit(cl[p], cl[q]);
        }
      }
    }
  }

  std::unordered_map<long, int> by_start;
  std::unordered_set<long> used_as_end;
  for (size_t s = 0; s < segs.size(); ++s) {
    by_start.emplace(segs[s].from_edge, static_cast<int>(s));
    used_as_end.insert(segs[s].to_edge);
  }

  std::vector<InterfacePolyline> chains;
  std::vector<char> visited(segs.size(), 0);
  auto follow = [&](int start, bool closed) {
    std::vector<double> xs, ys;
    int cur = start;
    xs.push_back(segs[cur].x0);
    ys.push_back(segs[cur].y0);
    while (true) {
      visited[cur] = 1;
      auto it = by_start.find(segs[cur].to_edge);
      const bool wraps = closed && it != by_start.end() && it->second == start;
      if (!wraps) {
        xs.push_back(segs[cur].x1);
        ys.push_back(segs[cur].y1);
      }
      if (it == by_start.end() || visited[it->second]) break;
      cur = it->second;
    }
    InterfacePolyline ch;
    ch.closed = closed;
    ch.pts.resize(xs.size(), 2);
    for (size_t k = 0; k < xs.size(); ++k) {
      ch.pts(k, 0) = xs[k];
      ch.pts(k, 1) = ys[k];
    }
    chains.push_back(std::move(ch));
  };
  for (size_t s = 0; s < segs.size(); ++s)
    if (!visited[s] && !used_as_end.count(segs[s].from_edge))
      follow(static_cast<int>(s), false);
  for (size_t s = 0; s < segs.size(); ++s)
    if (!visited[s]) follow(static_cast<int>(s), true);
  return chains;
}

InterfacePolyline refine_with_geometry(const InterfacePolyline& chain,
                                       double spacing) {
  // drop consecutive duplicates, collect cumulative arclength
  std::vector<Eigen::Vector2d> raw;
  for (int k = 0; k < chain.pts.rows(); ++k) {
    Eigen::Vector2d p = chain.pts.row(k).transpose();
    if (raw.empty() || (p - raw.back()).norm() > 1e-14) raw.push_back(p);
  }
  if (chain.closed && raw.size() > 2 && (raw.front() - raw.back()).norm() <= 1e-14)
    raw.pop_back();
  InterfacePolyline out;
  out.closed = chain.closed;
  if (raw.size() < 2) {
    out.pts.resize(0, 2);
    return out;
  }
  const size_t nseg = raw.size() - (chain.closed ? 0 : 1);
  std::vector<double> cum(nseg + 1, 0.0);
  for (size_t k = 0; k < nseg; ++k)
    cum[k + 1] = cum[k] + (raw[(k + 1) % raw.size()] - raw[k]).norm();
  const double total = cum.back();
  if (total <= 0.0) {
    out.pts.resize(0, 2);
    return out;
  }

  const int K = std::max(chain.closed ? 8 : 4,
                         static_cast<int>(std::lround(total / spacing)));
  const int n = chain.closed ? K : K + 1;
  out.pts.resize(n, 2);
  size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double s = chain.closed ? total * k / K : total * k / (n - 1);
    while (seg + 1 < nseg && cum[seg + 1] < s) ++seg;
    const double ds = cum[seg + 1] - cum[seg];
    const double t = ds > 0.0 ? (s - cum[seg]) / ds : 0.0;
    const Eigen::Vector2d p =
        (1.0 - t) * raw[seg] + t * raw[(seg + 1) % raw.size()];
    out.pts.row(k) = p.transpose();
  }
  if (!chain.closed) {
    out.pts.row(0) = raw.front().transpose();
    out.pts.row(n - 1) = raw.back().transpose();
  }

  auto at = [&](int k) -> Eigen::Vector2d {
    if (out.closed) return out.pts.row(((k % n) + n) % n).transpose();
    return out.pts.row(std::clamp(k, 0, n - 1)).transpose();
  };

  // tangents and the outward normal: material lies left of the traversal, so
  // the rightward rotation points from material into void
  out.normal.resize(n, 2);
  for (int k = 0; k < n; ++k) {
    Eigen::Vector2d t;
    if (out.closed)
      t = at(k + 1) - at(k - 1);
    else if (k == 0)
      t = at(1) - at(0);
    else if (k == n - 1)
      t = at(n - 1) - at(n - 2);
    else
      t = at(k + 1) - at(k - 1);
    const double tn = t.norm();
    if (tn > 0.0) t /= tn;
    out.normal(k, 0) = t.y();
    out.normal(k, 1) = -t.x();
  }

  // signed curvature from the circle through (k-2, k, k+2); positive Menger
  // turn (counter-clockwise) means the material region is convex, which is
  // kappa = -div n < 0 in the sign convention used here
  Eigen::VectorXd kraw = Eigen::VectorXd::Zero(n);
  auto menger = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                    const Eigen::Vector2d& c) {
    const Eigen::Vector2d ab = b - a, bc = c - b, ac = c - a;
    const double denom = ab.norm() * bc.norm() * ac.norm();
    if (denom < 1e-30) return 0.0;
    return 2.0 * (ab.x() * bc.y() - ab.y() * bc.x()) / denom;
  };
  if (out.closed || n >= 5) {
    for (int k = 0; k < n; ++k) {
      int m = k;
      if (!out.closed) m = std::clamp(k, 2, n - 3);
      kraw[k] = -menger(at(m - 2), at(m), at(m + 2));
    }
  }
  out.kappa = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    int cnt = 0;
    for (int d = -2; d <= 2; ++d) {
      const int m = k + d;
      if (!out.closed && (m < 0 || m >= n)) continue;
      s += kraw[((m % n) + n) % n];
      ++cnt;
    }
    out.kappa[k] = cnt > 0 ? s / cnt : 0.0;
  }
  return out;
}

namespace {

// gradient and potential parts of the interface energy, matching the
// objective's quadrature exactly
void gl_parts(const Problem& prob, const PhaseField& phi, double& gradpart,
              double& potpart) {
  const double eps = prob.model.epsilon;
  gradpart = 0.0;
  for (int c = 0; c < phi.values.cols(); ++c) {
    const Eigen::VectorXd col = phi.values.col(c);
    gradpart += 0.5 * eps * col.dot(prob.laplacian * col);
  }
  potpart = 0.0;
  if (phi.is_scalar()) {
    for (int nn = 0; nn < phi.num_nodes(); ++nn)
      potpart += prob.node_weight[nn] * Potential::scalar_value(phi.values(nn, 0));
  } else {
    const Potential pot = Potential::double_obstacle(static_cast<int>(phi.values.cols()));
    for (int nn = 0; nn < phi.num_nodes(); ++nn)
      potpart += prob.node_weight[nn] * pot.value(phi.values.row(nn).transpose());
  }
  potpart /= eps;
}

Eigen::VectorXd scalar_level_field(const Problem& prob, const PhaseField& phi,
                                   const char* who) {
  if (phi.is_scalar()) return phi.values.col(0);
  if (prob.n_phases() == 2 && phi.values.cols() == 2) return phi.scalar_view();
  throw std::invalid_argument(std::string(who) + ": two-phase fields only");
}

// bilinear evaluation data at an arbitrary point
struct PointEval {
  std::array<int, 4> nodes{};
  double N[4] = {0, 0, 0, 0};
  double dNdx[4] = {0, 0, 0, 0};
  double dNdy[4] = {0, 0, 0, 0};
};

PointEval locate(const StructuredMesh& mesh, double x, double y) {
  const double hx = mesh.hx(), hy = mesh.hy();
  const int ci = std::clamp(static_cast<int>(std::floor(x / hx)), 0, mesh.nx - 1);
  const int cj = std::clamp(static_cast<int>(std::floor(y / hy)), 0, mesh.ny - 1);
  const int c = mesh.cell_id(ci, cj);
  PointEval pe;
  pe.nodes = mesh.cell_nodes(c);
  const double xi = 2.0 * (x - mesh.cell_x0(c)) / hx - 1.0;
  const double eta = 2.0 * (y - mesh.cell_y0(c)) / hy - 1.0;
  const double xm = 1.0 - xi, xp = 1.0 + xi, ym = 1.0 - eta, yp = 1.0 + eta;
  pe.N[0] = 0.25 * xm * ym;
  pe.N[1] = 0.25 * xp * ym;
  pe.N[2] = 0.25 * xp * yp;
  pe.N[3] = 0.25 * xm * yp;
  const double dx = 2.0 / hx, dy = 2.0 / hy;
  pe.dNdx[0] = -0.25 * ym * dx;
  pe.dNdx[1] = 0.25 * ym * dx;
  pe.dNdx[2] = 0.25 * yp * dx;
  pe.dNdx[3] = -0.25 * yp * dx;
  pe.dNdy[0] = -0.25 * xm * dy;
  pe.dNdy[1] = -0.25 * xp * dy;
  pe.dNdy[2] = 0.25 * xp * dy;
  pe.dNdy[3] = 0.25 * xm * dy;
  return pe;
}

double eval_nodal(const PointEval& pe, const Eigen::VectorXd& nodal) {
  double v = 0.0;
  for (int a = 0; a < 4; ++a) v += pe.N[a] * nodal[pe.nodes[a]];
  return v;
}

GmvReport gmv_core(const Problem& prob,
                   const std::vector<InterfacePolyline>& chains,
                   const Spectrum& spectrum, const ObjectiveSpec& spec,
                   double sigma, const Eigen::VectorXd* material_check) {
  const StructuredMesh& mesh = prob.mesh;
  const double eps = prob.model.epsilon;
  const double h = std::max(mesh.hx(), mesh.hy());
  const double off = 0.5 * kPi * eps + 2.0 * h;  // past the diffuse layer
  const double margin = 0.5 * h;

  if (prob.model.solids.empty())
    throw std::invalid_argument("gmv_residual: no material phase");
  const PhaseMaterial& mat = prob.model.solids.front();
  const double mu2 = 2.0 * mat.mu, lame = mat.lame, rho_m = mat.rho;

  struct Mode {
    double lambda;
    const Eigen::VectorXd* w;
    double c;
  };
  std::vector<Mode> modes;
  for (size_t r = 0; r < spec.eigen_indices.size(); ++r) {
    const int idx = spec.eigen_indices[r];
    if (idx < 1 || idx > static_cast<int>(spectrum.pairs.size()))
      throw std::invalid_argument("gmv_residual: missing eigenpair for a selected index");
    // c_r = weights[r] is the partial derivative of the eigenvalue aggregate
    modes.push_back({spectrum.pairs[idx - 1].lambda, &spectrum.pairs[idx - 1].w,
                     spec.weights[r]});
  }
  const SpatialDensity* sp = prob.spatial_density();

  GmvReport rep;
  for (const auto& ch : chains) {
    if (ch.kappa.size() != ch.pts.rows() || ch.normal.rows() != ch.pts.rows())
      throw std::invalid_argument("gmv_residual: chain lacks geometry data");
    for (int k = 0; k < ch.pts.rows(); ++k) {
      const double qx = ch.pts(k, 0) - off * ch.normal(k, 0);
      const double qy = ch.pts(k, 1) - off * ch.normal(k, 1);
      if (qx < margin || qx > mesh.lx - margin || qy < margin ||
          qy > mesh.ly - margin)
        continue;
      const PointEval pe = locate(mesh, qx, qy);
      if (material_check && eval_nodal(pe, *material_check) < 0.8) continue;

      GmvSample s;
      s.x = qx;
      s.y = qy;
      s.kappa = ch.kappa[k];
      s.curv_term = spec.gamma * sigma * s.kappa;
      const double rsp = sp ? (*sp)(qx, qy) : 1.0;
      for (const Mode& m : modes) {
        double wx = 0, wy = 0, e11 = 0, e22 = 0, e12 = 0;
        for (int a = 0; a < 4; ++a) {
          const double ax = (*m.w)[2 * pe.nodes[a]];
          const double ay = (*m.w)[2 * pe.nodes[a] + 1];
          wx += pe.N[a] * ax;
          wy += pe.N[a] * ay;
          e11 += pe.dNdx[a] * ax;
          e22 += pe.dNdy[a] * ay;
          e12 += 0.5 * (pe.dNdy[a] * ax + pe.dNdx[a] * ay);
        }
        s.mass_term += m.c * m.lambda * rho_m * rsp * (wx * wx + wy * wy);
        s.stiff_term -= m.c * (mu2 * (e11 * e11 + e22 * e22 + 2.0 * e12 * e12) +
                               lame * (e11 + e22) * (e11 + e22));
      }
      rep.samples.push_back(s);
    }
  }
  if (rep.samples.empty()) return rep;

  // least-squares constant absorbing the mean-constraint multiplier
  double mean = 0.0;
  for (const auto& s : rep.samples)
    mean += s.curv_term + s.mass_term + s.stiff_term;
  mean /= static_cast<double>(rep.samples.size());
  const double gtheta = -mean;
  rep.theta_fit = spec.gamma != 0.0 ? gtheta / spec.gamma : 0.0;

  double ss = 0.0, terms = 0.0;
  for (const auto& s : rep.samples) {
    const double r = s.curv_term + s.mass_term + s.stiff_term + gtheta;
    ss += r * r;
    terms += s.curv_term * s.curv_term + s.mass_term * s.mass_term +
             s.stiff_term * s.stiff_term + gtheta * gtheta;
  }
  rep.rms = std::sqrt(ss / rep.samples.size());
  const double denom = std::sqrt(terms / rep.samples.size());
  rep.normalized_rms = denom > 0.0 ? rep.rms / denom : 0.0;
  return rep;
}

}  // namespace

namespace {

// roundoff floor of the assembled interface energy: a pure phase evaluates to
// a sum of ~num_nodes cancelling O(1) contributions scaled by 1/eps
double trivial_energy_floor(const Problem& prob) {
  return 1e-12 * (1.0 + prob.mesh.area() / prob.model.epsilon);
}

}  // namespace

double gamma_limit_check(const Problem& prob, const PhaseField& phi,
                         double sigma) {
  const Eigen::VectorXd u = scalar_level_field(prob, phi, "gamma_limit_check");
  double gradpart = 0.0, potpart = 0.0;
  gl_parts(prob, phi, gradpart, potpart);
  const double energy = gradpart + potpart;
  if (energy <= trivial_energy_floor(prob)) return 0.0;
  const auto chains = extract_interfaces(prob.mesh, u, 0.0);
  if (chains.empty())
    throw std::runtime_error("gamma_limit_check: no zero level set found");
  const double perimeter = total_perimeter(chains);
  return std::abs(energy - sigma * perimeter) / energy;
}

double equipartition_residual(const Problem& prob, const PhaseField& phi) {
  double gradpart = 0.0, potpart = 0.0;
  gl_parts(prob, phi, gradpart, potpart);
  const double energy = gradpart + potpart;
  if (energy <= trivial_energy_floor(prob)) return 0.0;
  // int eps|grad|^2 = 2*gradpart and (2/eps) int psi0 = 2*potpart
  return 2.0 * std::abs(gradpart - potpart) / energy;
}

GmvReport gmv_residual(const Problem& prob, const PhaseField& phi,
                       const Spectrum& spectrum, const ObjectiveSpec& spec,
                       double sigma) {
  const Eigen::VectorXd u = scalar_level_field(prob, phi, "gmv_residual");
  const double h = std::max(prob.mesh.hx(), prob.mesh.hy());
  std::vector<InterfacePolyline> refined;
  for (const auto& ch : extract_interfaces(prob.mesh, u, 0.0)) {
    InterfacePolyline r = refine_with_geometry(ch, 1.5 * h);
    if (r.pts.rows() > 0) refined.push_back(std::move(r));
  }
  return gmv_core(prob, refined, spectrum, spec, sigma, &u);
}

GmvReport gmv_residual(const Problem& prob,
                       const std::vector<InterfacePolyline>& chains,
                       const Spectrum& spectrum, const ObjectiveSpec& spec,
                       double sigma) {
  return gmv_core(prob, chains, spectrum, spec, sigma, nullptr);
}

std::vector<JunctionAngles> triple_junction_angles(const Problem& prob,
                                                   const PhaseField& phi) {
  if (phi.is_scalar() || phi.values.cols() == 2) return {};
  if (phi.values.cols() != 3)
    throw std::invalid_argument("triple_junction_angles: three-phase fields only");
  const StructuredMesh& mesh = prob.mesh;
  const int nx = mesh.nx, ny = mesh.ny;

  // majority phase per node
  std::vector<int> major(mesh.num_nodes());
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    int arg = 0;
    phi.values.row(n).maxCoeff(&arg);
    major[n] = arg;
  }
  // junction cells: all three phases among the corners
  std::vector<char> junction(mesh.num_cells(), 0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto nn = mesh.cell_nodes(c);
    int mask = 0;
    for (int a = 0; a < 4; ++a) mask |= 1 << major[nn[a]];
    junction[c] = mask == 7;
  }

  // cluster adjacent junction cells into single junction points
  std::vector<char> seen(mesh.num_cells(), 0);
  std::vector<Eigen::Vector2d> centers;
  for (int c0 = 0; c0 < mesh.num_cells(); ++c0) {
    if (!junction[c0] || seen[c0]) continue;
    std::vector<int> stack{c0};
    seen[c0] = 1;
    double sx = 0, sy = 0;
    int cnt = 0;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      sx += mesh.cell_x0(c) + 0.5 * mesh.hx();
      sy += mesh.cell_y0(c) + 0.5 * mesh.hy();
      ++cnt;
      const int ci = c % nx, cj = c / nx;
      const int nb[4][2] = {{ci - 1, cj}, {ci + 1, cj}, {ci, cj - 1}, {ci, cj + 1}};
      for (const auto& b : nb) {
        if (b[0] < 0 || b[0] >= nx || b[1] < 0 || b[1] >= ny) continue;
        const int cc = mesh.cell_id(b[0], b[1]);
        if (junction[cc] && !seen[cc]) {
          seen[cc] = 1;
          stack.push_back(cc);
        }
      }
    }
    centers.emplace_back(sx / cnt, sy / cnt);
  }

  const double h = std::max(mesh.hx(), mesh.hy());
  const double base_radius = std::max(5.0 * h, 2.0 * prob.model.epsilon);
  const double radius_step = std::max(h, 0.25 * prob.model.epsilon);
  const int nrad = 9;
  const int nang = 1440;
  std::vector<JunctionAngles> out;
  std::vector<double> ang(nang);
  std::vector<Eigen::Vector3d> val(nang);
  std::vector<char> ok(nang);
  const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (const auto& ctr : centers) {
    // each arm is a straight interface through the junction; a single circle
    // locates its crossing only to the grid staircase (~h/r in angle), so the
    // crossings are collected over several radii and vector-averaged
    std::array<Eigen::Vector2d, 3> arm_dir;
    std::array<Eigen::Vector2d, 3> arm_centroid;
    std::array<Eigen::Matrix2d, 3> arm_moment;
    std::array<int, 3> arm_cnt;
    auto collect_arms = [&](const Eigen::Vector2d& c) {
      arm_centroid.fill(Eigen::Vector2d::Zero());
      arm_moment.fill(Eigen::Matrix2d::Zero());
      arm_cnt.fill(0);
      for (int m = 0; m < nrad; ++m) {
        const double radius = base_radius + m * radius_step;
        // sample the three phase fractions on the circle around the junction
        std::fill(ok.begin(), ok.end(), 0);
        for (int a = 0; a < nang; ++a) {
          ang[a] = 2.0 * kPi * a / nang;
          const double x = c.x() + radius * std::cos(ang[a]);
          const double y = c.y() + radius * std::sin(ang[a]);
          if (x < 0.0 || x > mesh.lx || y < 0.0 || y > mesh.ly) continue;
          const PointEval pe = locate(mesh, x, y);
          for (int cc = 0; cc < 3; ++cc) {
            double v = 0.0;
            for (int q = 0; q < 4; ++q) v += pe.N[q] * phi.values(pe.nodes[q], cc);
            val[a][cc] = v;
          }
          ok[a] = 1;
        }
        // one arm direction per phase pair: sign change of phi^i - phi^j on
        // the arc where the third phase is not dominant
        for (int p = 0; p < 3; ++p) {
          const int i = pairs[p][0], j = pairs[p][1], k = 3 - i - j;
          double best = std::numeric_limits<double>::infinity();
          double theta = 0.0;
          bool found = false;
          for (int a = 0; a < nang; ++a) {
            const int b = (a + 1) % nang;
            if (!ok[a] || !ok[b]) continue;
            const double sa = val[a][i] - val[a][j], sb = val[b][i] - val[b][j];
            if ((sa >= 0.0) == (sb >= 0.0)) continue;
            const double third = 0.5 * (val[a][k] + val[b][k]);
            const double pairmax = 0.5 * (std::max(val[a][i], val[a][j]) +
                                          std::max(val[b][i], val[b][j]));
            if (third > pairmax) continue;
            if (third < best) {
              best = third;
              const double t = sa / (sa - sb);
              theta = ang[a] + t * (2.0 * kPi / nang);
              found = true;
            }
          }
          if (found) {
            const Eigen::Vector2d pt =
                c + radius * Eigen::Vector2d(std::cos(theta), std::sin(theta));
            arm_centroid[p] += pt;
            arm_moment[p] += pt * pt.transpose();
            ++arm_cnt[p];
          }
        }
      }
      for (int p = 0; p < 3; ++p)
        if (arm_cnt[p] < (nrad + 1) / 2) return false;
      // arm angle from the principal direction of its crossing points: the
      // staircase of a painted boundary offsets the points sideways by up to
      // h/2, which tilts a center-based angle by ~h/(2 r) but leaves the
      // fitted line direction unbiased
      for (int p = 0; p < 3; ++p) {
        arm_centroid[p] /= arm_cnt[p];
        const Eigen::Matrix2d cov =
            arm_moment[p] / arm_cnt[p] - arm_centroid[p] * arm_centroid[p].transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
        Eigen::Vector2d v = es.eigenvectors().col(1);  // largest variance
        if (v.dot(arm_centroid[p] - c) < 0.0) v = -v;
        arm_dir[p] = v;
      }
      return true;
    };

    // the cell-cluster centroid is only an O(h) guess for the vertex, which
    // biases every crossing angle by ~offset/radius; refit the center as the
    // least-squares intersection of the three arm lines and measure again
    Eigen::Vector2d center = ctr;
    std::array<double, 3> arm{};
    bool valid = true;
    for (int pass = 0; pass < 2 && valid; ++pass) {
      valid = collect_arms(center);
      if (!valid) break;
      for (int p = 0; p < 3; ++p) {
        arm[p] = std::atan2(arm_dir[p].y(), arm_dir[p].x());
        if (arm[p] < 0.0) arm[p] += 2.0 * kPi;
      }
      if (pass == 0) {
        Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
        Eigen::Vector2d b = Eigen::Vector2d::Zero();
        for (int p = 0; p < 3; ++p) {
          const Eigen::Matrix2d P =
              Eigen::Matrix2d::Identity() - arm_dir[p] * arm_dir[p].transpose();
          A += P;
          b += P * arm_centroid[p];
        }
        if (std::abs(A.determinant()) > 1e-12) {
          Eigen::Vector2d z = A.ldlt().solve(b);
          // keep the refinement local to the detected cluster
          if ((z - ctr).norm() <= 3.0 * h) center = z;
        }
      }
    }
    if (!valid) continue;
    std::sort(arm.begin(), arm.end());
    JunctionAngles ja;
    ja.x = center.x();
    ja.y = center.y();
    ja.angles = {(arm[1] - arm[0]) * 180.0 / kPi, (arm[2] - arm[1]) * 180.0 / kPi,
                 (arm[0] + 2.0 * kPi - arm[2]) * 180.0 / kPi};
    std::sort(ja.angles.begin(), ja.angles.end());
    out.push_back(ja);
  }
  return out;
}

Eigen::MatrixXd MultiplierEstimate::lambda_matrix(int ncomp) const {
  Eigen::MatrixXd m(lambda_hat.size(), ncomp);
  for (int c = 0; c < ncomp; ++c) m.col(c) = lambda_hat;
  return m;
}

MultiplierEstimate recover_multipliers(const Problem& prob, const PhaseField& phi,
                                       const GradientField& grad) {
  const int nn = phi.num_nodes();
  const int nc = static_cast<int>(phi.values.cols());
  if (grad.dual.rows() != nn || grad.dual.cols() != nc)
    throw std::invalid_argument("recover_multipliers: gradient shape mismatch");

  MultiplierEstimate est;
  est.lambda_hat = Eigen::VectorXd::Zero(nn);
  est.mu_hat = Eigen::MatrixXd::Zero(nn, nc);

  // Riesz representative under the lumped weights
  Eigen::MatrixXd r(nn, nc);
  for (int n = 0; n < nn; ++n) r.row(n) = grad.dual.row(n) / prob.node_weight[n];

  // componentwise-equal part absorbs the pointwise sum constraint
  Eigen::MatrixXd rt = r;
  if (nc > 1) {
    for (int n = 0; n < nn; ++n) {
      const double lam = r.row(n).mean();
      est.lambda_hat[n] = lam;
      rt.row(n).array() -= lam;
    }
  }

  auto is_clamped = [&](int n) {
    return !prob.clamped.empty() && prob.clamped[n];
  };

  // constant multiplier of the mean constraint: area-weighted mean over the
  // free nodes
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(nc);
  double wsum = 0.0;
  for (int n = 0; n < nn; ++n) {
    if (is_clamped(n)) continue;
    mean += prob.node_weight[n] * rt.row(n);
    wsum += prob.node_weight[n];
  }
  if (wsum > 0.0) mean /= wsum;
  est.theta_hat = -mean.transpose();

  const double act_tol = 1e-12;
  double kkt2 = 0.0;
  for (int n = 0; n < nn; ++n) {
    if (is_clamped(n)) continue;
    Eigen::RowVectorXd rem = rt.row(n) - mean;
    if (nc == 1) {
      const double u = phi.values(n, 0);
      if (u <= -1.0 + act_tol) {
        const double mu = std::max(rem[0], 0.0);
        est.mu_hat(n, 0) = mu;
        rem[0] -= mu;
      } else if (u >= 1.0 - act_tol) {
        const double mu = std::max(-rem[0], 0.0);
        est.mu_hat(n, 0) = mu;
        rem[0] += mu;
      }
      est.complementarity = std::max(
          est.complementarity,
          est.mu_hat(n, 0) * std::min(1.0 - phi.values(n, 0), 1.0 + phi.values(n, 0)));
    } else {
      for (int c = 0; c < nc; ++c) {
        if (phi.values(n, c) <= act_tol) {
          const double mu = std::max(rem[c], 0.0);
          est.mu_hat(n, c) = mu;
          rem[c] -= mu;
        }
        est.complementarity =
            std::max(est.complementarity, est.mu_hat(n, c) * phi.values(n, c));
      }
    }
    kkt2 += prob.node_weight[n] * rem.squaredNorm();
  }
  est.kkt_residual = std::sqrt(kkt2);
  return est;
}

}  // namespace specopt
