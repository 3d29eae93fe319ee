#include "specopt/eigensolver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

namespace specopt {

void EigenWorkspace::build_free_set(const SparseSymOperator& M) {
  const int n = M.rows();
  full2free.assign(n, -1);
  free2full.clear();
  Eigen::VectorXd diag = M.mat.diagonal();
  for (int i = 0; i < n; ++i) {
    if (diag[i] > 0.0) {
      full2free[i] = static_cast<int>(free2full.size());
      free2full.push_back(i);
    }
  }
}

namespace {

Eigen::SparseMatrix<double> reduce_matrix(const Eigen::SparseMatrix<double>& A,
                                          const std::vector<int>& full2free,
                                          int n_free) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
      const int r = full2free[it.row()], c = full2free[it.col()];
      if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
    }
  }
  Eigen::SparseMatrix<double> R(n_free, n_free);
  R.setFromTriplets(trips.begin(), trips.end());
  return R;
}

}  // namespace

void EigenWorkspace::factorize(const SparseSymOperator& K) {
  const int nf = static_cast<int>(free2full.size());
  K_ff = reduce_matrix(K.mat, full2free, nf);
  if (!pattern_ready) {
    llt.analyzePattern(K_ff);
    pattern_ready = true;
  }
  llt.factorize(K_ff);
  if (llt.info() != Eigen::Success)
    throw SolverError("stiffness factorization failed (matrix not positive definite)");
}

Eigen::VectorXd EigenWorkspace::reduce(const Eigen::VectorXd& full) const {
  Eigen::VectorXd r(free2full.size());
  for (size_t i = 0; i < free2full.size(); ++i) r[i] = full[free2full[i]];
  return r;
}

Eigen::VectorXd EigenWorkspace::expand(const Eigen::VectorXd& reduced) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(full2free.size());
  for (size_t i = 0; i < free2full.size(); ++i) f[free2full[i]] = reduced[i];
  return f;
}

Eigen::VectorXd EigenWorkspace::solve_full(const Eigen::VectorXd& rhs) const {
  return expand(llt.solve(reduce(rhs)));
}

namespace {

struct RitzPair {
  double theta;  // eigenvalue of the shift-inverted operator
  Eigen::VectorXd x;
};

}  // namespace

Spectrum solve_generalized(const SparseSymOperator& K, const SparseSymOperator& M,
                           int k, double tol, std::uint64_t seed,
                           EigenWorkspace* ws) {
  EigenWorkspace local;
  if (!ws) ws = &local;
  if (ws->free2full.empty() || ws->full2free.size() != static_cast<size_t>(M.rows()))
    ws->build_free_set(M);
  const int nf = static_cast<int>(ws->free2full.size());
  if (k < 1) throw std::invalid_argument("solve_generalized: k must be positive");
  if (k > nf)
    throw std::invalid_argument("solve_generalized: requested more modes than free dofs");
  ws->factorize(K);
  ws->M_ff = reduce_matrix(M.mat, ws->full2free, nf);
  const Eigen::SparseMatrix<double>& Mf = ws->M_ff;

  std::mt19937_64 rng(seed);
  auto random_vec = [&]() {
    Eigen::VectorXd v(nf);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int i = 0; i < nf; ++i) v[i] = dist(rng);
    return v;
  };

  // Lanczos in the M inner product for A = K^{-1} M: basis V, A V = V T + ...
  // The basis starts small (warm starts converge fast) and grows on restarts.
  const int dim_cap = std::min(nf, std::max(4 * k + 60, 80));
  int maxdim = std::min(dim_cap, std::max(2 * k + 14, 22));
  Eigen::MatrixXd V(nf, dim_cap);
  Eigen::MatrixXd MV(nf, dim_cap);  // cached M * v_j
  std::vector<double> alpha, beta;

  std::vector<Eigen::VectorXd> locked;        // converged, M-orthonormal
  std::vector<Eigen::VectorXd> locked_M;      // M * locked
  std::vector<double> locked_lambda;

  auto m_orthogonalize = [&](Eigen::VectorXd& r, int j) {
    // against locked pairs and the current basis, twice for stability
    for (int pass = 0; pass < 2; ++pass) {
      for (size_t i = 0; i < locked.size(); ++i)
        r -= (locked_M[i].dot(r)) * locked[i];
      for (int i = 0; i < j; ++i) r -= (MV.col(i).dot(r)) * V.col(i);
    }
  };

  Eigen::VectorXd start =
      (ws->warm_start.size() == nf) ? ws->warm_start : random_vec();
  Spectrum out;
  const int max_restarts = 40;

  for (int restart = 0; restart < max_restarts; ++restart) {
    alpha.clear();
    beta.clear();
    Eigen::VectorXd v = start;
    m_orthogonalize(v, 0);
    double nv = std::sqrt(std::max(v.dot(Mf * v), 0.0));
    int guard = 0;
    while (nv < 1e-12 && guard++ < 10) {
      v = random_vec();
      m_orthogonalize(v, 0);
      nv = std::sqrt(std::max(v.dot(Mf * v), 0.0));
    }
    if (nv < 1e-12)
      throw SolverError("eigensolver could not build a start vector");
    v /= nv;

    int j = 0;
    V.col(0) = v;
    MV.col(0) = Mf * v;
    bool breakdown = false;
    for (j = 0; j < maxdim; ++j) {
      Eigen::VectorXd r = ws->llt.solve(MV.col(j));
      const double a = MV.col(j).dot(r);
      alpha.push_back(a);
      r -= a * V.col(j);
      if (j > 0) r -= beta[j - 1] * V.col(j - 1);
      m_orthogonalize(r, j + 1);
      const double b = std::sqrt(std::max(r.dot(Mf * r), 0.0));
      if (j + 1 < maxdim) {
        if (b < 1e-13 * std::abs(alpha[0])) {
          breakdown = true;
          break;
        }
        beta.push_back(b);
        V.col(j + 1) = r / b;
        MV.col(j + 1) = Mf * V.col(j + 1);
      }
    }
    const int dim = static_cast<int>(alpha.size());
    out.lanczos_dim = std::max(out.lanczos_dim, dim);

    // Ritz pairs of the tridiagonal
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < dim) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    // largest theta first: smallest pencil eigenvalues
    std::vector<RitzPair> ritz;
    for (int i = dim - 1; i >= 0; --i) {
      RitzPair rp;
      rp.theta = es.eigenvalues()[i];
      rp.x = V.leftCols(dim) * es.eigenvectors().col(i);
      ritz.push_back(std::move(rp));
    }

    // lock converged pairs in spectral order; stop at the first unconverged
    // one so the locked set always holds the lowest part of the spectrum
    Eigen::VectorXd next_start;
    for (auto& rp : ritz) {
      if (static_cast<int>(locked.size()) >= k) break;
      if (rp.theta <= 0.0) continue;
      const double lam = 1.0 / rp.theta;
      Eigen::VectorXd x = rp.x;
      for (size_t i = 0; i < locked.size(); ++i)
        x -= (locked_M[i].dot(x)) * locked[i];
      const double nx = std::sqrt(std::max(x.dot(Mf * x), 0.0));
      if (nx < 1e-10) continue;
      x /= nx;
      const Eigen::VectorXd kx = ws->K_ff * x;
      const Eigen::VectorXd mx = Mf * x;
      const double res = (kx - lam * mx).norm();
      const double scale = kx.norm() + std::abs(lam) * mx.norm();
      if (res <= tol * scale) {
        locked.push_back(x);
        locked_M.push_back(mx);
        locked_lambda.push_back(lam);
      } else {
        next_start = x;
        break;
      }
    }
    if (static_cast<int>(locked.size()) >= k) break;
    if (next_start.size() > 0)
      start = next_start;
    else if (breakdown || restart + 1 < max_restarts)
      start = random_vec();
    maxdim = std::min(dim_cap, maxdim + maxdim / 2 + 4);
    out.restarts = restart + 1;
  }

  if (static_cast<int>(locked.size()) < k)
    throw SolverError("eigensolver failed to converge " + std::to_string(k) +
                      " modes to the requested tolerance");

  // assemble ascending spectrum on the full dof set
  std::vector<int> order(locked.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return locked_lambda[a] < locked_lambda[b]; });
  ws->warm_start = locked[order[0]];
  for (int i = 0; i < k; ++i) {
    const int o = order[i];
    EigenPair p;
    p.lambda = locked_lambda[o];
    p.w = ws->expand(locked[o]);
    const Eigen::VectorXd kw = K.mat * p.w;
    const Eigen::VectorXd mw = M.mat * p.w;
    p.residual = (kw - p.lambda * mw).norm() / (kw.norm() + std::abs(p.lambda) * mw.norm());
    out.pairs.push_back(std::move(p));
  }
  for (int i = 0; i + 1 < k; ++i) {
    if (out.pairs[i + 1].lambda - out.pairs[i].lambda <
        1e-8 * std::max(out.pairs[i].lambda, 1e-300)) {
      out.pairs[i].near_degenerate = true;
      out.pairs[i + 1].near_degenerate = true;
    }
  }
  return out;
}

double rayleigh_quotient(const SparseSymOperator& K, const SparseSymOperator& M,
                         const Eigen::VectorXd& w) {
  const double den = w.dot(M.mat * w);
  if (den <= 0.0)
    throw std::invalid_argument("rayleigh_quotient: vector has no mass");
  return w.dot(K.mat * w) / den;
}

double material_fraction(const Eigen::VectorXd& w, const SparseSymOperator& M_material,
                         const SparseSymOperator& M) {
  const double den = w.dot(M.mat * w);
  if (den <= 0.0)
    throw std::invalid_argument("material_fraction: vector has no mass");
  return w.dot(M_material.mat * w) / den;
}

}  // namespace specopt
