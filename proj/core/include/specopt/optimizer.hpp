#pragma once

#include <functional>
#include <string>
#include <vector>

#include "specopt/objective.hpp"
#include "specopt/projection.hpp"

namespace specopt {

enum class StopReason { stationary, max_iterations, line_search_failed };

struct OptimizerOptions {
  int max_iter = 2000;
  double tol_abs = 1e-14;   // stop when pi <= tol_abs + tol_rel * pi_initial
  double tol_rel = 1e-3;
  double armijo_c1 = 1e-4;  // J_t <= J - c1/tau * ||phi_t - phi||^2
  double tau_init = 1.0;
  int max_halvings = 40;
  // search direction: H1-smoothed representative (gamma*eps*L + M_lumped)^-1
  // applied to the dual, or the plain lumped representative when off
  bool h1_smoothing = true;
  // constraint handling: obstacle projection (default) or the delta-penalty
  // with the affine projection, run over a decreasing delta schedule
  bool penalty_mode = false;
  std::vector<double> delta_schedule;
};

struct HistoryRow {
  int iter = 0;
  double J = 0.0;
  std::vector<double> lambdas;
  double glandau = 0.0;
  double compliance = 0.0;
  double step = 0.0;
  double gradnorm = 0.0;
};

struct OptState {
  PhaseField phi;
  Evaluation eval;
  int iterations = 0;
  double tau = 1.0;
  StopReason stop = StopReason::max_iterations;
  double stationarity = 0.0;   // ||phi - P(phi - d)|| at the last iterate
  double stationarity0 = 0.0;  // same measure at the start
  bool degeneracy_warned = false;
  std::vector<HistoryRow> history;  // accepted iterates, row 0 = start
};

using RowCallback = std::function<void(const HistoryRow&)>;

// Projected-gradient descent (Armijo backtracking with step doubling) from
// phi0, which is projected to the admissible set first.
OptState run(const Problem& prob, const ObjectiveSpec& spec,
             const OptimizerOptions& opts, const PhaseField& phi0,
             EvalWorkspace* ws = nullptr, const RowCallback& on_row = {});

struct ContinuationEntry {
  double epsilon = 0.0;
  double gamma_energy = 0.0;  // gamma * E(phi) at the stage optimum
  double lambda1 = 0.0;       // first selected eigenvalue (0 when none)
  OptState state;
};

// Runs the schedule sequentially, warm-starting each epsilon from the
// previous optimum; prob.model.epsilon is left at the last entry. Emits a
// warning (not an error) when the mesh under-resolves an interface width.
std::vector<ContinuationEntry> epsilon_continuation(
    Problem& prob, const ObjectiveSpec& spec, const OptimizerOptions& opts,
    const std::vector<double>& schedule, const PhaseField& phi0,
    std::vector<std::string>* warnings = nullptr, EvalWorkspace* ws = nullptr,
    const RowCallback& on_row = {});

// Penalty replacement of the obstacle: psihat(phi) = sum_i min(phi^i,0)^2
// integrated with the lumped rule, entering the energy as gamma/(eps*delta).
double penalty_term(const Problem& prob, const PhaseField& phi);
Eigen::MatrixXd penalty_gradient_dual(const Problem& prob, const PhaseField& phi);
// L2 norm of the componentwise negative part [phi]_- (lumped rule).
double negative_part_l2(const Problem& prob, const PhaseField& phi);

// One affine-projected gradient step on the delta-penalized objective with
// the plain lumped representative and fixed step tau.
PhaseField penalty_mode_step(const Problem& prob, const ObjectiveSpec& spec,
                             const PhaseField& phi, double delta, double tau = 1.0,
                             EvalWorkspace* ws = nullptr);

// Model-problem solvers for the penalty limit study (two-phase scalar form,
// no clamp): minimize
//   gamma*( eps/2 u'Lu + 1/eps sum_n w_n psi0(u_n) + 1/(eps*delta) sum_n w_n
//   psihat(u_n) ) - forcing . u
// under the weighted mean constraint, by a damped semismooth Newton method
// on the bordered first-order system.
PhaseField solve_penalty_scalar(const Problem& prob, const Eigen::VectorXd& forcing,
                                double gamma, double delta, const PhaseField& phi0,
                                bool include_psi0 = true, int max_iter = 200);

// Obstacle-mode counterpart (box constraints exact); reference point for the
// delta -> 0 limit of solve_penalty_scalar.
PhaseField solve_obstacle_scalar(const Problem& prob, const Eigen::VectorXd& forcing,
                                 double gamma, const PhaseField& phi0,
                                 bool include_psi0 = true);

}  // namespace specopt
