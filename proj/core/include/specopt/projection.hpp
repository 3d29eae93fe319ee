#pragma once

#include <Eigen/Dense>

#include "specopt/problem.hpp"

namespace specopt {

// Lumped-L2 projection onto the admissible set {phi in G pointwise,
// weighted mean = m, clamped nodes at pure material}.
struct ProjectionResult {
  PhaseField field;
  // scalar storage: -1/0/+1 per node for the binding bound;
  // vector storage: 1 per (node, component) where phi^i = 0 binds
  Eigen::MatrixXi active;
  double scalar_shift = 0.0;     // mean-constraint multiplier (two-phase)
  Eigen::VectorXd vector_shift;  // multiplier in the tangent space (N >= 3)
};

// Pointwise projection of y onto the Gibbs simplex (sorted-threshold rule).
Eigen::VectorXd project_simplex(const Eigen::VectorXd& y);

// Pointwise clip/simplex projection of field + shift, with the constant
// shift solved so the mean constraint holds; clamped nodes stay at pure
// material and contribute to the mean. Bitwise idempotent on admissible
// inputs. Throws when the mean is unreachable.
ProjectionResult project_admissible(const Problem& prob, const PhaseField& field);

// Affine part only (no obstacle): restores the per-node component sum and
// the weighted mean by constant shifts of the free nodes. Used by the
// penalty constraint mode.
PhaseField project_affine(const Problem& prob, const PhaseField& field);

}  // namespace specopt
