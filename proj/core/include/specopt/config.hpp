#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "specopt/objective.hpp"
#include "specopt/optimizer.hpp"
#include "specopt/problem.hpp"

namespace specopt {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full description of one experiment, parsed from the sectioned key = value
// text format (see parse_config) or built by a preset.
struct RunConfig {
  // [mesh]
  int nx = 64, ny = 32;
  double lx = 2.0, ly = 1.0;

  // [boundary]
  std::vector<Edge> dirichlet{Edge::left};
  std::optional<TractionSpec> traction;

  // [material]
  double young = 1.0, poisson = 0.3;
  std::vector<double> rho{1.0};  // one entry per material phase (or broadcast)
  double alpha_bar = 2e-4, beta_bar = 1e-4;
  int stiffness_exponent = 1, density_exponent = 2;
  double cutoff_omega = 0.1;
  int phases = 2;

  // [model]
  std::vector<double> epsilon_schedule{0.02};  // singleton = plain run
  double gamma = 1e-4;
  double mean = 0.0;            // scalar mean for two phases
  std::vector<double> vector_mean;  // componentwise mean for three or more
  std::optional<Box> rho_box;
  double rho_factor = 1.0;
  bool clamp_rho_box = true;

  // [objective]
  std::vector<int> eigen_indices;
  std::vector<double> eigen_weights;  // negative = maximize; defaults to -1
  double compliance_weight = 0.0;

  // [optimizer]
  OptimizerOptions opt;
  std::string mode = "projection";  // projection | penalty

  // [initial]
  std::string initial_kind = "checkerboard";  // constant | checkerboard | file
  std::string initial_file;

  // [run]
  std::uint64_t seed = 42;
  std::string out_dir = "out";

  // Assembled, finalized problem at the first schedule epsilon.
  Problem build_problem() const;
  ObjectiveSpec objective() const;
};

// Parses the sectioned text. Lines are `key = value` under [section]
// headers; `#` starts a comment. Unknown sections or keys and malformed
// values are ConfigErrors carrying the line number; semantic violations name
// the offending key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Text form that parses back to the same configuration.
std::string render_config(const RunConfig& cfg);

// Named initial designs: "constant" (admissible uniform field),
// "checkerboard" (sign(v)|v|^0.3 with v = cos(3 pi x) cos(4 pi y), two-phase
// only), or "file:<path>" / the configured file. The result is projected to
// the admissible set.
PhaseField initial_field(const RunConfig& cfg, const Problem& prob);

}  // namespace specopt
