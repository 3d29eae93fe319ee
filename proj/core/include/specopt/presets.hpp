#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specopt/config.hpp"
#include "specopt/optimizer.hpp"

namespace specopt {

// Named benchmark setups for the cantilever beam on (0,2) x (0,1), clamped
// at the left edge, with the heavy tip box (1.9,2) x (0.45,0.55):
//   beam_eps         maximize lambda_1 over the interface-width schedule
//                    {0.08, 0.04, 0.02, 0.01}
//   beam_gamma       the same run at the weaker regularization gamma = 1e-5
//   beam_lam12       maximize lambda_1 + alpha * lambda_2, warm-started from
//                    the alpha = 0 optimum (alpha defaults to 0.1)
//   beam_compliance  minimize compliance - alpha * lambda_1 under a unit
//                    downward tip load (alpha defaults to 10, gamma = 1e-3)
std::vector<std::string> preset_names();
bool is_preset(const std::string& name);

// Configuration of the preset's final optimization stage. alpha overrides
// the eigenvalue weight where the preset has one (beam_lam12,
// beam_compliance); passing it for the other presets is an error.
RunConfig preset_config(const std::string& name,
                        std::optional<double> alpha = std::nullopt);

// Full protocol run: epsilon continuation (plus the joint warm-started stage
// for beam_lam12) and the summary table mirroring the published layout.
struct PresetRun {
  std::string name;
  RunConfig config;  // final-stage configuration
  std::vector<ContinuationEntry> stages;
  PhaseField field;  // final design
  Evaluation eval;   // evaluation at the final design
  std::vector<std::string> table_columns;
  std::vector<std::vector<double>> table_rows;
  std::vector<std::string> warnings;
};

PresetRun run_preset(const std::string& name,
                     std::optional<double> alpha = std::nullopt,
                     std::optional<std::uint64_t> seed = std::nullopt,
                     const RowCallback& on_row = {});

}  // namespace specopt
