#include "specopt/presets.hpp"

#include <stdexcept>

namespace specopt {

namespace {

// cantilever base setup: E = 1, nu = 0.3, unit density with the factor-100
// tip box, gamma = 1e-4, zero mean, checkerboard start
RunConfig beam_base() {
  RunConfig c;
  c.nx = 160;
  c.ny = 80;
  c.lx = 2.0;
  c.ly = 1.0;
  c.dirichlet = {Edge::left};
  c.young = 1.0;
  c.poisson = 0.3;
  c.rho = {1.0};
  c.phases = 2;
  c.gamma = 1e-4;
  c.mean = 0.0;
  c.rho_box = Box{1.9, 2.0, 0.45, 0.55};
  c.rho_factor = 100.0;
  c.clamp_rho_box = true;
  c.eigen_indices = {1};
  c.eigen_weights = {-1.0};
  c.epsilon_schedule = {0.08, 0.04, 0.02};
  c.initial_kind = "checkerboard";
  c.opt.max_iter = 200;
  c.opt.tol_rel = 2e-3;
  c.opt.tol_abs = 1e-9;
  return c;
}

constexpr double kDefaultLam12Alpha = 0.1;
constexpr double kDefaultComplianceAlpha = 10.0;

}  // namespace

std::vector<std::string> preset_names() {
  return {"beam_eps", "beam_gamma", "beam_lam12", "beam_compliance"};
}

bool is_preset(const std::string& name) {
  for (const auto& p : preset_names())
    if (p == name) return true;
  return false;
}

RunConfig preset_config(const std::string& name, std::optional<double> alpha) {
  if (name == "beam_eps" || name == "beam_gamma") {
    if (alpha)
      throw ConfigError("preset " + name + " takes no alpha parameter");
    RunConfig c = beam_base();
    c.out_dir = name;
    if (name == "beam_eps") c.epsilon_schedule = {0.08, 0.04, 0.02, 0.01};
    else c.gamma = 1e-5;
    return c;
  }
  if (name == "beam_lam12") {
    RunConfig c = beam_base();
    c.out_dir = name;
    c.eigen_indices = {1, 2};
    c.eigen_weights = {-1.0, -alpha.value_or(kDefaultLam12Alpha)};
    return c;
  }
  if (name == "beam_compliance") {
    RunConfig c = beam_base();
    c.out_dir = name;
    c.gamma = 1e-3;
    c.traction = TractionSpec{Edge::right, 0.45, 0.55, 0.0, -1.0};
    c.compliance_weight = 1.0;
    c.eigen_weights = {-alpha.value_or(kDefaultComplianceAlpha)};
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

PresetRun run_preset(const std::string& name, std::optional<double> alpha,
                     std::optional<std::uint64_t> seed, const RowCallback& on_row) {
  PresetRun out;
  out.name = name;
  out.config = preset_config(name, alpha);
  if (seed) out.config.seed = *seed;

  EvalWorkspace ws;
  ws.seed = out.config.seed;

  if (name == "beam_lam12") {
    // first reach the alpha = 0 optimum (lambda_2 recorded with zero weight),
    // then re-weight and continue at the final interface width
    RunConfig base = out.config;
    base.eigen_weights = {-1.0, 0.0};
    Problem prob = base.build_problem();
    const PhaseField phi0 = initial_field(base, prob);
    ObjectiveSpec spec0 = base.objective();
    out.stages = epsilon_continuation(prob, spec0, base.opt,
                                      base.epsilon_schedule, phi0,
                                      &out.warnings, &ws, on_row);
    const ContinuationEntry& base_stage = out.stages.back();
    out.table_columns = {"alpha", "lambda_1", "lambda_2"};
    out.table_rows.push_back({0.0, base_stage.state.eval.lambdas[0],
                              base_stage.state.eval.lambdas[1]});

    const double a = -out.config.eigen_weights[1];
    if (a != 0.0) {
      ObjectiveSpec joint = out.config.objective();
      ContinuationEntry entry;
      entry.epsilon = prob.model.epsilon;
      entry.state = run(prob, joint, out.config.opt, base_stage.state.phi, &ws, on_row);
      entry.gamma_energy = joint.gamma * entry.state.eval.glandau;
      entry.lambda1 = entry.state.eval.lambdas[0];
      out.stages.push_back(std::move(entry));
    }
    const ContinuationEntry& last = out.stages.back();
    out.table_rows.push_back(
        {a, last.state.eval.lambdas[0], last.state.eval.lambdas[1]});
    out.field = last.state.phi;
    out.eval = last.state.eval;
    return out;
  }

  Problem prob = out.config.build_problem();
  const PhaseField phi0 = initial_field(out.config, prob);
  ObjectiveSpec spec = out.config.objective();
  out.stages = epsilon_continuation(prob, spec, out.config.opt,
                                    out.config.epsilon_schedule, phi0,
                                    &out.warnings, &ws, on_row);
  const ContinuationEntry& last = out.stages.back();
  out.field = last.state.phi;
  out.eval = last.state.eval;

  if (name == "beam_compliance") {
    out.table_columns = {"alpha", "compliance", "lambda_1"};
    out.table_rows.push_back({-out.config.eigen_weights[0], out.eval.compliance,
                              out.eval.lambdas[0]});
  } else {
    out.table_columns = {"epsilon", "gamma_E", "lambda_1"};
    for (const auto& st : out.stages)
      out.table_rows.push_back({st.epsilon, st.gamma_energy, st.lambda1});
  }
  return out;
}

}  // namespace specopt
