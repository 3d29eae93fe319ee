#include "specopt/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "specopt/config.hpp"
#include "specopt/diagnostics.hpp"
#include "specopt/io.hpp"
#include "specopt/presets.hpp"

#ifdef SPECOPT_HAVE_OPENMP
#include <omp.h>
#endif

namespace specopt {

namespace {

void set_threads(int n) {
  if (n < 1) return;
  Eigen::setNbThreads(n);
#ifdef SPECOPT_HAVE_OPENMP
  omp_set_num_threads(n);
#endif
}

// SPECOPT_OUT > --out > configured directory
std::string effective_out(const std::string& configured, const std::string& flag) {
  if (const char* env = std::getenv("SPECOPT_OUT"); env && *env) return env;
  if (!flag.empty()) return flag;
  return configured;
}

void print_row(const HistoryRow& row) {
  std::string lam;
  char buf[64];
  for (double l : row.lambdas) {
    std::snprintf(buf, sizeof(buf), " %.6e", l);
    lam += buf;
  }
  std::printf("it %4d  J %+.8e  lam%s  gE %.4e  compl %.4e  step %.2e  |g| %.3e\n",
              row.iter, row.J, lam.c_str(), row.glandau, row.compliance, row.step,
              row.gradnorm);
  std::fflush(stdout);
}

std::vector<HistoryRow> concat_history(const std::vector<ContinuationEntry>& stages) {
  std::vector<HistoryRow> rows;
  for (const auto& st : stages)
    for (const auto& r : st.state.history) rows.push_back(r);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].iter = static_cast<int>(i);
  return rows;
}

void write_run_artifacts(const std::string& dir, const RunConfig& cfg,
                         const Problem& prob,
                         const std::vector<ContinuationEntry>& stages,
                         const PhaseField& field, const Evaluation& eval,
                         const std::vector<std::string>& table_columns = {},
                         const std::vector<std::vector<double>>& table_rows = {}) {
  ensure_directory(dir);
  {
    std::ofstream out(dir + "/config.txt");
    out << render_config(cfg);
  }
  write_history(concat_history(stages), dir + "/history.csv");
  write_field_csv(prob.mesh, field, dir + "/field.csv");

  std::vector<VtkExtra> extras;
  if (!eval.spectrum.pairs.empty()) {
    const Eigen::VectorXd& w = eval.spectrum.pairs.front().w;
    if (w.size() == 2 * prob.mesh.num_nodes()) {
      VtkExtra mag;
      mag.name = "mode_magnitude";
      mag.values.resize(prob.mesh.num_nodes());
      for (int n = 0; n < prob.mesh.num_nodes(); ++n)
        mag.values[n] = std::hypot(w[2 * n], w[2 * n + 1]);
      extras.push_back(std::move(mag));
    }
  }
  write_field_vtk(prob.mesh, field, dir + "/field.vtk", extras);

  if (!table_columns.empty())
    write_table(table_columns, table_rows, dir + "/table.csv");
}

int do_run(RunConfig cfg, const std::string& out_flag) {
  const std::string dir = effective_out(cfg.out_dir, out_flag);
  Problem prob = cfg.build_problem();
  const PhaseField phi0 = initial_field(cfg, prob);
  const ObjectiveSpec spec = cfg.objective();

  EvalWorkspace ws;
  ws.seed = cfg.seed;
  std::vector<std::string> warnings;
  auto stages = epsilon_continuation(prob, spec, cfg.opt, cfg.epsilon_schedule,
                                     phi0, &warnings, &ws, print_row);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  std::vector<std::string> cols;
  std::vector<std::vector<double>> rows;
  if (stages.size() > 1) {
    cols = {"epsilon", "gamma_E", "lambda_1"};
    for (const auto& st : stages)
      rows.push_back({st.epsilon, st.gamma_energy, st.lambda1});
  }
  const auto& last = stages.back().state;
  write_run_artifacts(dir, cfg, prob, stages, last.phi, last.eval, cols, rows);
  std::printf("done: J %+.8e  glandau %.6e  wrote %s\n", last.eval.J,
              last.eval.glandau, dir.c_str());
  return 0;
}

int do_diagnose(const std::string& field_path, const RunConfig& cfg,
                const std::string& out_flag) {
  const std::string dir = effective_out(cfg.out_dir, out_flag);
  Problem prob = cfg.build_problem();
  // a saved field belongs to the end of the schedule
  prob.model.epsilon = cfg.epsilon_schedule.back();
  const PhaseField phi = read_field_csv(prob.mesh, field_path);
  const ObjectiveSpec spec = cfg.objective();

  EvalWorkspace ws;
  ws.seed = cfg.seed;
  const Evaluation eval = evaluate_objective(prob, spec, phi, ws);
  const GradientField grad = total_gradient(prob, spec, phi, eval);
  const MultiplierEstimate mult = recover_multipliers(prob, phi, grad);

  std::vector<std::pair<std::string, double>> metrics;
  metrics.emplace_back("J", eval.J);
  for (std::size_t r = 0; r < spec.eigen_indices.size(); ++r)
    metrics.emplace_back("lambda_" + std::to_string(spec.eigen_indices[r]),
                         eval.lambdas[r]);
  metrics.emplace_back("glandau", eval.glandau);
  metrics.emplace_back("gamma_E", spec.gamma * eval.glandau);
  metrics.emplace_back("compliance", eval.compliance);
  metrics.emplace_back("constraint_violation", phi.constraint_violation());

  if (prob.scalar_mode()) {
    const double sigma = transition_constant_scalar().sigma;
    const auto chains = extract_interfaces(prob.mesh, phi.scalar_view());
    metrics.emplace_back("perimeter", total_perimeter(chains));
    metrics.emplace_back("sigma", sigma);
    metrics.emplace_back("gamma_limit_residual", gamma_limit_check(prob, phi, sigma));
    metrics.emplace_back("equipartition_residual", equipartition_residual(prob, phi));
    if (!spec.eigen_indices.empty() && !chains.empty()) {
      const GmvReport gmv = gmv_residual(prob, phi, eval.spectrum, spec, sigma);
      metrics.emplace_back("gmv_samples", static_cast<double>(gmv.samples.size()));
      metrics.emplace_back("gmv_theta", gmv.theta_fit);
      metrics.emplace_back("gmv_rms", gmv.rms);
      metrics.emplace_back("gmv_normalized_rms", gmv.normalized_rms);
    }
  } else {
    const auto junctions = triple_junction_angles(prob, phi);
    metrics.emplace_back("junctions", static_cast<double>(junctions.size()));
    for (std::size_t j = 0; j < junctions.size(); ++j)
      for (int a = 0; a < 3; ++a)
        metrics.emplace_back("junction_" + std::to_string(j + 1) + "_angle_" +
                                 std::to_string(a + 1),
                             junctions[j].angles[a]);
  }
  metrics.emplace_back("kkt_residual", mult.kkt_residual);
  metrics.emplace_back("complementarity", mult.complementarity);
  metrics.emplace_back("mu_max",
                       mult.mu_hat.size() ? mult.mu_hat.maxCoeff() : 0.0);

  for (auto& [name, value] : metrics)
    std::printf("%-24s %+.10e\n", name.c_str(), value);
  ensure_directory(dir);
  // the CSV report keeps the metric names in a string column
  {
    std::ofstream out(dir + "/diagnostics.csv");
    if (!out) throw std::runtime_error(dir + "/diagnostics.csv: cannot open for writing");
    out << "metric,value\n";
    for (auto& [name, value] : metrics)
      out << name << "," << format_full(value) << "\n";
  }
  std::printf("wrote %s/diagnostics.csv\n", dir.c_str());
  return 0;
}

int do_preset(const std::string& name, std::optional<double> alpha,
              std::optional<std::uint64_t> seed, const std::string& out_flag) {
  PresetRun pr = run_preset(name, alpha, seed, print_row);
  for (const auto& w : pr.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const std::string dir = effective_out(pr.config.out_dir, out_flag);
  Problem prob = pr.config.build_problem();
  write_run_artifacts(dir, pr.config, prob, pr.stages, pr.field, pr.eval,
                      pr.table_columns, pr.table_rows);
  std::printf("done: J %+.8e  wrote %s\n", pr.eval.J, dir.c_str());
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("specopt");
  for (const auto& a : args) full.push_back(a);
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"phase-field eigenvalue and compliance shape optimization"};
  app.require_subcommand(1);

  std::string cfg_path, from_path, field_path, preset_name;
  std::string out_flag;
  std::uint64_t seed_val = 0;
  int threads = 0;
  double alpha_val = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out_flag, "output directory (SPECOPT_OUT wins)");
    sub->add_option("--seed", seed_val, "deterministic seed override");
    sub->add_option("--threads", threads, "internal assembly/solver threads");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "optimize from the configured start");
  cmd_run->add_option("config", cfg_path, "configuration file")->required();
  add_common(cmd_run);

  CLI::App* cmd_cont = app.add_subcommand("continue", "optimize from a saved field");
  cmd_cont->add_option("config", cfg_path, "configuration file")->required();
  cmd_cont->add_option("--from", from_path, "field CSV to start from")->required();
  add_common(cmd_cont);

  CLI::App* cmd_diag = app.add_subcommand("diagnose", "diagnostics of a saved field");
  cmd_diag->add_option("field", field_path, "field CSV")->required();
  cmd_diag->add_option("config", cfg_path, "configuration file")->required();
  add_common(cmd_diag);

  CLI::App* cmd_preset = app.add_subcommand("preset", "run a named benchmark");
  cmd_preset->add_option("name", preset_name, "beam_eps | beam_gamma | beam_lam12 | beam_compliance")
      ->required();
  cmd_preset->add_option("--alpha", alpha_val, "eigenvalue weight (where applicable)");
  add_common(cmd_preset);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    set_threads(threads);

    if (sub == cmd_preset) {
      std::optional<double> alpha;
      if (cmd_preset->count("--alpha")) alpha = alpha_val;
      std::optional<std::uint64_t> seed;
      if (sub->count("--seed")) seed = seed_val;
      return do_preset(preset_name, alpha, seed, out_flag);
    }

    RunConfig cfg = load_config(cfg_path);
    if (sub->count("--seed")) cfg.seed = seed_val;
    if (sub == cmd_cont) {
      cfg.initial_kind = "file";
      cfg.initial_file = from_path;
    }
    if (sub == cmd_diag) return do_diagnose(field_path, cfg, out_flag);
    return do_run(std::move(cfg), out_flag);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace specopt
