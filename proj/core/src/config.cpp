#include "specopt/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "specopt/io.hpp"
#include "specopt/projection.hpp"

namespace specopt {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail_line(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

[[noreturn]] void fail_key(const std::string& key, const std::string& msg) {
  throw ConfigError("key '" + key + "': " + msg);
}

double parse_double(const std::string& v, int line, const std::string& key) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *trim(end).c_str() != '\0')
    fail_line(line, "key '" + key + "' expects a number, got '" + v + "'");
  return x;
}

long long parse_int(const std::string& v, int line, const std::string& key) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *trim(end).c_str() != '\0')
    fail_line(line, "key '" + key + "' expects an integer, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail_line(line, "key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& v, int line,
                                      const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(item, line, key));
  return out;
}

std::vector<int> parse_int_list(const std::string& v, int line,
                                const std::string& key) {
  std::vector<int> out;
  for (const auto& item : split_list(v))
    out.push_back(static_cast<int>(parse_int(item, line, key)));
  return out;
}

Edge parse_edge(const std::string& v, int line, const std::string& key) {
  if (v == "left") return Edge::left;
  if (v == "right") return Edge::right;
  if (v == "bottom") return Edge::bottom;
  if (v == "top") return Edge::top;
  fail_line(line, "key '" + key + "' expects left/right/bottom/top, got '" + v + "'");
}

const char* edge_name(Edge e) {
  switch (e) {
    case Edge::left: return "left";
    case Edge::right: return "right";
    case Edge::bottom: return "bottom";
    case Edge::top: return "top";
  }
  return "?";
}

void check_schedule(const std::vector<double>& s, const std::string& key) {
  if (s.empty()) fail_key(key, "must not be empty");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0)) fail_key(key, "entries must be positive");
    if (i > 0 && !(s[i] < s[i - 1]))
      fail_key(key, "entries must be strictly decreasing");
  }
}

struct TractionDraft {
  bool any = false;
  bool has_edge = false;
  TractionSpec spec;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  TractionDraft traction;
  bool saw_epsilon = false, saw_schedule = false, saw_weights = false;

  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail_line(lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"mesh",      "boundary",  "material",
                                    "model",     "objective", "optimizer",
                                    "initial",   "run"};
      bool ok = false;
      for (const char* s : known) ok = ok || section == s;
      if (!ok) fail_line(lineno, "unknown section [" + section + "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_line(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail_line(lineno, "empty key");
    if (section.empty()) fail_line(lineno, "key '" + key + "' outside any [section]");

    auto unknown = [&]() -> void {
      fail_line(lineno, "unknown key '" + key + "' in section [" + section + "]");
    };

    if (section == "mesh") {
      if (key == "nx") cfg.nx = static_cast<int>(parse_int(val, lineno, key));
      else if (key == "ny") cfg.ny = static_cast<int>(parse_int(val, lineno, key));
      else if (key == "lx") cfg.lx = parse_double(val, lineno, key);
      else if (key == "ly") cfg.ly = parse_double(val, lineno, key);
      else unknown();
    } else if (section == "boundary") {
      if (key == "dirichlet") {
        cfg.dirichlet.clear();
        for (const auto& item : split_list(val))
          cfg.dirichlet.push_back(parse_edge(item, lineno, key));
      } else if (key == "traction_edge") {
        traction.any = traction.has_edge = true;
        traction.spec.edge = parse_edge(val, lineno, key);
      } else if (key == "traction_from") {
        traction.any = true;
        traction.spec.from = parse_double(val, lineno, key);
      } else if (key == "traction_to") {
        traction.any = true;
        traction.spec.to = parse_double(val, lineno, key);
      } else if (key == "traction_gx") {
        traction.any = true;
        traction.spec.gx = parse_double(val, lineno, key);
      } else if (key == "traction_gy") {
        traction.any = true;
        traction.spec.gy = parse_double(val, lineno, key);
      } else unknown();
    } else if (section == "material") {
      if (key == "young") cfg.young = parse_double(val, lineno, key);
      else if (key == "poisson") cfg.poisson = parse_double(val, lineno, key);
      else if (key == "rho") cfg.rho = parse_double_list(val, lineno, key);
      else if (key == "alpha_bar") cfg.alpha_bar = parse_double(val, lineno, key);
      else if (key == "beta_bar") cfg.beta_bar = parse_double(val, lineno, key);
      else if (key == "stiffness_exponent")
        cfg.stiffness_exponent = static_cast<int>(parse_int(val, lineno, key));
      else if (key == "density_exponent")
        cfg.density_exponent = static_cast<int>(parse_int(val, lineno, key));
      else if (key == "cutoff_omega") cfg.cutoff_omega = parse_double(val, lineno, key);
      else if (key == "phases") cfg.phases = static_cast<int>(parse_int(val, lineno, key));
      else unknown();
    } else if (section == "model") {
      if (key == "epsilon") {
        saw_epsilon = true;
        cfg.epsilon_schedule = {parse_double(val, lineno, key)};
      } else if (key == "epsilon_schedule") {
        saw_schedule = true;
        cfg.epsilon_schedule = parse_double_list(val, lineno, key);
      } else if (key == "gamma") cfg.gamma = parse_double(val, lineno, key);
      else if (key == "mean") cfg.mean = parse_double(val, lineno, key);
      else if (key == "vector_mean") cfg.vector_mean = parse_double_list(val, lineno, key);
      else if (key == "rho_box") {
        const auto v = parse_double_list(val, lineno, key);
        if (v.size() != 4)
          fail_line(lineno, "key 'rho_box' expects x0,x1,y0,y1");
        cfg.rho_box = Box{v[0], v[1], v[2], v[3]};
      } else if (key == "rho_factor") cfg.rho_factor = parse_double(val, lineno, key);
      else if (key == "clamp_rho_box") cfg.clamp_rho_box = parse_bool(val, lineno, key);
      else unknown();
    } else if (section == "objective") {
      if (key == "eigen_indices") cfg.eigen_indices = parse_int_list(val, lineno, key);
      else if (key == "eigen_weights") {
        saw_weights = true;
        cfg.eigen_weights = parse_double_list(val, lineno, key);
      } else if (key == "compliance_weight")
        cfg.compliance_weight = parse_double(val, lineno, key);
      else unknown();
    } else if (section == "optimizer") {
      if (key == "max_iter") cfg.opt.max_iter = static_cast<int>(parse_int(val, lineno, key));
      else if (key == "tol_abs") cfg.opt.tol_abs = parse_double(val, lineno, key);
      else if (key == "tol_rel") cfg.opt.tol_rel = parse_double(val, lineno, key);
      else if (key == "armijo_c1") cfg.opt.armijo_c1 = parse_double(val, lineno, key);
      else if (key == "tau_init") cfg.opt.tau_init = parse_double(val, lineno, key);
      else if (key == "max_halvings")
        cfg.opt.max_halvings = static_cast<int>(parse_int(val, lineno, key));
      else if (key == "h1_smoothing") cfg.opt.h1_smoothing = parse_bool(val, lineno, key);
      else if (key == "mode") cfg.mode = val;
      else if (key == "delta_schedule")
        cfg.opt.delta_schedule = parse_double_list(val, lineno, key);
      else unknown();
    } else if (section == "initial") {
      if (key == "kind") cfg.initial_kind = val;
      else if (key == "file") cfg.initial_file = val;
      else unknown();
    } else if (section == "run") {
      if (key == "seed") {
        char* end = nullptr;
        cfg.seed = std::strtoull(val.c_str(), &end, 10);
        if (end == val.c_str() || *trim(end).c_str() != '\0')
          fail_line(lineno, "key 'seed' expects an integer, got '" + val + "'");
      } else if (key == "out") cfg.out_dir = val;
      else unknown();
    }
  }

  if (saw_epsilon && saw_schedule)
    throw ConfigError("epsilon and epsilon_schedule are mutually exclusive");

  // semantic validation, naming the offending key
  if (cfg.nx < 1) fail_key("nx", "must be at least 1");
  if (cfg.ny < 1) fail_key("ny", "must be at least 1");
  if (!(cfg.lx > 0.0)) fail_key("lx", "must be positive");
  if (!(cfg.ly > 0.0)) fail_key("ly", "must be positive");
  if (!(cfg.young > 0.0)) fail_key("young", "must be positive");
  if (!(cfg.poisson > -1.0 && cfg.poisson < 0.5))
    fail_key("poisson", "must lie in (-1, 0.5)");
  if (cfg.phases < 2) fail_key("phases", "needs at least two phases");
  if (cfg.rho.empty() ||
      (cfg.rho.size() != 1 &&
       cfg.rho.size() != static_cast<std::size_t>(cfg.phases - 1)))
    fail_key("rho", "needs one entry or one per material phase");
  for (double r : cfg.rho)
    if (!(r > 0.0)) fail_key("rho", "densities must be positive");
  if (!(cfg.alpha_bar > 0.0)) fail_key("alpha_bar", "must be positive");
  if (!(cfg.beta_bar > 0.0)) fail_key("beta_bar", "must be positive");
  if (cfg.stiffness_exponent < 1) fail_key("stiffness_exponent", "must be at least 1");
  if (cfg.density_exponent < 1) fail_key("density_exponent", "must be at least 1");
  if (!(cfg.cutoff_omega > 0.0 && cfg.cutoff_omega <= 0.5))
    fail_key("cutoff_omega", "must lie in (0, 0.5]");
  check_schedule(cfg.epsilon_schedule, "epsilon_schedule");
  if (!(cfg.gamma > 0.0)) fail_key("gamma", "must be positive");
  if (!(cfg.mean > -1.0 && cfg.mean < 1.0)) fail_key("mean", "must lie in (-1, 1)");
  if (cfg.phases == 2 && !cfg.vector_mean.empty())
    fail_key("vector_mean", "requires phases >= 3 (use mean for two phases)");
  if (cfg.phases >= 3) {
    if (cfg.vector_mean.size() != static_cast<std::size_t>(cfg.phases))
      fail_key("vector_mean", "needs one entry per phase");
    double sum = 0.0;
    for (double m : cfg.vector_mean) {
      if (!(m > 0.0 && m < 1.0)) fail_key("vector_mean", "entries must lie in (0, 1)");
      sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail_key("vector_mean", "entries must sum to 1");
  }
  if (!(cfg.rho_factor > 0.0)) fail_key("rho_factor", "must be positive");
  if (cfg.rho_box) {
    if (!(cfg.rho_box->x0 < cfg.rho_box->x1 && cfg.rho_box->y0 < cfg.rho_box->y1))
      fail_key("rho_box", "needs x0 < x1 and y0 < y1");
  }

  if (traction.any) {
    if (!traction.has_edge) fail_key("traction_edge", "required with any traction key");
    if (!(traction.spec.from < traction.spec.to))
      fail_key("traction_from", "needs traction_from < traction_to");
    cfg.traction = traction.spec;
  }

  for (std::size_t i = 0; i < cfg.eigen_indices.size(); ++i) {
    if (cfg.eigen_indices[i] < 1) fail_key("eigen_indices", "indices are 1-based");
    if (i > 0 && cfg.eigen_indices[i] <= cfg.eigen_indices[i - 1])
      fail_key("eigen_indices", "must be strictly increasing");
  }
  if (!saw_weights && cfg.eigen_weights.empty())
    cfg.eigen_weights.assign(cfg.eigen_indices.size(), -1.0);
  if (cfg.eigen_weights.size() != cfg.eigen_indices.size())
    fail_key("eigen_weights", "needs one weight per eigen index");
  if (cfg.eigen_indices.empty() && cfg.compliance_weight == 0.0)
    throw ConfigError("no objective terms");
  if (cfg.compliance_weight != 0.0 && !cfg.traction)
    fail_key("compliance_weight", "requires a traction segment");

  if (cfg.opt.max_iter < 1) fail_key("max_iter", "must be at least 1");
  if (cfg.opt.tol_abs < 0.0) fail_key("tol_abs", "must be nonnegative");
  if (cfg.opt.tol_rel < 0.0) fail_key("tol_rel", "must be nonnegative");
  if (!(cfg.opt.armijo_c1 > 0.0 && cfg.opt.armijo_c1 < 1.0))
    fail_key("armijo_c1", "must lie in (0, 1)");
  if (!(cfg.opt.tau_init > 0.0)) fail_key("tau_init", "must be positive");
  if (cfg.opt.max_halvings < 1) fail_key("max_halvings", "must be at least 1");
  if (cfg.mode != "projection" && cfg.mode != "penalty")
    fail_key("mode", "must be 'projection' or 'penalty'");
  cfg.opt.penalty_mode = cfg.mode == "penalty";
  if (cfg.opt.penalty_mode) check_schedule(cfg.opt.delta_schedule, "delta_schedule");
  else if (!cfg.opt.delta_schedule.empty())
    fail_key("delta_schedule", "requires mode = penalty");

  if (cfg.initial_kind != "constant" && cfg.initial_kind != "checkerboard" &&
      cfg.initial_kind != "file")
    fail_key("kind", "must be constant, checkerboard or file");
  if (cfg.initial_kind == "checkerboard" && cfg.phases != 2)
    fail_key("kind", "checkerboard needs exactly two phases");
  if (cfg.initial_kind == "file" && cfg.initial_file.empty())
    fail_key("file", "required for kind = file");
  if (cfg.out_dir.empty()) fail_key("out", "must not be empty");

  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

Problem RunConfig::build_problem() const {
  Problem p;
  p.mesh = build_mesh(nx, ny, lx, ly);
  p.dofs = DofMap(p.mesh);
  for (Edge e : dirichlet) p.dofs.constrain_edge(p.mesh, e);

  MaterialModel& mm = p.model;
  mm.solids.clear();
  for (int i = 0; i + 1 < phases; ++i) {
    const double r = rho.size() == 1 ? rho[0] : rho[i];
    mm.solids.push_back(isotropic_material(young, poisson, r));
  }
  mm.alpha_bar = alpha_bar;
  mm.beta_bar = beta_bar;
  // void shape follows the first material, scaled like the two-phase model
  mm.void_shape.mu = alpha_bar * mm.solids.front().mu;
  mm.void_shape.lame = alpha_bar * mm.solids.front().lame;
  mm.void_shape.rho = beta_bar * mm.solids.front().rho;
  mm.k_exp = stiffness_exponent;
  mm.l_exp = density_exponent;
  mm.omega = cutoff_omega;
  mm.epsilon = epsilon_schedule.front();

  p.rho_box = rho_box;
  p.rho_factor = rho_factor;
  p.clamp_rho_box = clamp_rho_box;
  p.scalar_mean = mean;
  if (phases >= 3)
    p.vector_mean = Eigen::Map<const Eigen::VectorXd>(
        vector_mean.data(), static_cast<Eigen::Index>(vector_mean.size()));
  p.traction = traction;
  p.finalize();
  return p;
}

ObjectiveSpec RunConfig::objective() const {
  ObjectiveSpec s;
  s.eigen_indices = eigen_indices;
  s.weights = eigen_weights;
  if (s.weights.empty()) s.weights.assign(s.eigen_indices.size(), -1.0);
  s.gamma = gamma;
  s.compliance_weight = compliance_weight;
  return s;
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  auto num = [](double v) { return format_full(v); };
  auto join = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? "," : "") + num(v[i]);
    return s;
  };

  out << "[mesh]\n"
      << "nx = " << cfg.nx << "\nny = " << cfg.ny << "\nlx = " << num(cfg.lx)
      << "\nly = " << num(cfg.ly) << "\n\n";

  out << "[boundary]\ndirichlet = ";
  for (std::size_t i = 0; i < cfg.dirichlet.size(); ++i)
    out << (i ? "," : "") << edge_name(cfg.dirichlet[i]);
  out << "\n";
  if (cfg.traction) {
    out << "traction_edge = " << edge_name(cfg.traction->edge) << "\n"
        << "traction_from = " << num(cfg.traction->from) << "\n"
        << "traction_to = " << num(cfg.traction->to) << "\n"
        << "traction_gx = " << num(cfg.traction->gx) << "\n"
        << "traction_gy = " << num(cfg.traction->gy) << "\n";
  }
  out << "\n[material]\n"
      << "young = " << num(cfg.young) << "\npoisson = " << num(cfg.poisson)
      << "\nrho = " << join(cfg.rho) << "\nalpha_bar = " << num(cfg.alpha_bar)
      << "\nbeta_bar = " << num(cfg.beta_bar)
      << "\nstiffness_exponent = " << cfg.stiffness_exponent
      << "\ndensity_exponent = " << cfg.density_exponent
      << "\ncutoff_omega = " << num(cfg.cutoff_omega)
      << "\nphases = " << cfg.phases << "\n";

  out << "\n[model]\n";
  if (cfg.epsilon_schedule.size() == 1)
    out << "epsilon = " << num(cfg.epsilon_schedule[0]) << "\n";
  else
    out << "epsilon_schedule = " << join(cfg.epsilon_schedule) << "\n";
  out << "gamma = " << num(cfg.gamma) << "\n";
  if (cfg.phases == 2) out << "mean = " << num(cfg.mean) << "\n";
  else out << "vector_mean = " << join(cfg.vector_mean) << "\n";
  if (cfg.rho_box)
    out << "rho_box = " << num(cfg.rho_box->x0) << "," << num(cfg.rho_box->x1)
        << "," << num(cfg.rho_box->y0) << "," << num(cfg.rho_box->y1) << "\n"
        << "rho_factor = " << num(cfg.rho_factor) << "\n"
        << "clamp_rho_box = " << (cfg.clamp_rho_box ? "true" : "false") << "\n";

  out << "\n[objective]\n";
  if (!cfg.eigen_indices.empty()) {
    out << "eigen_indices = ";
    for (std::size_t i = 0; i < cfg.eigen_indices.size(); ++i)
      out << (i ? "," : "") << cfg.eigen_indices[i];
    out << "\neigen_weights = " << join(cfg.eigen_weights) << "\n";
  }
  if (cfg.compliance_weight != 0.0)
    out << "compliance_weight = " << num(cfg.compliance_weight) << "\n";

  out << "\n[optimizer]\n"
      << "max_iter = " << cfg.opt.max_iter << "\ntol_abs = " << num(cfg.opt.tol_abs)
      << "\ntol_rel = " << num(cfg.opt.tol_rel)
      << "\narmijo_c1 = " << num(cfg.opt.armijo_c1)
      << "\ntau_init = " << num(cfg.opt.tau_init)
      << "\nmax_halvings = " << cfg.opt.max_halvings
      << "\nh1_smoothing = " << (cfg.opt.h1_smoothing ? "true" : "false")
      << "\nmode = " << cfg.mode << "\n";
  if (!cfg.opt.delta_schedule.empty())
    out << "delta_schedule = " << join(cfg.opt.delta_schedule) << "\n";

  out << "\n[initial]\nkind = " << cfg.initial_kind << "\n";
  if (cfg.initial_kind == "file") out << "file = " << cfg.initial_file << "\n";

  out << "\n[run]\nseed = " << cfg.seed << "\nout = " << cfg.out_dir << "\n";
  return out.str();
}

PhaseField initial_field(const RunConfig& cfg, const Problem& prob) {
  PhaseField f;
  if (cfg.initial_kind == "constant") {
    f = prob.constant_field();
  } else if (cfg.initial_kind == "checkerboard") {
    if (!prob.scalar_mode())
      throw ConfigError("checkerboard initial field needs exactly two phases");
    // phi0 = sign(v)|v|^0.3 with v = cos(3 pi x) cos(4 pi y)
    Eigen::VectorXd u(prob.mesh.num_nodes());
    for (int n = 0; n < prob.mesh.num_nodes(); ++n) {
      const double v = std::cos(3.0 * M_PI * prob.mesh.node_x(n)) *
                       std::cos(4.0 * M_PI * prob.mesh.node_y(n));
      u[n] = (v < 0.0 ? -1.0 : 1.0) * std::pow(std::abs(v), 0.3);
    }
    f = PhaseField::scalar(std::move(u));
  } else if (cfg.initial_kind == "file") {
    f = read_field_csv(prob.mesh, cfg.initial_file);
    const int want = prob.scalar_mode() ? 1 : prob.n_phases();
    if (f.values.cols() != want)
      throw ConfigError("initial field file " + cfg.initial_file + " has " +
                        std::to_string(f.values.cols()) + " components, expected " +
                        std::to_string(want));
  } else {
    throw ConfigError("unknown initial field kind '" + cfg.initial_kind + "'");
  }
  return project_admissible(prob, f).field;
}

}  // namespace specopt
