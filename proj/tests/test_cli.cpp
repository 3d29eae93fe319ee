#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "specopt/cli.hpp"
#include "specopt/config.hpp"
#include "specopt/presets.hpp"

using namespace specopt;
namespace fs = std::filesystem;

namespace {

std::string temp_dir() {
  static int counter = 0;
  const auto p = fs::temp_directory_path() /
                 ("specopt_cli_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// small cantilever that optimizes in well under a second
std::string tiny_config(const std::string& out_dir) {
  return "[mesh]\nnx = 8\nny = 4\nlx = 2.0\nly = 1.0\n"
         "[boundary]\ndirichlet = left\n"
         "[model]\nepsilon = 0.3\ngamma = 1e-3\n"
         "[objective]\neigen_indices = 1\n"
         "[optimizer]\nmax_iter = 8\ntol_rel = 1e-4\n"
         "[initial]\nkind = checkerboard\n"
         "[run]\nseed = 3\nout = " + out_dir + "\n";
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> out;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("run writes the full artifact set") {
  unsetenv("SPECOPT_OUT");
  const std::string dir = temp_dir();
  const std::string cfg = dir + "/run.cfg";
  write_file(cfg, tiny_config(dir + "/out"));

  REQUIRE(run_cli({"run", cfg}) == 0);
  for (const char* name : {"config.txt", "history.csv", "field.csv", "field.vtk"})
    CHECK(fs::exists(dir + "/out/" + name));
  CHECK(!fs::exists(dir + "/out/table.csv"));  // single stage, no summary table

  const auto lines = csv_lines(slurp(dir + "/out/history.csv"));
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0] == "iter,J,lambda_1,glandau,compliance,step,gradnorm");
  CHECK(csv_fields(lines[1])[0] == "0");
  CHECK(csv_fields(lines.back())[0] == std::to_string(lines.size() - 2));

  // the stored configuration is itself loadable
  const RunConfig back = parse_config(slurp(dir + "/out/config.txt"));
  CHECK(back.nx == 8);
  CHECK(back.epsilon_schedule == std::vector<double>{0.3});

  SUBCASE("a two-stage schedule adds the summary table") {
    const std::string dir2 = temp_dir();
    const std::string cfg2 = dir2 + "/run.cfg";
    std::string text = tiny_config(dir2 + "/out");
    text.replace(text.find("epsilon = 0.3"), 13, "epsilon_schedule = 0.3,0.15");
    write_file(cfg2, text);
    REQUIRE(run_cli({"run", cfg2}) == 0);
    const auto table = csv_lines(slurp(dir2 + "/out/table.csv"));
    REQUIRE(table.size() == 3);
    CHECK(table[0] == "epsilon,gamma_E,lambda_1");
    CHECK(csv_fields(table[1])[0] == "0.29999999999999999");
  }
}

TEST_CASE("repeated runs are byte-identical") {
  unsetenv("SPECOPT_OUT");
  const std::string dir = temp_dir();
  write_file(dir + "/a.cfg", tiny_config(dir + "/a"));
  write_file(dir + "/b.cfg", tiny_config(dir + "/b"));
  REQUIRE(run_cli({"run", dir + "/a.cfg"}) == 0);
  REQUIRE(run_cli({"run", dir + "/b.cfg"}) == 0);
  CHECK(slurp(dir + "/a/history.csv") == slurp(dir + "/b/history.csv"));
  CHECK(slurp(dir + "/a/field.csv") == slurp(dir + "/b/field.csv"));
}

TEST_CASE("continue restarts from the stored field") {
  unsetenv("SPECOPT_OUT");
  const std::string dir = temp_dir();
  const std::string cfg = dir + "/run.cfg";
  write_file(cfg, tiny_config(dir + "/first"));
  REQUIRE(run_cli({"run", cfg}) == 0);

  REQUIRE(run_cli({"continue", cfg, "--from", dir + "/first/field.csv", "--out",
                   dir + "/second"}) == 0);
  CHECK(fs::exists(dir + "/second/history.csv"));

  // the continued run starts where the first one stopped: the stored field
  // round-trips bitwise, but re-evaluating it reaches the eigensolve along a
  // different warm-start history, so J agrees only to solver precision
  const auto first = csv_lines(slurp(dir + "/first/history.csv"));
  const auto second = csv_lines(slurp(dir + "/second/history.csv"));
  const double j_first = std::stod(csv_fields(first.back())[1]);
  const double j_second = std::stod(csv_fields(second[1])[1]);
  CHECK(j_second == doctest::Approx(j_first).epsilon(1e-12));
}

TEST_CASE("exit codes distinguish configuration from runtime failures") {
  unsetenv("SPECOPT_OUT");
  const std::string dir = temp_dir();
  write_file(dir + "/bad.cfg", "[mesh]\nnx = 8\nbogus = 1\n");
  CHECK(run_cli({"run", dir + "/bad.cfg"}) == 2);
  CHECK(run_cli({"run", dir + "/absent.cfg"}) == 2);

  write_file(dir + "/ok.cfg", tiny_config(dir + "/out"));
  CHECK(run_cli({"continue", dir + "/ok.cfg", "--from", dir + "/missing.csv"}) == 3);

  CHECK(run_cli({"frobnicate"}) == 2);        // unknown subcommand
  CHECK(run_cli({"run"}) == 2);               // missing required argument
  CHECK(run_cli({"preset", "nope"}) == 2);    // unknown preset name
  CHECK(run_cli({"--help"}) == 0);
}

TEST_CASE("output directory precedence") {
  const std::string base = temp_dir();
  const std::string cfg = base + "/run.cfg";
  write_file(cfg, tiny_config(base + "/configured"));

  setenv("SPECOPT_OUT", (base + "/env").c_str(), 1);
  REQUIRE(run_cli({"run", cfg, "--out", base + "/flag"}) == 0);
  CHECK(fs::exists(base + "/env/history.csv"));
  CHECK(!fs::exists(base + "/flag/history.csv"));
  CHECK(!fs::exists(base + "/configured/history.csv"));

  unsetenv("SPECOPT_OUT");
  REQUIRE(run_cli({"run", cfg, "--out", base + "/flag"}) == 0);
  CHECK(fs::exists(base + "/flag/history.csv"));
  CHECK(!fs::exists(base + "/configured/history.csv"));

  REQUIRE(run_cli({"run", cfg}) == 0);
  CHECK(fs::exists(base + "/configured/history.csv"));
}

TEST_CASE("diagnose reports metrics for a stored field") {
  unsetenv("SPECOPT_OUT");
  const std::string dir = temp_dir();
  const std::string cfg = dir + "/run.cfg";
  write_file(cfg, tiny_config(dir + "/out"));
  REQUIRE(run_cli({"run", cfg}) == 0);

  REQUIRE(run_cli({"diagnose", dir + "/out/field.csv", cfg, "--out",
                   dir + "/diag"}) == 0);
  const std::string report = slurp(dir + "/diag/diagnostics.csv");
  CHECK(report.rfind("metric,value\n", 0) == 0);
  for (const char* metric : {"J,", "lambda_1,", "glandau,", "sigma,", "perimeter,",
                             "gamma_limit_residual,", "equipartition_residual,",
                             "kkt_residual,", "complementarity,"})
    CHECK(report.find(std::string("\n") + metric) != std::string::npos);
}

TEST_CASE("preset configurations match the published setups") {
  CHECK(preset_names() ==
        std::vector<std::string>{"beam_eps", "beam_gamma", "beam_lam12",
                                 "beam_compliance"});
  CHECK(is_preset("beam_eps"));
  CHECK(!is_preset("beam"));

  const RunConfig eps = preset_config("beam_eps");
  CHECK(eps.nx == 160);
  CHECK(eps.ny == 80);
  CHECK(eps.lx == 2.0);
  CHECK(eps.dirichlet == std::vector<Edge>{Edge::left});
  CHECK(eps.gamma == 1e-4);
  CHECK(eps.mean == 0.0);
  CHECK(eps.epsilon_schedule == std::vector<double>{0.08, 0.04, 0.02, 0.01});
  CHECK(eps.eigen_indices == std::vector<int>{1});
  CHECK(eps.eigen_weights == std::vector<double>{-1.0});
  REQUIRE(eps.rho_box.has_value());
  CHECK(eps.rho_box->x0 == 1.9);
  CHECK(eps.rho_box->y0 == 0.45);
  CHECK(eps.rho_factor == 100.0);
  CHECK(eps.clamp_rho_box);
  CHECK(eps.initial_kind == "checkerboard");
  CHECK(!eps.traction.has_value());

  const RunConfig gam = preset_config("beam_gamma");
  CHECK(gam.gamma == 1e-5);
  CHECK(gam.epsilon_schedule == std::vector<double>{0.08, 0.04, 0.02});

  const RunConfig lam = preset_config("beam_lam12");
  CHECK(lam.eigen_indices == std::vector<int>{1, 2});
  CHECK(lam.eigen_weights == std::vector<double>{-1.0, -0.1});
  CHECK(preset_config("beam_lam12", 0.3).eigen_weights ==
        std::vector<double>{-1.0, -0.3});

  const RunConfig comp = preset_config("beam_compliance");
  CHECK(comp.gamma == 1e-3);
  CHECK(comp.compliance_weight == 1.0);
  REQUIRE(comp.traction.has_value());
  CHECK(comp.traction->edge == Edge::right);
  CHECK(comp.traction->from == 0.45);
  CHECK(comp.traction->to == 0.55);
  CHECK(comp.traction->gx == 0.0);
  CHECK(comp.traction->gy == -1.0);
  CHECK(comp.eigen_weights == std::vector<double>{-10.0});
  CHECK(preset_config("beam_compliance", 500).eigen_weights ==
        std::vector<double>{-500.0});

  CHECK_THROWS_AS(preset_config("beam_eps", 1.0), ConfigError);
  CHECK_THROWS_AS(preset_config("unknown"), ConfigError);

  // every preset renders to text the parser accepts unchanged
  for (const auto& name : preset_names()) {
    const RunConfig c = preset_config(name);
    const RunConfig back = parse_config(render_config(c));
    CHECK(back.epsilon_schedule == c.epsilon_schedule);
    CHECK(back.eigen_weights == c.eigen_weights);
    CHECK(back.gamma == c.gamma);
  }
}
