#include "specopt/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace specopt {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::runtime_error(path + ": " + msg);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) fail(path, "write failed");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

double parse_num(const std::string& s, const std::string& path, int lineno) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str())
    fail(path, "line " + std::to_string(lineno) + ": not a number: '" + s + "'");
  return v;
}

}  // namespace

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) fail(path, "cannot create directory: " + ec.message());
}

void write_field_csv(const StructuredMesh& mesh, const PhaseField& phi,
                     const std::string& path) {
  if (phi.num_nodes() != mesh.num_nodes())
    fail(path, "field has " + std::to_string(phi.num_nodes()) + " nodes, mesh has " +
                   std::to_string(mesh.num_nodes()));
  auto out = open_out(path);
  const int cols = static_cast<int>(phi.values.cols());
  out << "x,y";
  for (int c = 0; c < cols; ++c) out << ",phi_" << (c + 1);
  out << "\n";
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    out << format_full(mesh.node_x(n)) << "," << format_full(mesh.node_y(n));
    for (int c = 0; c < cols; ++c) out << "," << format_full(phi.values(n, c));
    out << "\n";
  }
  finish(out, path);
}

PhaseField read_field_csv(const StructuredMesh& mesh, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) fail(path, "missing header line");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "x" || header[1] != "y")
    fail(path, "expected header x,y,phi_1,...");
  const int cols = static_cast<int>(header.size()) - 2;

  Eigen::MatrixXd values(mesh.num_nodes(), cols);
  int lineno = 1, row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (row >= mesh.num_nodes())
      fail(path, "more data rows than the " + std::to_string(mesh.num_nodes()) +
                     " mesh nodes");
    const auto items = split_csv(line);
    if (static_cast<int>(items.size()) != cols + 2)
      fail(path, "line " + std::to_string(lineno) + ": expected " +
                     std::to_string(cols + 2) + " columns, got " +
                     std::to_string(items.size()));
    const double x = parse_num(items[0], path, lineno);
    const double y = parse_num(items[1], path, lineno);
    const double tol = 1e-9 * (mesh.lx + mesh.ly);
    if (std::abs(x - mesh.node_x(row)) > tol || std::abs(y - mesh.node_y(row)) > tol)
      fail(path, "line " + std::to_string(lineno) +
                     ": node coordinates do not match the mesh (wrong mesh or order)");
    for (int c = 0; c < cols; ++c)
      values(row, c) = parse_num(items[c + 2], path, lineno);
    ++row;
  }
  if (row != mesh.num_nodes())
    fail(path, "expected " + std::to_string(mesh.num_nodes()) + " data rows, got " +
                   std::to_string(row));

  if (cols == 1) return PhaseField::scalar(values.col(0));
  return PhaseField::vector(std::move(values));
}

void write_field_vtk(const StructuredMesh& mesh, const PhaseField& phi,
                     const std::string& path, const std::vector<VtkExtra>& extras) {
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\n"
      << "specopt nodal field\n"
      << "ASCII\n"
      << "DATASET STRUCTURED_POINTS\n"
      << "DIMENSIONS " << mesh.nx + 1 << " " << mesh.ny + 1 << " 1\n"
      << "ORIGIN 0 0 0\n"
      << "SPACING " << format_full(mesh.hx()) << " " << format_full(mesh.hy())
      << " 1\n"
      << "POINT_DATA " << mesh.num_nodes() << "\n";
  const int cols = static_cast<int>(phi.values.cols());
  for (int c = 0; c < cols; ++c) {
    if (cols == 1) out << "SCALARS phi double 1\n";
    else out << "SCALARS phi_" << (c + 1) << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (int n = 0; n < mesh.num_nodes(); ++n)
      out << format_full(phi.values(n, c)) << "\n";
  }
  for (const auto& extra : extras) {
    if (extra.values.size() != mesh.num_nodes())
      fail(path, "extra field '" + extra.name + "' has wrong size");
    out << "SCALARS " << extra.name << " double 1\nLOOKUP_TABLE default\n";
    for (int n = 0; n < mesh.num_nodes(); ++n)
      out << format_full(extra.values[n]) << "\n";
  }
  finish(out, path);
}

void write_history(const std::vector<HistoryRow>& rows, const std::string& path) {
  auto out = open_out(path);
  const std::size_t n_lambda = rows.empty() ? 0 : rows.front().lambdas.size();
  out << "iter,J";
  for (std::size_t r = 0; r < n_lambda; ++r) out << ",lambda_" << (r + 1);
  out << ",glandau,compliance,step,gradnorm\n";
  for (const auto& row : rows) {
    out << row.iter << "," << format_full(row.J);
    for (std::size_t r = 0; r < n_lambda; ++r)
      out << "," << format_full(r < row.lambdas.size() ? row.lambdas[r] : 0.0);
    out << "," << format_full(row.glandau) << "," << format_full(row.compliance)
        << "," << format_full(row.step) << "," << format_full(row.gradnorm) << "\n";
  }
  finish(out, path);
}

void write_table(const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows,
                 const std::string& path) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < columns.size(); ++c)
    out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      fail(path, "table row has " + std::to_string(row.size()) + " entries, header has " +
                     std::to_string(columns.size()));
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_full(row[c]);
    out << "\n";
  }
  finish(out, path);
}

}  // namespace specopt
