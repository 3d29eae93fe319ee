#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "specopt/materials.hpp"
#include "specopt/mesh.hpp"
#include "specopt/optimizer.hpp"

namespace specopt {

// Nodal field as CSV `x,y,phi_1[,phi_2,...]`, one row per node in node-id
// order, 17 significant digits so a read reproduces the doubles bitwise.
// CSV is the normative field format; the VTK file below is viewer output.
void write_field_csv(const StructuredMesh& mesh, const PhaseField& phi,
                     const std::string& path);
PhaseField read_field_csv(const StructuredMesh& mesh, const std::string& path);

// Legacy ASCII structured-points volume file with the phase components as
// point data and optional extra nodal scalars (eigenmode magnitude, strain
// energy density).
struct VtkExtra {
  std::string name;
  Eigen::VectorXd values;  // one entry per node
};
void write_field_vtk(const StructuredMesh& mesh, const PhaseField& phi,
                     const std::string& path,
                     const std::vector<VtkExtra>& extras = {});

// History CSV with the exact header
//   iter,J,lambda_1,...,glandau,compliance,step,gradnorm
// (one lambda column per selected eigenvalue index).
void write_history(const std::vector<HistoryRow>& rows, const std::string& path);

// Small numeric table: named columns, one CSV row per entry.
void write_table(const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows,
                 const std::string& path);

// Shared full-precision formatting (17 significant digits round-trips any
// double through decimal).
std::string format_full(double v);

// Creates the directory (and parents) if needed; throws on failure.
void ensure_directory(const std::string& path);

}  // namespace specopt
