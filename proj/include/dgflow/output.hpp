#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dgflow/dg_space.hpp"
#include "dgflow/linalg.hpp"
#include "dgflow/transport.hpp"

namespace dgflow {

/// `step,time,l2_norm,min_c,max_c,mass_integral`, 17 significant digits.
void write_step_csv(std::ostream& out, std::span<const StateSummary> records);

struct VtkField {
  std::string name;
  std::span<const double> coeffs;
};

/// Legacy ASCII unstructured grid (lines in 1D, triangles in 2D, z = 0).
/// Degree 0 fields go out as CELL_DATA. Otherwise every element gets its own
/// copy of its vertices and the field is sampled there as POINT_DATA.
/// All fields must live on `space`.
void write_vtk(std::ostream& out, const DgSpace& space, std::span<const VtkField> fields,
               const std::string& title = "dgflow");
void write_vtk(std::ostream& out, const DgSpace& space, std::span<const double> coeffs, const std::string& name,
               const std::string& title = "dgflow");

/// `row col value` triplets (0-based) of a sparse matrix.
void write_matrix_dump(std::ostream& out, const SparseMatrix& matrix);

/// Opens path for writing; throws Error naming the path on failure.
void write_file(const std::string& path, const std::function<void(std::ostream&)>& body);

}  // namespace dgflow
