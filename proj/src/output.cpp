#include "dgflow/output.hpp"

#include <fstream>
#include <ostream>

#include "dgflow/error.hpp"

namespace dgflow {

void write_step_csv(std::ostream& out, std::span<const StateSummary> records) {
  const auto old = out.precision(17);
  out << "step,time,l2_norm,min_c,max_c,mass_integral\n";
  for (const auto& r : records) {
    out << r.step << ',' << r.time << ',' << r.l2_norm << ',' << r.min_c << ',' << r.max_c << ',' << r.mass_integral
        << '\n';
  }
  out.precision(old);
}

void write_vtk(std::ostream& out, const DgSpace& space, std::span<const VtkField> fields, const std::string& title) {
  const Mesh& mesh = space.mesh();
  const std::size_t nv = mesh.vertices_per_element();
  const std::size_t ne = mesh.num_elements();
  for (const auto& f : fields) {
    if (f.coeffs.size() != space.size()) throw InvalidArgument("VTK field '" + f.name + "' does not match the space");
  }
  const bool cells = space.degree() == 0;
  const auto old = out.precision(17);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";

  const std::size_t npoints = cells ? mesh.num_vertices() : ne * nv;
  out << "POINTS " << npoints << " double\n";
  if (cells) {
    for (const auto& v : mesh.vertices()) out << v.x << ' ' << v.y << " 0\n";
  } else {
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t v : mesh.element_vertices(e)) out << mesh.vertex(v).x << ' ' << mesh.vertex(v).y << " 0\n";
    }
  }

  out << "CELLS " << ne << ' ' << ne * (nv + 1) << '\n';
  for (std::size_t e = 0; e < ne; ++e) {
    out << nv;
    const auto verts = mesh.element_vertices(e);
    for (std::size_t i = 0; i < nv; ++i) out << ' ' << (cells ? verts[i] : e * nv + i);
    out << '\n';
  }
  out << "CELL_TYPES " << ne << '\n';
  const int type = mesh.dimension() == 1 ? 3 : 5;  // VTK_LINE, VTK_TRIANGLE
  for (std::size_t e = 0; e < ne; ++e) out << type << '\n';

  if (fields.empty()) {
    out.precision(old);
    return;
  }
  if (cells) {
    out << "CELL_DATA " << ne << '\n';
    for (const auto& f : fields) {
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (std::size_t e = 0; e < ne; ++e) out << space.cell_mean(f.coeffs, e) << '\n';
    }
  } else {
    out << "POINT_DATA " << npoints << '\n';
    for (const auto& f : fields) {
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t v : mesh.element_vertices(e)) {
          const Vec2 ref = space.map(e).to_reference(mesh.vertex(v));
          out << space.value<double>(f.coeffs, e, ref) << '\n';
        }
      }
    }
  }
  out.precision(old);
}

void write_vtk(std::ostream& out, const DgSpace& space, std::span<const double> coeffs, const std::string& name,
               const std::string& title) {
  const VtkField f{name, coeffs};
  write_vtk(out, space, std::span<const VtkField>(&f, 1), title);
}

void write_matrix_dump(std::ostream& out, const SparseMatrix& matrix) { write_coordinate(out, matrix); }

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  body(out);
  out.flush();
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace dgflow
