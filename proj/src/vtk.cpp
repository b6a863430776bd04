#include "flow4dvar/vtk.hpp"

#include <cstdio>
#include <fstream>

#include "flow4dvar/errors.hpp"

namespace flow4dvar {

void export_vtk(const Mesh& mesh, const Vector& u, const Vector& p,
                const std::string& path) {
  if (u.size() != 2 * mesh.num_vertices() || p.size() != mesh.num_vertices())
    throw ContractError("vtk export: field sizes do not match the mesh");
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  char buf[160];

  out << "# vtk DataFile Version 4.2\n";
  out << "flow4dvar snapshot\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Vec2& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g 0\n", v.x, v.y);
    out << buf;
  }
  out << "CELLS " << mesh.num_cells() << " " << 4 * mesh.num_cells() << "\n";
  for (const auto& t : mesh.cells)
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << mesh.num_cells() << "\n";
  for (int c = 0; c < mesh.num_cells(); ++c) out << "5\n";
  out << "POINT_DATA " << mesh.num_vertices() << "\n";
  out << "VECTORS velocity double\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g 0\n", u[2 * v], u[2 * v + 1]);
    out << buf;
  }
  out << "SCALARS pressure double 1\n";
  out << "LOOKUP_TABLE default\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", p[v]);
    out << buf;
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

}  // namespace flow4dvar
