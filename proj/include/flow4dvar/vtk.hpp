#pragma once

#include <string>

#include "flow4dvar/fem.hpp"

namespace flow4dvar {

// Legacy-ASCII unstructured-grid snapshot with point-data velocity vectors
// and pressure scalars. Output is byte-stable for fixed input.
void export_vtk(const Mesh& mesh, const Vector& u, const Vector& p,
                const std::string& path);

}  // namespace flow4dvar
