#pragma once

#include <string>

#include "schom/marching_cubes.hpp"

namespace schom {

/// Binary STL export of a triangle soup. Facet normals are recomputed from
/// the (counter-clockwise) vertex order.
void write_stl(const TriMesh& mesh, const std::string& path);

}  // namespace schom
