#pragma once

#include <string>

#include "gc/mesh.hpp"

namespace gc {

// Read-only Wavefront OBJ import: positions and faces only, polygons
// triangulated as fans. Normals/texcoords/materials are ignored.
TriMesh load_obj(const std::string& path);

}  // namespace gc
