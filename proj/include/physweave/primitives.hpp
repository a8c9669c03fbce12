#pragma once

#include "physweave/geom.hpp"

namespace physweave {

// Closed, outward-wound primitive meshes used for fixtures and proxies.

TriMesh make_box(const Vec3& center, const Vec3& size);
TriMesh make_uv_sphere(const Vec3& center, double radius, int rings = 12, int segments = 24);
/// Subdivided rectangle in the plane z = `height`, spanning size.x by size.y.
TriMesh make_grid_patch(const Vec3& center, double size_x, double size_y, int nx, int ny);

}  // namespace physweave
