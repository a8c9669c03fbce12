#include "physweave/primitives.hpp"

#include <cmath>
#include <numbers>

namespace physweave {

TriMesh make_box(const Vec3& center, const Vec3& size) {
  TriMesh m;
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back(center.x() + ((i & 1) ? h.x() : -h.x()),
                            center.y() + ((i & 2) ? h.y() : -h.y()),
                            center.z() + ((i & 4) ? h.z() : -h.z()));
  }
  // Outward winding; vertex bit layout is (x, y, z) -> (1, 2, 4).
  m.faces = {{0, 2, 3}, {0, 3, 1},   // -z
             {4, 5, 7}, {4, 7, 6},   // +z
             {0, 1, 5}, {0, 5, 4},   // -y
             {2, 6, 7}, {2, 7, 3},   // +y
             {0, 4, 6}, {0, 6, 2},   // -x
             {1, 3, 7}, {1, 7, 5}};  // +x
  return m;
}

TriMesh make_uv_sphere(const Vec3& center, double radius, int rings, int segments) {
  TriMesh m;
  m.vertices.push_back(center + Vec3(0, 0, -radius));
  for (int r = 1; r < rings; ++r) {
    const double theta = std::numbers::pi * r / rings;  // from south pole
    const double z = -std::cos(theta), s = std::sin(theta);
    for (int k = 0; k < segments; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / segments;
      m.vertices.push_back(center + radius * Vec3(s * std::cos(phi), s * std::sin(phi), z));
    }
  }
  m.vertices.push_back(center + Vec3(0, 0, radius));
  const int top = static_cast<int>(m.vertices.size()) - 1;
  const auto ring_vertex = [&](int r, int k) { return 1 + (r - 1) * segments + (k % segments); };
  for (int k = 0; k < segments; ++k) m.faces.push_back({0, ring_vertex(1, k + 1), ring_vertex(1, k)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int k = 0; k < segments; ++k) {
      const int a = ring_vertex(r, k), b = ring_vertex(r, k + 1);
      const int c = ring_vertex(r + 1, k), d = ring_vertex(r + 1, k + 1);
      m.faces.push_back({a, b, d});
      m.faces.push_back({a, d, c});
    }
  }
  for (int k = 0; k < segments; ++k) {
    m.faces.push_back({top, ring_vertex(rings - 1, k), ring_vertex(rings - 1, k + 1)});
  }
  return m;
}

TriMesh make_grid_patch(const Vec3& center, double size_x, double size_y, int nx, int ny) {
  TriMesh m;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.vertices.push_back(center + Vec3(size_x * (static_cast<double>(i) / nx - 0.5),
                                         size_y * (static_cast<double>(j) / ny - 0.5), 0.0));
    }
  }
  const auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

}  // namespace physweave
