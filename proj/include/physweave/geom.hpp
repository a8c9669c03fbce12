#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace physweave {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Triangle mesh in meters. object_id follows the segmentation scheme
/// (0 background, 1 ground plane, >= 2 objects).
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  int object_id = 2;

  bool empty() const { return vertices.empty(); }
  /// Throws GeometryError if a face references a missing vertex.
  void validate() const;
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Axis-aligned box stored as center and full side lengths.
struct Aabb {
  Vec3 center = Vec3::Zero();
  Vec3 extent = Vec3::Zero();

  Vec3 min() const { return center - 0.5 * extent; }
  Vec3 max() const { return center + 0.5 * extent; }
  static Aabb from_min_max(const Vec3& lo, const Vec3& hi);
  /// Strict overlap on every axis after inflating both boxes by `padding`.
  bool overlaps(const Aabb& other, double padding = 0.0) const;
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  /// (this * other)(x) == this(other(x))
  RigidTransform operator*(const RigidTransform& other) const;
  RigidTransform inverse() const;
  static RigidTransform translate(const Vec3& t) { return {Mat3::Identity(), t}; }
};

// --- OBJ ingestion ---------------------------------------------------------

/// Parses the `v`/`f` subset of Wavefront OBJ. Polygons are fan-triangulated;
/// normals, texture coordinates and material statements are ignored.
TriMesh parse_obj(std::istream& in, const std::string& source_name = "<stream>");
TriMesh load_obj(const std::filesystem::path& path);
void write_obj(const TriMesh& mesh, const std::filesystem::path& path);

// --- Measures and sampling -------------------------------------------------

double triangle_area(const TriMesh& mesh, std::size_t face);
double surface_area(const TriMesh& mesh);
/// Signed volume via the divergence theorem; positive for outward winding.
double signed_volume(const TriMesh& mesh);
Vec3 vertex_centroid(const TriMesh& mesh);

/// Area-proportional uniform surface samples. Deterministic for a given seed.
PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed = 0);

/// Points of a regular lattice (given spacing) that lie inside a closed mesh,
/// decided by crossing parity along +x.
std::vector<Vec3> sample_volume(const TriMesh& mesh, double spacing);

Aabb aabb(const TriMesh& mesh);
Aabb aabb(std::span<const Vec3> points);
Aabb scene_aabb(std::span<const TriMesh> meshes);

TriMesh apply_transform(const TriMesh& mesh, const RigidTransform& tf);
PointCloud concatenate(std::span<const PointCloud> clouds);
/// Disjoint union; faces are re-indexed, object_id is taken from the first mesh.
TriMesh concatenate(std::span<const TriMesh> meshes);

// --- Rotations -------------------------------------------------------------

Mat3 skew(const Vec3& v);

/// Rotation taking unit vector a onto unit vector b:
///   R = I + [v]x + [v]x^2 (1 - c) / |v|^2,  v = a x b,  c = a . b
/// Anti-parallel inputs rotate by pi about a deterministic axis orthogonal to a.
Mat3 rodrigues_between(const Vec3& a, const Vec3& b);

/// Rotation angle of an orthonormal matrix, in [0, pi].
double rotation_angle(const Mat3& r);
bool is_rotation(const Mat3& r, double tol = 1e-9);

}  // namespace physweave
