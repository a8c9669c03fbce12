#include "physweave/geom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "physweave/random.hpp"

namespace physweave {

double CounterRng::normal() {
  // Box-Muller; u1 is kept away from zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void TriMesh::validate() const {
  const auto n = static_cast<int>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int idx : faces[f]) {
      if (idx < 0 || idx >= n) {
        throw GeometryError("face " + std::to_string(f) + " references vertex " +
                            std::to_string(idx) + " but mesh has " + std::to_string(n) +
                            " vertices");
      }
    }
  }
}

Aabb Aabb::from_min_max(const Vec3& lo, const Vec3& hi) {
  return {0.5 * (lo + hi), hi - lo};
}

bool Aabb::overlaps(const Aabb& other, double padding) const {
  for (int a = 0; a < 3; ++a) {
    const double reach = 0.5 * (extent[a] + other.extent[a]) + padding;
    if (std::abs(center[a] - other.center[a]) >= reach) return false;
  }
  return true;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

// --- OBJ -------------------------------------------------------------------

namespace {

// Resolves a face token ("7", "7/1", "7//3", "-1") to a 0-based index.
int parse_face_index(const std::string& token, int vertex_count, const std::string& where) {
  const std::string head = token.substr(0, token.find('/'));
  std::size_t consumed = 0;
  long value = 0;
  try {
    value = std::stol(head, &consumed);
  } catch (const std::exception&) {
    throw GeometryError(where + ": malformed face index '" + token + "'");
  }
  if (consumed != head.size() || value == 0) {
    throw GeometryError(where + ": malformed face index '" + token + "'");
  }
  const long resolved = value > 0 ? value - 1 : vertex_count + value;
  if (resolved < 0 || resolved >= vertex_count) {
    throw GeometryError(where + ": malformed face, index " + std::to_string(value) +
                        " out of range for " + std::to_string(vertex_count) + " vertices");
  }
  return static_cast<int>(resolved);
}

}  // namespace

TriMesh parse_obj(std::istream& in, const std::string& source_name) {
  TriMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()) || !p.allFinite()) {
        throw GeometryError(where + ": malformed vertex line");
      }
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        poly.push_back(parse_face_index(tok, static_cast<int>(mesh.vertices.size()), where));
      }
      if (poly.size() < 3) throw GeometryError(where + ": malformed face, fewer than 3 indices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  if (mesh.faces.empty()) throw GeometryError(source_name + ": empty geometry (no faces)");
  return mesh;
}

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open OBJ file: " + path.string());
  return parse_obj(in, path.string());
}

void write_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write OBJ file: " + path.string());
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw GeometryError("failed writing OBJ file: " + path.string());
}

// --- Measures --------------------------------------------------------------

double triangle_area(const TriMesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  return 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
}

double surface_area(const TriMesh& mesh) {
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) total += triangle_area(mesh, f);
  return total;
}

double signed_volume(const TriMesh& mesh) {
  double vol = 0.0;
  for (const auto& f : mesh.faces) {
    vol += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
  }
  return vol / 6.0;
}

Vec3 vertex_centroid(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw GeometryError("centroid of empty mesh");
  Vec3 sum = Vec3::Zero();
  for (const auto& v : mesh.vertices) sum += v;
  return sum / static_cast<double>(mesh.vertices.size());
}

PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw GeometryError("sample_surface: n must be >= 1");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += triangle_area(mesh, f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw GeometryError("sample_surface: mesh has zero surface area");

  CounterRng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    const std::size_t f = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    // Square-root warp gives uniform barycentric coordinates.
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const auto& tri = mesh.faces[f];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    cloud.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
  }
  return cloud;
}

std::vector<Vec3> sample_volume(const TriMesh& mesh, double spacing) {
  if (!(spacing > 0.0)) throw GeometryError("sample_volume: spacing must be positive");
  const Aabb box = aabb(mesh);
  const Vec3 lo = box.min();
  const Vec3 hi = box.max();
  const auto cells = [&](int a) {
    return static_cast<int>(std::floor((hi[a] - lo[a]) / spacing));
  };
  const int nx = cells(0), ny = cells(1), nz = cells(2);
  // Lattice is centered inside the box so symmetric shapes sample symmetrically.
  const Vec3 origin = lo + 0.5 * Vec3((hi[0] - lo[0]) - nx * spacing,
                                      (hi[1] - lo[1]) - ny * spacing,
                                      (hi[2] - lo[2]) - nz * spacing);
  std::vector<Vec3> out;
  std::vector<double> hits;
  for (int k = 0; k <= nz; ++k) {
    const double z = origin.z() + k * spacing;
    // The crossing ray is nudged off the lattice so it never grazes a shared edge.
    const double rz = z + 1.3e-7 * spacing;
    for (int j = 0; j <= ny; ++j) {
      const double y = origin.y() + j * spacing;
      const double ry = y + 0.7e-7 * spacing;
      hits.clear();
      for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        // 2D barycentric test of (y, z) against the triangle projected on the yz plane.
        const double d = (b.y() - a.y()) * (c.z() - a.z()) - (c.y() - a.y()) * (b.z() - a.z());
        if (std::abs(d) < 1e-15) continue;
        const double u = ((ry - a.y()) * (c.z() - a.z()) - (c.y() - a.y()) * (rz - a.z())) / d;
        const double v = ((b.y() - a.y()) * (rz - a.z()) - (ry - a.y()) * (b.z() - a.z())) / d;
        if (u < 0.0 || v < 0.0 || u + v > 1.0) continue;
        hits.push_back(a.x() + u * (b.x() - a.x()) + v * (c.x() - a.x()));
      }
      if (hits.size() < 2) continue;
      std::sort(hits.begin(), hits.end());
      for (int i = 0; i <= nx; ++i) {
        const double x = origin.x() + i * spacing;
        const auto crossings = std::lower_bound(hits.begin(), hits.end(), x) - hits.begin();
        if (crossings % 2 == 1) out.emplace_back(x, y, z);
      }
    }
  }
  return out;
}

Aabb aabb(std::span<const Vec3> points) {
  if (points.empty()) throw GeometryError("aabb of empty point set");
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return Aabb::from_min_max(lo, hi);
}

Aabb aabb(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw GeometryError("aabb of empty mesh");
  return aabb(std::span<const Vec3>(mesh.vertices));
}

Aabb scene_aabb(std::span<const TriMesh> meshes) {
  if (meshes.empty()) throw GeometryError("aabb of empty scene");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& m : meshes) {
    const Aabb b = aabb(m);
    lo = lo.cwiseMin(b.min());
    hi = hi.cwiseMax(b.max());
  }
  return Aabb::from_min_max(lo, hi);
}

TriMesh apply_transform(const TriMesh& mesh, const RigidTransform& tf) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = tf.apply(v);
  return out;
}

PointCloud concatenate(std::span<const PointCloud> clouds) {
  PointCloud out;
  for (const auto& c : clouds) out.points.insert(out.points.end(), c.points.begin(), c.points.end());
  return out;
}

TriMesh concatenate(std::span<const TriMesh> meshes) {
  TriMesh out;
  for (const auto& m : meshes) {
    const int base = static_cast<int>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
    for (const auto& f : m.faces) out.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
  if (!meshes.empty()) out.object_id = meshes.front().object_id;
  return out;
}

// --- Rotations -------------------------------------------------------------

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Mat3 rodrigues_between(const Vec3& a_in, const Vec3& b_in) {
  if (std::abs(a_in.norm() - 1.0) > 1e-6 || std::abs(b_in.norm() - 1.0) > 1e-6) {
    throw GeometryError("rodrigues_between: inputs must be unit vectors");
  }
  const Vec3 a = a_in.normalized();
  const Vec3 b = b_in.normalized();
  const double c = a.dot(b);
  if (c <= -1.0 + 1e-9) {
    // Half-turn about the coordinate axis least aligned with a, made orthogonal.
    Eigen::Index k = 0;
    a.cwiseAbs().minCoeff(&k);
    const Vec3 axis = (Vec3::Unit(k) - a[k] * a).normalized();
    return 2.0 * axis * axis.transpose() - Mat3::Identity();
  }
  const Vec3 v = a.cross(b);
  const double s2 = v.squaredNorm();
  if (s2 < 1e-30) return Mat3::Identity();
  const Mat3 vx = skew(v);
  return Mat3::Identity() + vx + vx * vx * ((1.0 - c) / s2);
}

double rotation_angle(const Mat3& r) {
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  return std::acos(cos_theta);
}

bool is_rotation(const Mat3& r, double tol) {
  return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace physweave
