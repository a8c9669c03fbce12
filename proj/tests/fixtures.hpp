#pragma once

// Synthetic scenes shared by the unit tests and the acceptance suite.

#include <cmath>
#include <numbers>
#include <vector>

#include "physweave/geom.hpp"
#include "physweave/primitives.hpp"
#include "physweave/random.hpp"

namespace physweave::fixtures {

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

/// Points on z = 0 with Gaussian noise plus uniform outliers in a box above it.
inline PointCloud noisy_ground_cloud(std::size_t inliers, std::size_t outliers, double sigma,
                                     std::uint64_t seed) {
  CounterRng rng(seed);
  PointCloud cloud;
  for (std::size_t i = 0; i < inliers; ++i) {
    cloud.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), sigma * rng.normal());
  }
  for (std::size_t i = 0; i < outliers; ++i) {
    cloud.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 1.0));
  }
  return cloud;
}

inline TriMesh vertical_panel(double x0, double x1, double y, double height) {
  TriMesh m;
  m.vertices = {Vec3(x0, y, 0), Vec3(x1, y, 0), Vec3(x1, y, height), Vec3(x0, y, height)};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

/// A ground patch and a wall built from five coplanar panels, so the wall
/// carries five times the ground's share of surface samples.
inline std::vector<TriMesh> wall_scene(bool with_ground = true) {
  std::vector<TriMesh> meshes;
  if (with_ground) meshes.push_back(make_grid_patch(Vec3::Zero(), 4.0, 4.0, 20, 20));
  for (int k = 0; k < 5; ++k) meshes.push_back(vertical_panel(-2.0 + 0.8 * k, -1.2 + 0.8 * k, 1.5, 2.0));
  return meshes;
}

inline std::vector<TriMesh> transformed(const std::vector<TriMesh>& meshes, const RigidTransform& tf) {
  std::vector<TriMesh> out;
  for (const auto& m : meshes) out.push_back(apply_transform(m, tf));
  return out;
}

}  // namespace physweave::fixtures
