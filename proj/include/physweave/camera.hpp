#pragma once

#include <optional>

#include "physweave/geom.hpp"

namespace physweave {

/// Look-at pinhole camera. fov_deg is the vertical field of view.
struct CameraPose {
  Vec3 position = Vec3(0.0, -3.0, 1.0);
  Vec3 look_at = Vec3::Zero();
  double fov_deg = 45.0;
  Vec3 up = Vec3::UnitZ();

  /// Throws GeometryError when position == look_at or fov is out of (1, 179).
  void validate() const;
};

/// Orthonormal camera basis: right, true-up and forward (viewing direction).
struct CameraFrame {
  Vec3 right;
  Vec3 up;
  Vec3 forward;
};

CameraFrame camera_frame(const CameraPose& cam);

/// Pixel-space projection for an image of the given size. Pixel (0,0) is the
/// top-left pixel whose center sits at (0.5, 0.5).
struct Projector {
  Projector(const CameraPose& cam, int width, int height);

  /// Camera-space coordinates: x right, y up, z along the viewing direction.
  Vec3 to_camera(const Vec3& world) const;
  /// Projects a camera-space point with z > 0 to continuous pixel coordinates.
  Eigen::Vector2d camera_to_pixel(const Vec3& cam) const;
  std::optional<Eigen::Vector2d> project(const Vec3& world) const;
  /// World-space direction of the ray through continuous pixel (px, py).
  Vec3 ray_direction(double px, double py) const;

  CameraFrame frame;
  Vec3 eye;
  double focal_px;  // focal length in pixels
  double cx, cy;
  int width, height;
};

}  // namespace physweave
