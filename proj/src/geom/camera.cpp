#include "physweave/camera.hpp"

#include <cmath>
#include <numbers>

namespace physweave {

void CameraPose::validate() const {
  if (!position.allFinite() || !look_at.allFinite()) throw GeometryError("camera: non-finite pose");
  if ((position - look_at).norm() < 1e-12) throw GeometryError("camera: position equals look_at");
  if (!(fov_deg > 1.0 && fov_deg < 179.0)) throw GeometryError("camera: fov must be in (1, 179) degrees");
}

CameraFrame camera_frame(const CameraPose& cam) {
  CameraFrame f;
  f.forward = (cam.look_at - cam.position).normalized();
  Vec3 up_hint = cam.up.normalized();
  if (std::abs(f.forward.dot(up_hint)) > 1.0 - 1e-9) {
    // Looking straight along the up hint; pick a stable substitute.
    up_hint = std::abs(f.forward.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
  }
  f.right = f.forward.cross(up_hint).normalized();
  f.up = f.right.cross(f.forward);
  return f;
}

Projector::Projector(const CameraPose& cam, int w, int h)
    : frame(camera_frame(cam)), eye(cam.position), width(w), height(h) {
  const double half = 0.5 * cam.fov_deg * std::numbers::pi / 180.0;
  focal_px = 0.5 * h / std::tan(half);
  cx = 0.5 * w;
  cy = 0.5 * h;
}

Vec3 Projector::to_camera(const Vec3& world) const {
  const Vec3 d = world - eye;
  return {d.dot(frame.right), d.dot(frame.up), d.dot(frame.forward)};
}

Eigen::Vector2d Projector::camera_to_pixel(const Vec3& c) const {
  return {cx + focal_px * c.x() / c.z(), cy - focal_px * c.y() / c.z()};
}

std::optional<Eigen::Vector2d> Projector::project(const Vec3& world) const {
  const Vec3 c = to_camera(world);
  if (c.z() <= 1e-9) return std::nullopt;
  return camera_to_pixel(c);
}

Vec3 Projector::ray_direction(double px, double py) const {
  const double x = (px - cx) / focal_px;
  const double y = (cy - py) / focal_px;
  return (frame.forward + x * frame.right + y * frame.up).normalized();
}

}  // namespace physweave
