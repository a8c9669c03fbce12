#include "physweave/render.hpp"

#include <Eigen/Geometry>
#include <array>
#include <cstdio>

namespace physweave::render {

FrameBuffer composite_frame(const FrameBuffer& render, const RgbImage& background, double shadow_strength) {
  if (render.width() != background.width || render.height() != background.height) {
    throw ImageError("composite_frame: render is " + std::to_string(render.width()) + "x" +
                     std::to_string(render.height()) + " but background is " +
                     std::to_string(background.width) + "x" + std::to_string(background.height));
  }
  if (!(shadow_strength >= 0.0 && shadow_strength <= 1.0)) {
    throw ImageError("composite_frame: shadow strength must be in [0, 1]");
  }
  FrameBuffer out = render;
  const float keep = static_cast<float>(1.0 - shadow_strength);
  const std::size_t n = render.rgb.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t id = render.seg[i];
    if (id >= 2) continue;
    float scale = 1.f;
    if (id == 1 && render.rgb.brightness(i) < kShadowBrightness) scale = keep;
    for (int c = 0; c < 3; ++c) out.rgb.data[3 * i + c] = background.data[3 * i + c] * scale;
  }
  return out;
}

namespace {

constexpr std::array<std::pair<CameraMotion, std::string_view>, 7> kMotionNames{{
    {CameraMotion::none, "none"},
    {CameraMotion::orbit_xy_cw, "orbit_xy_cw"},
    {CameraMotion::orbit_xy_ccw, "orbit_xy_ccw"},
    {CameraMotion::orbit_yz_cw, "orbit_yz_cw"},
    {CameraMotion::orbit_yz_ccw, "orbit_yz_ccw"},
    {CameraMotion::lateral, "lateral"},
    {CameraMotion::descent, "descent"},
}};

}  // namespace

CameraMotion parse_camera_motion(std::string_view name) {
  for (const auto& [mode, text] : kMotionNames) {
    if (text == name) return mode;
  }
  throw ImageError("unknown camera motion mode '" + std::string(name) + "'");
}

std::string_view to_string(CameraMotion mode) {
  for (const auto& [m, text] : kMotionNames) {
    if (m == mode) return text;
  }
  return "none";
}

CameraPose camera_motion_pose(CameraMotion mode, int frame, const CameraPose& base, const MotionSpeeds& speeds) {
  if (frame < 0) throw ImageError("camera_motion_pose: negative frame index");
  CameraPose pose = base;
  const double angle = speeds.angular * frame;
  const double dist = speeds.linear * frame;
  const auto orbit = [&](const Vec3& axis, double a) {
    const Mat3 r = Eigen::AngleAxisd(a, axis).toRotationMatrix();
    pose.position = base.look_at + r * (base.position - base.look_at);
  };
  switch (mode) {
    case CameraMotion::none: break;
    case CameraMotion::orbit_xy_ccw: orbit(Vec3::UnitZ(), angle); break;
    case CameraMotion::orbit_xy_cw: orbit(Vec3::UnitZ(), -angle); break;
    case CameraMotion::orbit_yz_ccw: orbit(Vec3::UnitX(), angle); break;
    case CameraMotion::orbit_yz_cw: orbit(Vec3::UnitX(), -angle); break;
    case CameraMotion::lateral: pose.position += dist * camera_frame(base).right; break;
    case CameraMotion::descent: pose.position.z() -= dist; break;
  }
  return pose;
}

ImageFormat parse_image_format(std::string_view name) {
  if (name == "png") return ImageFormat::png;
  if (name == "ppm") return ImageFormat::ppm;
  throw ImageError("unknown image format '" + std::string(name) + "'");
}

void export_frame(const FrameBuffer& frame, const std::filesystem::path& path, ImageFormat format, bool write_seg) {
  if (format == ImageFormat::png) {
    write_png(frame.rgb, path);
  } else {
    write_ppm(frame.rgb, path);
  }
  if (write_seg) {
    std::vector<std::uint8_t> gray(frame.seg.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
      gray[i] = static_cast<std::uint8_t>(std::clamp(frame.seg[i], 0, 255));
    }
    std::filesystem::path side = path;
    side.replace_filename(path.stem().string() + "_seg.png");
    write_png_gray(frame.width(), frame.height(), gray, side);
  }
}

std::filesystem::path frame_path(const std::filesystem::path& dir, int index, std::string_view extension) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%05d.", index);
  return dir / (std::string(name) + std::string(extension));
}

}  // namespace physweave::render
