#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "physweave/camera.hpp"
#include "physweave/image.hpp"

namespace physweave::render {

constexpr int kDefaultResolution = 880;
constexpr double kShadowBrightness = 0.3;

/// Object pixels (seg >= 2) come from the render, everything else from the
/// background; ground pixels whose render brightness is below 0.3 are darkened
/// by `shadow_strength`.
FrameBuffer composite_frame(const FrameBuffer& render, const RgbImage& background,
                            double shadow_strength = 0.3);

enum class CameraMotion { none, orbit_xy_cw, orbit_xy_ccw, orbit_yz_cw, orbit_yz_ccw, lateral, descent };

CameraMotion parse_camera_motion(std::string_view name);
std::string_view to_string(CameraMotion mode);

struct MotionSpeeds {
  double angular = 0.001;  // rad per frame
  double linear = 0.002;   // m per frame, lateral and descent
};

/// Pose at `frame` for a camera that starts at `base`. Orbits turn about the
/// look-at point (xy: about +z, yz: about +x; ccw is the positive sense).
CameraPose camera_motion_pose(CameraMotion mode, int frame, const CameraPose& base,
                              const MotionSpeeds& speeds = {});

enum class ImageFormat { png, ppm };

ImageFormat parse_image_format(std::string_view name);

/// Writes the 8-bit RGB image; with `write_seg` also `<stem>_seg.png`, a
/// grayscale image holding min(seg, 255).
void export_frame(const FrameBuffer& frame, const std::filesystem::path& path,
                  ImageFormat format = ImageFormat::png, bool write_seg = false);

/// dir / "frame_%05d.png"
std::filesystem::path frame_path(const std::filesystem::path& dir, int index,
                                 std::string_view extension = "png");

}  // namespace physweave::render
