#pragma once

#include <span>
#include <vector>

#include "physweave/camera.hpp"
#include "physweave/geom.hpp"
#include "physweave/image.hpp"

namespace physweave::camopt {

struct RenderMesh {
  TriMesh mesh;
  std::int32_t seg_id = 2;
  Rgb color = {0.75f, 0.55f, 0.35f};
};

/// Particles drawn as screen-space discs of world radius `radius`.
struct RenderParticles {
  std::vector<Vec3> points;
  double radius = 0.01;
  std::int32_t seg_id = 2;
  Rgb color = {0.4f, 0.6f, 0.85f};
};

struct RenderOptions {
  Rgb background = {0.f, 0.f, 0.f};
  bool ground_plane = false;
  double ground_half_extent = 25.0;  // the plane z = 0 covers |x|, |y| <= this
  Rgb ground_color = {0.8f, 0.8f, 0.8f};
  /// Direction the light travels; must point downwards.
  Vec3 light_direction = Vec3(0.35, 0.25, -1.0).normalized();
  float ambient = 0.35f;
  bool shadows = true;
  float shadow_shade = 0.2f;  // ground brightness factor inside shadows
};

struct RasterResult {
  FrameBuffer frame;
  MaskImage mask;           // seg >= 2
  std::vector<float> depth;  // camera-space z per pixel, +inf where nothing was drawn
};

/// Perspective, z-buffered, flat-shaded rendering with one sample per pixel.
/// Faces are two-sided. With a ground plane enabled, objects cast planar
/// projected shadows onto it.
RasterResult rasterize(std::span<const RenderMesh> meshes, std::span<const RenderParticles> particles,
                       const CameraPose& camera, int width, int height, const RenderOptions& options = {});

/// Meshes only, ids 2, 3, ... by position in the list.
RasterResult rasterize(std::span<const TriMesh> meshes, const CameraPose& camera, int width, int height,
                       const RenderOptions& options = {});

/// Distinct, deterministic colour for an object index.
Rgb palette_color(std::size_t index);

}  // namespace physweave::camopt
