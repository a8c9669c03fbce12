#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "physweave/camera.hpp"
#include "physweave/camopt.hpp"
#include "physweave/metrics.hpp"
#include "physweave/posealign.hpp"
#include "physweave/render.hpp"
#include "physweave/sceneconfig.hpp"
#include "physweave/simcore.hpp"

namespace physweave::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scene directory layout:
///   config.json, meshes/*.obj, background.png, target.png, masks/*.png
struct ScenePaths {
  fs::path root;
  fs::path config_override;  // replaces root/config.json when set

  fs::path config() const;
  fs::path meshes_dir() const { return root / "meshes"; }
  fs::path background() const { return root / "background.png"; }
  fs::path target() const { return root / "target.png"; }
  fs::path masks_dir() const { return root / "masks"; }
  /// Default artifact directory.
  fs::path default_out() const { return root / "out"; }
};

struct SceneInput {
  sceneconfig::SceneConfig config;
  std::vector<TriMesh> meshes;  // one per object, by index
  std::vector<std::string> warnings;
};

/// Mesh for object i: its mesh_ref, else meshes/<name>.obj, else
/// meshes/<index>.obj, all relative to the scene root.
fs::path resolve_mesh_path(const ScenePaths& scene, const sceneconfig::ObjectSpec& object);
SceneInput load_scene_input(const ScenePaths& scene);

/// out/aligned/<index>.obj
fs::path aligned_mesh_path(const fs::path& out, int index);
std::vector<TriMesh> load_aligned_meshes(const fs::path& out, std::size_t count);

std::string camera_to_json(const CameraPose& pose);
CameraPose camera_from_json(const std::string& text);
CameraPose load_camera(const fs::path& path);

/// Union of every masks/*.png (or a single mask file), resampled to w x h.
MaskImage load_gt_mask(const fs::path& masks, int width, int height);

/// background.png (or the config's background_ref) resampled to w x h; a flat
/// grey image with a warning when absent.
RgbImage load_background(const ScenePaths& scene, const sceneconfig::SceneConfig& cfg, int width, int height,
                         std::vector<std::string>* warnings);

// --- Frame rendering -------------------------------------------------------

struct RenderSettings {
  int width = render::kDefaultResolution;
  int height = render::kDefaultResolution;
  double shadow_strength = 0.3;
  RgbImage background;  // already width x height
};

struct RenderedFrame {
  FrameBuffer frame;         // composited
  std::vector<float> depth;  // camera-space z, +inf on background
};

/// Renders object geometry (seg id = index + 2, colour per object) over the
/// ground plane with projected shadows, then composites onto the background.
RenderedFrame render_scene(const std::vector<sim::ObjectGeometry>& geometry, const std::vector<Rgb>& colors,
                           const CameraPose& camera, const RenderSettings& settings);

std::vector<Rgb> object_colors(const sceneconfig::SceneConfig& cfg);
/// World AABB of one object's current geometry (points inflated by radius).
Aabb geometry_bounds(const sim::ObjectGeometry& g);

// --- Commands --------------------------------------------------------------

struct AlignOptions {
  ScenePaths scene;
  fs::path out;
  std::uint64_t seed = 0;
  posealign::RansacParams ransac;
  posealign::PenetrationParams penetration;
};

struct AlignResult {
  std::vector<TriMesh> meshes;
  bool single_object = false;
  int overlapping_pairs_before = 0;
  double penetration_rate = 0.0;  // after alignment
  double support_violation_rate = 0.0;
  std::string report_json;
};

/// Ground estimation, normalization and de-penetration (or the single-object
/// canonical path). Writes out/aligned/*.obj, out/align_report.json and a manifest.
AlignResult cmd_align(const AlignOptions& options);

struct CamOptOptions {
  ScenePaths scene;
  fs::path out;
  std::uint64_t seed = 0;
  std::optional<fs::path> target;  // default scene target.png
  std::optional<fs::path> mask;    // default scene masks/
  Vec3 search_radius = Vec3::Constant(0.5);
  camopt::CamOptConfig config;
};

struct CamOptResult {
  CameraPose init;
  camopt::CoarseToFineResult fit;
  double reproj_error_px = 0.0;  // at the target resolution
  double mask_iou = 0.0;
};

/// camera_init on the aligned meshes, then coarse_to_fine. Writes
/// out/camera.json, out/camopt_trace.csv and a manifest.
CamOptResult cmd_camopt(const CamOptOptions& options);

struct SimulateOptions {
  ScenePaths scene;
  fs::path out;
  std::uint64_t seed = 0;
  int steps = -1;  // config value when negative
  render::CameraMotion camera_mode = render::CameraMotion::none;
  int output_fps = 15;
  int resolution = render::kDefaultResolution;
  render::ImageFormat format = render::ImageFormat::png;
  bool export_conditions = false;
};

struct SimulateResult {
  int simulated_frames = 0;
  int exported_frames = 0;
  int decimation = 1;
  std::vector<std::string> warnings;
};

/// build_sim on the aligned meshes, run_sim, then render, composite and export
/// every decimation-th frame. Writes out/frames/frame_%05d.png with a _seg
/// sidecar, out/frames/physics.jsonl, out/step_log.jsonl and a manifest.
/// Divergence is rethrown as PipelineError naming the frame.
SimulateResult cmd_simulate(const SimulateOptions& options);

struct MetricsOptions {
  fs::path frames_dir;
  std::optional<fs::path> reference;  // input image
  std::optional<fs::path> gt_masks;   // directory or single PNG
  fs::path out;                       // report directory; frames_dir when empty
  int flow_stride = 4;
};

/// Missing references leave the dependent metrics null with a flag. Writes
/// metrics.json and metrics.csv.
metrics::MetricsReport cmd_metrics(const MetricsOptions& options);

/// Frame files in a directory (frame_*.png or .ppm without sidecars), sorted.
std::vector<fs::path> list_frames(const fs::path& dir);

/// SHA-256 of a file's bytes as lowercase hex.
std::string sha256_file(const fs::path& path);

}  // namespace physweave::pipeline
