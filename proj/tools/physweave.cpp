#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "physweave/pipeline.hpp"
#include "physweave/preview.hpp"

using namespace physweave;
namespace fs = std::filesystem;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

struct Common {
  std::string scene;
  std::string out;
  std::string config;
  std::uint64_t seed = 0;

  pipeline::ScenePaths paths() const { return {scene, config}; }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("scene", c.scene, "Scene directory")->required();
  cmd->add_option("--out", c.out, "Artifact directory (default <scene>/out)");
  cmd->add_option("--config", c.config, "Scene config replacing <scene>/config.json");
  cmd->add_option("--seed", c.seed, "Random seed");
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physweave: physics-grounded image animation"};
  app.set_version_flag("--version", pipeline::kVersion);
  app.require_subcommand(1);

  Common align_c;
  pipeline::AlignOptions align;
  auto* align_cmd = app.add_subcommand("align", "Estimate the ground plane, normalize the scene and resolve penetrations");
  add_common(align_cmd, align_c);

  Common cam_c;
  pipeline::CamOptOptions cam;
  std::string target, mask;
  std::vector<double> radius;
  auto* cam_cmd = app.add_subcommand("camopt", "Fit the camera pose to the target image and masks");
  add_common(cam_cmd, cam_c);
  cam_cmd->add_option("--target", target, "Target image (default <scene>/target.png)");
  cam_cmd->add_option("--mask", mask, "Mask directory or PNG (default <scene>/masks)");
  cam_cmd->add_option("--search-radius", radius, "Position bounds half-extent x y z (m)")->expected(3);
  cam_cmd->add_option("--samples", cam.config.n_random, "Global search samples")->check(CLI::PositiveNumber);
  cam_cmd->add_option("--objective-size", cam.config.objective_size, "Longest edge of the objective render")
      ->check(CLI::PositiveNumber);

  Common sim_c;
  pipeline::SimulateOptions sim;
  std::string camera_mode = "none", format = "png";
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate, render and export the video frames");
  add_common(sim_cmd, sim_c);
  sim_cmd->add_option("--steps", sim.steps, "Simulated frames (default from config)");
  sim_cmd->add_option("--camera-mode", camera_mode, "none, orbit_xy_cw, orbit_xy_ccw, orbit_yz_cw, orbit_yz_ccw, lateral, descent");
  sim_cmd->add_option("--fps", sim.output_fps, "Output frame rate")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--resolution", sim.resolution, "Longest image edge in pixels")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--format", format, "png or ppm");
  sim_cmd->add_flag("--export-conditions", sim.export_conditions, "Also write depth sidecars and conditions.json");

  pipeline::MetricsOptions met;
  std::string frames_dir, reference, gt_masks, met_out;
  auto* met_cmd = app.add_subcommand("metrics", "Score an exported frame sequence");
  met_cmd->add_option("frames", frames_dir, "Directory of frame_*.png")->required();
  met_cmd->add_option("--reference", reference, "Input image for SSIM and LPIPS");
  met_cmd->add_option("--gt-masks", gt_masks, "Ground-truth mask directory or PNG");
  met_cmd->add_option("--out", met_out, "Report directory (default: the frames directory)");
  met_cmd->add_option("--flow-stride", met.flow_stride, "Pixel stride of the flow field")->check(CLI::PositiveNumber);

  Common pv_c;
  preview::SessionOptions pv;
  preview::ServerOptions server;
  std::string pv_mode = "none", ui_dir;
  auto* pv_cmd = app.add_subcommand("preview", "Serve an interactive live simulation");
  add_common(pv_cmd, pv_c);
  pv_cmd->add_option("--port", server.port, "Listening port (0 picks a free one)")->check(CLI::Range(0, 65535));
  pv_cmd->add_option("--host", server.host, "Listening address");
  pv_cmd->add_option("--resolution", pv.resolution, "Preview resolution")->check(CLI::PositiveNumber);
  pv_cmd->add_option("--fps", server.fps, "Pacing target")->check(CLI::PositiveNumber);
  pv_cmd->add_option("--camera-mode", pv_mode, "Initial camera motion");
  pv_cmd->add_option("--ui-dir", ui_dir, "Static UI bundle served at /scene");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*align_cmd) {
      align.scene = align_c.paths();
      align.out = align_c.out;
      align.seed = align_c.seed;
      const auto r = pipeline::cmd_align(align);
      std::cout << "aligned " << r.meshes.size() << " objects" << (r.single_object ? " (single-object canonical)" : "")
                << ": PR " << r.penetration_rate << ", SVR " << r.support_violation_rate << "\n";
    } else if (*cam_cmd) {
      cam.scene = cam_c.paths();
      cam.out = cam_c.out;
      cam.seed = cam_c.seed;
      if (!target.empty()) cam.target = target;
      if (!mask.empty()) cam.mask = mask;
      if (!radius.empty()) cam.search_radius = Vec3(radius[0], radius[1], radius[2]);
      const auto r = pipeline::cmd_camopt(cam);
      const Vec3 p = r.fit.pose.position;
      std::cout << "camera at (" << p.x() << ", " << p.y() << ", " << p.z() << "), loss " << r.fit.loss
                << ", reprojection " << r.reproj_error_px << " px, IoU " << r.mask_iou << "\n";
    } else if (*sim_cmd) {
      sim.scene = sim_c.paths();
      sim.out = sim_c.out;
      sim.seed = sim_c.seed;
      sim.camera_mode = render::parse_camera_motion(camera_mode);
      sim.format = render::parse_image_format(format);
      const auto r = pipeline::cmd_simulate(sim);
      print_warnings(r.warnings);
      std::cout << "simulated " << r.simulated_frames << " frames, exported " << r.exported_frames << " (every "
                << r.decimation << ")\n";
    } else if (*met_cmd) {
      met.frames_dir = frames_dir;
      met.out = met_out;
      if (!reference.empty()) met.reference = reference;
      if (!gt_masks.empty()) met.gt_masks = gt_masks;
      const auto r = pipeline::cmd_metrics(met);
      std::cout << metrics::to_json(r) << "\n";
    } else if (*pv_cmd) {
      pv.seed = pv_c.seed;
      pv.camera_mode = render::parse_camera_motion(pv_mode);
      server.ui_dir = ui_dir;
      auto session = preview::PreviewSession::from_scene(pv_c.scene, pv_c.config, pv_c.out, pv);
      preview::PreviewServer srv(std::move(session), server);
      srv.start();
      std::cout << "preview on http://" << (server.host == "0.0.0.0" ? "localhost" : server.host) << ":" << srv.port()
                << "/scene" << std::endl;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      srv.stop();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
