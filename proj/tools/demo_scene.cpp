// Writes a small self-consistent scene directory: tilted meshes, config,
// background, and a target image plus masks rendered from a known camera.

#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "physweave/pipeline.hpp"
#include "physweave/primitives.hpp"

using namespace physweave;
namespace fs = std::filesystem;
using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"Write a demo scene for physweave"};
  std::string dir;
  int width = 480, height = 360;
  app.add_option("dir", dir, "Scene directory to create")->required();
  app.add_option("--width", width, "Target image width")->check(CLI::PositiveNumber);
  app.add_option("--height", height, "Target image height")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root = dir;
    fs::create_directories(root / "meshes");
    fs::create_directories(root / "masks");

    const json objects = json::array({
        {{"name", "crate"}, {"material_type", "rigid"}, {"surface_color", {0.72, 0.52, 0.30}}},
        {{"name", "ball"}, {"material_type", "rigid"}, {"surface_color", {0.85, 0.20, 0.20}}},
        {{"name", "jelly"}, {"material_type", "mpm_elastic"}, {"surface_color", {0.25, 0.70, 0.35}}},
    });
    const json forces = json::array({
        {{"type", "constant"}},
        {{"type", "wind"}, {"direction", {1.0, 0.0, 0.0}}, {"strength", 2.0}, {"start_frame", 30}},
    });
    std::ofstream(root / "config.json") << json{{"objects", objects}, {"forces", forces}}.dump(2) << "\n";

    // Resting on z = 0, then tilted and lifted the way a reconstruction would
    // hand them over.
    std::vector<TriMesh> meshes = {make_box(Vec3(-0.35, 0.05, 0.15), Vec3(0.3, 0.3, 0.3)),
                                   make_uv_sphere(Vec3(0.05, -0.1, 0.12), 0.12),
                                   make_box(Vec3(0.4, 0.1, 0.1), Vec3(0.2, 0.2, 0.2))};
    const RigidTransform tilt{Eigen::AngleAxisd(0.12, Vec3(1, 0.3, 0).normalized()).toRotationMatrix(),
                              Vec3(0.2, -0.1, 0.4)};
    for (std::size_t i = 0; i < meshes.size(); ++i) {
      write_obj(apply_transform(meshes[i], tilt), root / "meshes" / (objects[i]["name"].get<std::string>() + ".obj"));
    }

    RgbImage bg(width, height);
    for (int y = 0; y < height; ++y) {
      const float t = static_cast<float>(y) / static_cast<float>(height - 1);
      for (int x = 0; x < width; ++x) {
        float* p = bg.px(x, y);
        p[0] = 0.55f + 0.3f * t;
        p[1] = 0.65f + 0.2f * t;
        p[2] = 0.85f - 0.1f * t;
      }
    }
    write_png(bg, root / "background.png");

    // The target view is rendered against the aligned scene, so align into a
    // scratch directory first.
    const fs::path scratch = root / ".demo_align";
    pipeline::AlignOptions align;
    align.scene = {root, {}};
    align.out = scratch;
    const auto aligned = pipeline::cmd_align(align);
    fs::remove_all(scratch);

    CameraPose truth = camopt::camera_init(aligned.meshes);
    truth.position += Vec3(0.15, -0.2, 0.1);
    std::vector<camopt::RenderMesh> rmeshes;
    const auto cfg = sceneconfig::parse_scene_config(json{{"objects", objects}}.dump());
    const auto colors = pipeline::object_colors(cfg);
    for (std::size_t i = 0; i < aligned.meshes.size(); ++i) {
      rmeshes.push_back({aligned.meshes[i], static_cast<std::int32_t>(i + 2), colors[i]});
    }
    camopt::RenderOptions ropts;
    ropts.ground_plane = true;
    const auto target = camopt::rasterize(rmeshes, {}, truth, width, height, ropts);
    write_png(target.frame.rgb, root / "target.png");
    for (std::size_t i = 0; i < rmeshes.size(); ++i) {
      std::vector<std::uint8_t> m(target.frame.seg.size());
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = target.frame.seg[k] == rmeshes[i].seg_id ? 255 : 0;
      write_png_gray(width, height, m, root / "masks" / (std::to_string(i) + ".png"));
    }
    std::ofstream(root / "true_camera.json") << pipeline::camera_to_json(truth) << "\n";
    std::cout << "wrote " << root.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
