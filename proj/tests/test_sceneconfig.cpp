#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "physweave/random.hpp"
#include "physweave/sceneconfig.hpp"

using namespace physweave;
using namespace physweave::sceneconfig;

namespace {

struct MaterialRow {
  const char* kind;
  std::optional<double> E, nu;
  double rho;
  Extras extras;
};

// Transcribed by hand from the published defaults table.
std::vector<MaterialRow> material_table() {
  using V = std::vector<double>;
  return {
      {"rigid", {}, {}, 200, {{"friction", 0.7}}},
      {"mpm_elastic", 3e5, 0.2, 1000, {{"model", std::string("corotation")}}},
      {"mpm_elastoplastic", 3e4, 0.4, 100, {{"use_von_mises", true}, {"yield_stress", 1e4}}},
      {"mpm_sand", 5e5, 0.2, 1800, {{"friction_angle", 45.0}}},
      {"mpm_liquid", 1e6, 0.2, 1000, {{"viscous", false}}},
      {"mpm_snow", 1e6, 0.2, 1000, {{"yield", V{0.025, 0.0045}}}},
      {"mpm_muscle", 1e6, 0.2, 1000, {{"model", std::string("Neo-Hookean")}}},
      {"pbd_elastic", {}, {}, 1000,
       {{"stretch_compliance", 0.0}, {"bending_compliance", 0.0}, {"volume_compliance", 0.0}, {"relaxation", 0.1}}},
      {"pbd_cloth", {}, {}, 4,
       {{"stretch_compliance", 1e-7}, {"bending_compliance", 1e-5}, {"air_resistance", 1e-3}}},
      {"pbd_liquid", {}, {}, 1000, {{"density_relaxation", 0.2}, {"viscosity_relaxation", 0.01}}},
      {"pbd_particle", {}, {}, 1000, {}},
  };
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("material defaults match the table field for field") {
  const auto table = material_table();
  REQUIRE(table.size() == kAllMaterials.size());
  for (const auto& row : table) {
    CAPTURE(row.kind);
    const MaterialSpec m = material_defaults(row.kind);
    CHECK(to_string(m.kind) == row.kind);
    CHECK(m.E == row.E);
    CHECK(m.nu == row.nu);
    CHECK(m.rho == row.rho);
    CHECK(m.extras == row.extras);
  }
  CHECK_THROWS_AS(material_defaults("unobtainium"), ConfigError);
}

TEST_CASE("force defaults match the table field for field") {
  const auto constant = force_defaults("constant");
  CHECK(constant.direction == Vec3(0, 0, -1));
  CHECK(constant.strength == 9.8);

  const auto wind = force_defaults("wind");
  CHECK(wind.direction == Vec3(1, 0, 0));
  CHECK(wind.strength == 1.0);
  CHECK(wind.radius == 1.0);

  const auto point = force_defaults("point");
  CHECK(point.strength == 1.0);
  CHECK(point.position == Vec3::Zero());
  CHECK(point.falloff_power == 0.0);

  const auto drag = force_defaults("drag");
  CHECK(drag.linear == 0.0);
  CHECK(drag.quadratic == 0.0);

  const auto vortex = force_defaults("vortex");
  CHECK(vortex.direction == Vec3(0, 0, 1));
  CHECK(vortex.perpendicular_strength == 20.0);

  const auto turbulence = force_defaults("turbulence");
  CHECK(turbulence.strength == 1.0);
  CHECK(turbulence.frequency == 3.0);

  CHECK(force_defaults("noise").strength == 1.0);

  for (auto k : kAllForces) CHECK(force_defaults(k).start_frame == -1);
  CHECK_THROWS_AS(force_defaults("tractor_beam"), ConfigError);
}

TEST_CASE("kind names are a bijection with the enums") {
  std::set<std::string_view> names;
  for (auto k : kAllMaterials) {
    names.insert(to_string(k));
    CHECK(parse_material_kind(to_string(k)) == k);
    CHECK(material_defaults(k).kind == k);
  }
  CHECK(names.size() == 11);
  names.clear();
  for (auto k : kAllForces) {
    names.insert(to_string(k));
    CHECK(parse_force_kind(to_string(k)) == k);
    CHECK(force_defaults(k).kind == k);
  }
  CHECK(names.size() == 7);
  CHECK_FALSE(parse_material_kind("MPM_SAND"));
  CHECK_FALSE(parse_force_kind(""));
}

TEST_CASE("minimal prompt-style config is completed from defaults") {
  const auto cfg = parse_scene_config(R"({"objects":[{"material_type":"mpm_sand"}],"forces":[{"type":"constant"}]})");
  REQUIRE(cfg.objects.size() == 1);
  CHECK(cfg.objects[0].material == material_defaults(MaterialKind::mpm_sand));
  CHECK(cfg.objects[0].index == 0);
  REQUIRE(cfg.forces.size() == 1);
  CHECK(cfg.forces[0] == force_defaults(ForceKind::constant));
  CHECK(cfg.sim == SimSettings{});
  CHECK(cfg.sim.dt == 0.004);
  CHECK(cfg.sim.substeps == 10);
  CHECK(cfg.sim.steps == 300);
  CHECK(cfg.warnings.empty());
}

TEST_CASE("unknown material falls back to mpm_elastic with one warning") {
  const auto cfg = parse_scene_config(
      R"({"objects":[{"name":"ore","material_type":"unobtainium","material_params":{"E":2e5}}],"forces":[]})");
  CHECK(cfg.objects[0].material.kind == MaterialKind::mpm_elastic);
  CHECK(cfg.objects[0].material.E == 2e5);
  CHECK(cfg.objects[0].material.nu == 0.2);
  REQUIRE(cfg.warnings.size() == 1);
  CHECK(cfg.warnings[0].find("unobtainium") != std::string::npos);
}

TEST_CASE("invalid force kind is discarded with one warning") {
  const auto cfg = parse_scene_config(R"({"objects":[{"material_type":"rigid"}],
      "forces":[{"type":"wind","strength":2.5,"start_frame":50},
                {"type":"tractor_beam","strength":99},
                {"type":"drag","linear":0.3}]})");
  REQUIRE(cfg.forces.size() == 2);
  CHECK(cfg.forces[0].kind == ForceKind::wind);
  CHECK(cfg.forces[0].strength == 2.5);
  CHECK(cfg.forces[0].radius == 1.0);
  CHECK(cfg.forces[0].start_frame == 50);
  CHECK_FALSE(cfg.forces[0].localized);
  CHECK(cfg.forces[1].kind == ForceKind::drag);
  CHECK(cfg.forces[1].linear == 0.3);
  CHECK(cfg.forces[1].quadratic == 0.0);
  REQUIRE(cfg.warnings.size() == 1);
  CHECK(cfg.warnings[0].find("tractor_beam") != std::string::npos);
}

TEST_CASE("start_frame schedule") {
  ForceFieldSpec f = force_defaults(ForceKind::wind);
  CHECK(f.active_at(0));
  f.start_frame = 50;
  CHECK_FALSE(f.active_at(49));
  CHECK(f.active_at(50));
  const auto cfg = parse_scene_config(R"({"objects":[{}],"forces":[{"type":"noise","start_frame":-7}]})");
  CHECK(cfg.forces[0].start_frame == -1);
  CHECK(cfg.warnings.size() == 2);  // missing material type, bad start_frame
}

TEST_CASE("legacy array and prose-wrapped output are accepted") {
  const auto legacy = parse_scene_config(R"([{"material_type":"pbd_cloth"},{"material_type":"rigid","fixed":true}])");
  REQUIRE(legacy.objects.size() == 2);
  CHECK(legacy.objects[0].material == material_defaults(MaterialKind::pbd_cloth));
  CHECK(legacy.objects[1].fixed);
  CHECK(legacy.forces.empty());

  const auto wrapped = parse_scene_config(
      "Sure! Here is the config {not json} for the scene:\n```json\n"
      R"({"objects":[{"name":"jelly {soft}","material_type":"mpm_elastic","surface_color":[1.0,0.2,0.3]}],)"
      R"("forces":[{"type":"vortex","direction":[0,0,1],"strength":5}]})"
      "\n```\nLet me know if you need more.");
  REQUIRE(wrapped.objects.size() == 1);
  CHECK(wrapped.objects[0].name == "jelly {soft}");
  CHECK(wrapped.objects[0].surface_color == std::array<double, 3>{1.0, 0.2, 0.3});
  // Fields a kind does not own are preserved rather than dropped.
  CHECK(std::get<double>(wrapped.forces[0].extras.at("strength")) == 5.0);
}

TEST_CASE("canonical and prompt vocabularies parse identically") {
  const auto a = parse_scene_config(
      R"({"objects":[{"type":"mpm_elastoplastic","material_params":{"E":5e4,"rho":300,"yield_stress":2e4}}]})");
  const auto b = parse_scene_config(
      R"({"objects":[{"material":{"kind":"mpm_elastoplastic","E":5e4,"rho":300,"yield_stress":2e4}}]})");
  CHECK(a == b);
  CHECK(a.objects[0].material.extra_number("yield_stress", 0) == 2e4);
  CHECK(a.objects[0].material.extra_bool("use_von_mises", false));
}

TEST_CASE("out-of-range values are repaired with warnings") {
  const auto cfg = parse_scene_config(R"({"objects":[
      {"index":0,"material_type":"mpm_elastic","material_params":{"nu":0.7,"E":-4,"rho":"heavy"},
       "surface_color":[1.5,0.5,-0.1]}]})");
  const auto& m = cfg.objects[0].material;
  CHECK(m.nu == 0.2);
  CHECK(m.E == 3e5);
  CHECK(m.rho == 1000);
  CHECK(cfg.objects[0].surface_color == std::array<double, 3>{1.0, 0.5, 0.0});
  CHECK(cfg.warnings.size() == 4);
}

TEST_CASE("object indices are renumbered when not contiguous") {
  const auto cfg = parse_scene_config(R"({"objects":[{"index":5,"name":"b"},{"index":2,"name":"a"}]})");
  CHECK(cfg.objects[0].name == "a");
  CHECK(cfg.objects[0].index == 0);
  CHECK(cfg.objects[1].index == 1);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_scene_config(""), ConfigError);
  CHECK_THROWS_AS(parse_scene_config("   \n"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config("no json here"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config(R"({"objects":[]})"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config(R"({"objects":{"a":1}})"), ConfigError);
  CHECK_THROWS_AS(parse_scene_config(R"({"objects":[1,2,3]})"), ConfigError);
  CHECK_THROWS_AS(load_scene_config("/nonexistent/scene.json"), ConfigError);
}

TEST_CASE("parsing is total on arbitrary text") {
  const std::string seed_text =
      R"({"objects":[{"index":0,"material_type":"mpm_sand","material_params":{"E":5e5,"nu":0.2},"fixed":false,)"
      R"("surface_color":[0.2,0.3,0.4]}],"forces":[{"type":"wind","direction":[1,0,0],"start_frame":3}]})";
  const std::string alphabet = "{}[]\",:0123456789.-eE truefalsn";
  CounterRng rng(11);
  int parsed = 0, rejected = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    std::string text;
    if (trial % 2 == 0) {
      const int len = 1 + static_cast<int>(rng.below(80));
      for (int i = 0; i < len; ++i) text += alphabet[rng.below(alphabet.size())];
    } else {
      // Byte-level mutations of a valid config.
      text = seed_text;
      const int edits = 1 + static_cast<int>(rng.below(4));
      for (int e = 0; e < edits; ++e) {
        const std::size_t at = rng.below(text.size());
        switch (rng.below(3)) {
          case 0: text[at] = alphabet[rng.below(alphabet.size())]; break;
          case 1: text.erase(at, 1); break;
          default: text.insert(at, 1, alphabet[rng.below(alphabet.size())]);
        }
      }
    }
    try {
      parse_scene_config(text);
      ++parsed;
    } catch (const ConfigError&) {
      ++rejected;
    }
  }
  // Any other exception type escapes and fails the test.
  CHECK(parsed + rejected == 3000);
  CHECK(parsed > 0);
  CHECK(rejected > 0);
}

TEST_CASE("emit then parse round-trips exactly") {
  for (auto mk : kAllMaterials) {
    SceneConfig cfg;
    ObjectSpec o;
    o.name = "obj \"quoted\"";
    o.material = material_defaults(mk);
    o.material.extras["custom_knob"] = std::string("x");
    o.fixed = mk == MaterialKind::rigid;
    o.surface_color = {0.1, 0.25, 1.0 / 3.0};
    o.mesh_ref = "meshes/a.obj";
    if (mk == MaterialKind::pbd_cloth) o.fix_top_ratio = 0.05;
    cfg.objects.push_back(o);
    for (auto fk : kAllForces) {
      ForceFieldSpec f = force_defaults(fk);
      f.start_frame = static_cast<int>(fk) * 7 - 1;
      f.position = Vec3(0.1, -0.2, 0.3);
      f.localized = fk == ForceKind::wind;
      f.extras["gain"] = std::vector<double>{1.0, 2.0};
      cfg.forces.push_back(f);
    }
    cfg.sim.steps = 120;
    cfg.background_ref = "bg.png";
    cfg.warnings = {"kept"};

    // Normalize irrelevant fields through one pass, then demand a fixed point.
    const SceneConfig once = parse_scene_config(emit_scene_config(cfg));
    CHECK(once.objects == cfg.objects);
    CHECK(once.sim == cfg.sim);
    CHECK(once.warnings == cfg.warnings);
    const std::string text = emit_scene_config(once);
    CHECK(parse_scene_config(text) == once);
    CHECK(emit_scene_config(parse_scene_config(text)) == text);
  }
}

TEST_CASE("emission is canonical") {
  const auto a = parse_scene_config(R"({"objects":[{"type":"mpm_sand","name":"s"}],"forces":[{"kind":"drag"}]})");
  const auto b = parse_scene_config(R"({"forces":[{"type":"drag"}],"objects":[{"name":"s","material_type":"mpm_sand"}]})");
  const std::string text = emit_scene_config(a);
  CHECK(text == emit_scene_config(b));
  CHECK(text.find("material_type") == std::string::npos);
  CHECK(text.find("\"kind\": \"mpm_sand\"") != std::string::npos);
  // Keys are ordered.
  CHECK(text.find("\"background_ref\"") < text.find("\"forces\""));
  CHECK(text.find("\"forces\"") < text.find("\"objects\""));
}

TEST_CASE("validate_config warnings") {
  const auto dir = std::filesystem::temp_directory_path() / "physweave_test_sceneconfig";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "cube.obj") << "v 0 0 0\n";

  SceneConfig good;
  ObjectSpec o;
  o.material = material_defaults(MaterialKind::mpm_elastic);
  o.mesh_ref = "cube.obj";
  good.objects.push_back(o);
  good.forces.push_back(force_defaults(ForceKind::constant));
  CHECK(validate_config(good, dir).empty());

  SceneConfig soft = good;
  soft.objects[0].material.nu = 0.6;
  const auto w = validate_config(soft, dir);
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("0.2-0.45") != std::string::npos);

  SceneConfig missing = good;
  missing.objects[0].mesh_ref = "gone.obj";
  const auto m = validate_config(missing, dir);
  REQUIRE(m.size() == 1);
  CHECK(m[0].find((dir / "gone.obj").string()) != std::string::npos);

  SceneConfig pinned = good;
  pinned.objects[0].fix_top_ratio = 1.2;
  CHECK(validate_config(pinned, dir).size() == 1);

  // validate never mutates.
  const SceneConfig before = soft;
  validate_config(soft, dir);
  CHECK(soft == before);

  // Round trip through a file.
  std::ofstream(dir / "scene.json") << emit_scene_config(good);
  CHECK(load_scene_config(dir / "scene.json") == good);
  CHECK(read_all(dir / "scene.json") == emit_scene_config(good));
}
