#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "physweave/geom.hpp"

namespace physweave::sceneconfig {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MaterialKind {
  rigid,
  mpm_elastic,
  mpm_elastoplastic,
  mpm_sand,
  mpm_liquid,
  mpm_snow,
  mpm_muscle,
  pbd_elastic,
  pbd_cloth,
  pbd_liquid,
  pbd_particle,
};

enum class ForceKind { constant, wind, point, drag, vortex, turbulence, noise };

inline constexpr std::array<MaterialKind, 11> kAllMaterials = {
    MaterialKind::rigid,      MaterialKind::mpm_elastic, MaterialKind::mpm_elastoplastic,
    MaterialKind::mpm_sand,   MaterialKind::mpm_liquid,  MaterialKind::mpm_snow,
    MaterialKind::mpm_muscle, MaterialKind::pbd_elastic, MaterialKind::pbd_cloth,
    MaterialKind::pbd_liquid, MaterialKind::pbd_particle};

inline constexpr std::array<ForceKind, 7> kAllForces = {ForceKind::constant, ForceKind::wind,
                                                       ForceKind::point,    ForceKind::drag,
                                                       ForceKind::vortex,   ForceKind::turbulence,
                                                       ForceKind::noise};

std::string_view to_string(MaterialKind kind);
std::string_view to_string(ForceKind kind);
std::optional<MaterialKind> parse_material_kind(std::string_view name);
std::optional<ForceKind> parse_force_kind(std::string_view name);

enum class Solver { rigid, mpm, pbd };
Solver solver_of(MaterialKind kind);

using ExtraValue = std::variant<bool, double, std::string, std::vector<double>>;
using Extras = std::map<std::string, ExtraValue>;

struct MaterialSpec {
  MaterialKind kind = MaterialKind::mpm_elastic;
  std::optional<double> E;   // Pa
  std::optional<double> nu;
  double rho = 1000.0;       // kg/m^3, kg/m^2 for cloth
  Extras extras;

  double extra_number(const std::string& key, double fallback) const;
  bool extra_bool(const std::string& key, bool fallback) const;
  std::string extra_string(const std::string& key, const std::string& fallback) const;

  bool operator==(const MaterialSpec&) const = default;
};

struct ForceFieldSpec {
  ForceKind kind = ForceKind::constant;
  Vec3 direction = Vec3(0, 0, -1);
  double strength = 0.0;           // acceleration, N/kg
  Vec3 position = Vec3::Zero();    // point, vortex, wind axis
  double radius = 0.0;             // wind
  bool localized = false;          // wind: falloff around `position` instead of global
  double falloff_power = 0.0;      // point
  double linear = 0.0;             // drag
  double quadratic = 0.0;          // drag
  double frequency = 0.0;          // turbulence
  double perpendicular_strength = 0.0;  // vortex
  int start_frame = -1;            // -1: active from the first frame
  Extras extras;                   // unrecognised fields, preserved

  /// Active at simulation frame t.
  bool active_at(int frame) const { return start_frame == -1 || frame >= start_frame; }

  bool operator==(const ForceFieldSpec&) const = default;
};

struct ObjectSpec {
  int index = 0;
  std::string name;
  MaterialSpec material;
  bool fixed = false;
  std::array<double, 3> surface_color = {0.7, 0.7, 0.7};
  std::string mesh_ref;
  std::optional<double> fix_top_ratio;

  bool operator==(const ObjectSpec&) const = default;
};

struct SimSettings {
  double dt = 0.004;  // s per frame
  int substeps = 10;
  int steps = 300;
  int render_fps = 60;

  bool operator==(const SimSettings&) const = default;
};

struct SceneConfig {
  std::vector<ObjectSpec> objects;
  std::vector<ForceFieldSpec> forces;
  SimSettings sim;
  std::string background_ref;
  std::vector<std::string> warnings;

  bool operator==(const SceneConfig&) const = default;
};

MaterialSpec material_defaults(MaterialKind kind);
MaterialSpec material_defaults(std::string_view kind);
ForceFieldSpec force_defaults(ForceKind kind);
ForceFieldSpec force_defaults(std::string_view kind);

/// Accepts {"objects": [...], "forces": [...]} or a bare array of objects,
/// possibly surrounded by prose. Unknown materials fall back to mpm_elastic and
/// unknown force kinds are dropped, each with a warning.
SceneConfig parse_scene_config(std::string_view text);
SceneConfig load_scene_config(const std::filesystem::path& path);

/// Canonical JSON with sorted keys; parse_scene_config(emit(c)) == c.
std::string emit_scene_config(const SceneConfig& cfg);

/// Plausibility warnings; mesh references are resolved against base_dir.
std::vector<std::string> validate_config(const SceneConfig& cfg, const std::filesystem::path& base_dir = {});

}  // namespace physweave::sceneconfig
