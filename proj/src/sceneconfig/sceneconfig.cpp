#include "physweave/sceneconfig.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace physweave::sceneconfig {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<MaterialKind, std::string_view>, 11> kMaterialNames{{
    {MaterialKind::rigid, "rigid"},
    {MaterialKind::mpm_elastic, "mpm_elastic"},
    {MaterialKind::mpm_elastoplastic, "mpm_elastoplastic"},
    {MaterialKind::mpm_sand, "mpm_sand"},
    {MaterialKind::mpm_liquid, "mpm_liquid"},
    {MaterialKind::mpm_snow, "mpm_snow"},
    {MaterialKind::mpm_muscle, "mpm_muscle"},
    {MaterialKind::pbd_elastic, "pbd_elastic"},
    {MaterialKind::pbd_cloth, "pbd_cloth"},
    {MaterialKind::pbd_liquid, "pbd_liquid"},
    {MaterialKind::pbd_particle, "pbd_particle"},
}};

constexpr std::array<std::pair<ForceKind, std::string_view>, 7> kForceNames{{
    {ForceKind::constant, "constant"},
    {ForceKind::wind, "wind"},
    {ForceKind::point, "point"},
    {ForceKind::drag, "drag"},
    {ForceKind::vortex, "vortex"},
    {ForceKind::turbulence, "turbulence"},
    {ForceKind::noise, "noise"},
}};

}  // namespace

std::string_view to_string(MaterialKind kind) {
  for (const auto& [k, name] : kMaterialNames) {
    if (k == kind) return name;
  }
  return "mpm_elastic";
}

std::string_view to_string(ForceKind kind) {
  for (const auto& [k, name] : kForceNames) {
    if (k == kind) return name;
  }
  return "constant";
}

std::optional<MaterialKind> parse_material_kind(std::string_view name) {
  for (const auto& [k, text] : kMaterialNames) {
    if (text == name) return k;
  }
  return std::nullopt;
}

std::optional<ForceKind> parse_force_kind(std::string_view name) {
  for (const auto& [k, text] : kForceNames) {
    if (text == name) return k;
  }
  return std::nullopt;
}

Solver solver_of(MaterialKind kind) {
  switch (kind) {
    case MaterialKind::rigid: return Solver::rigid;
    case MaterialKind::pbd_elastic:
    case MaterialKind::pbd_cloth:
    case MaterialKind::pbd_liquid:
    case MaterialKind::pbd_particle: return Solver::pbd;
    default: return Solver::mpm;
  }
}

double MaterialSpec::extra_number(const std::string& key, double fallback) const {
  const auto it = extras.find(key);
  if (it == extras.end()) return fallback;
  if (const double* d = std::get_if<double>(&it->second)) return *d;
  if (const bool* b = std::get_if<bool>(&it->second)) return *b ? 1.0 : 0.0;
  return fallback;
}

bool MaterialSpec::extra_bool(const std::string& key, bool fallback) const {
  const auto it = extras.find(key);
  if (it == extras.end()) return fallback;
  if (const bool* b = std::get_if<bool>(&it->second)) return *b;
  if (const double* d = std::get_if<double>(&it->second)) return *d != 0.0;
  return fallback;
}

std::string MaterialSpec::extra_string(const std::string& key, const std::string& fallback) const {
  const auto it = extras.find(key);
  if (it == extras.end()) return fallback;
  if (const std::string* s = std::get_if<std::string>(&it->second)) return *s;
  return fallback;
}

MaterialSpec material_defaults(MaterialKind kind) {
  MaterialSpec m;
  m.kind = kind;
  switch (kind) {
    case MaterialKind::rigid:
      m.rho = 200.0;
      m.extras = {{"friction", 0.7}};
      break;
    case MaterialKind::mpm_elastic:
      m.E = 3e5, m.nu = 0.2, m.rho = 1000.0;
      m.extras = {{"model", std::string("corotation")}};
      break;
    case MaterialKind::mpm_elastoplastic:
      m.E = 3e4, m.nu = 0.4, m.rho = 100.0;
      m.extras = {{"use_von_mises", true}, {"yield_stress", 1e4}};
      break;
    case MaterialKind::mpm_sand:
      m.E = 5e5, m.nu = 0.2, m.rho = 1800.0;
      m.extras = {{"friction_angle", 45.0}};
      break;
    case MaterialKind::mpm_liquid:
      m.E = 1e6, m.nu = 0.2, m.rho = 1000.0;
      m.extras = {{"viscous", false}};
      break;
    case MaterialKind::mpm_snow:
      m.E = 1e6, m.nu = 0.2, m.rho = 1000.0;
      m.extras = {{"yield", std::vector<double>{0.025, 0.0045}}};
      break;
    case MaterialKind::mpm_muscle:
      m.E = 1e6, m.nu = 0.2, m.rho = 1000.0;
      m.extras = {{"model", std::string("Neo-Hookean")}};
      break;
    case MaterialKind::pbd_elastic:
      m.rho = 1000.0;
      m.extras = {{"stretch_compliance", 0.0},
                  {"bending_compliance", 0.0},
                  {"volume_compliance", 0.0},
                  {"relaxation", 0.1}};
      break;
    case MaterialKind::pbd_cloth:
      m.rho = 4.0;
      m.extras = {{"stretch_compliance", 1e-7}, {"bending_compliance", 1e-5}, {"air_resistance", 1e-3}};
      break;
    case MaterialKind::pbd_liquid:
      m.rho = 1000.0;
      m.extras = {{"density_relaxation", 0.2}, {"viscosity_relaxation", 0.01}};
      break;
    case MaterialKind::pbd_particle:
      m.rho = 1000.0;
      break;
  }
  return m;
}

MaterialSpec material_defaults(std::string_view kind) {
  const auto k = parse_material_kind(kind);
  if (!k) throw ConfigError("unknown material kind '" + std::string(kind) + "'");
  return material_defaults(*k);
}

ForceFieldSpec force_defaults(ForceKind kind) {
  ForceFieldSpec f;
  f.kind = kind;
  f.direction = Vec3::Zero();
  switch (kind) {
    case ForceKind::constant:
      f.direction = Vec3(0, 0, -1);
      f.strength = 9.8;
      break;
    case ForceKind::wind:
      f.direction = Vec3(1, 0, 0);
      f.strength = 1.0;
      f.radius = 1.0;
      break;
    case ForceKind::point:
      f.strength = 1.0;
      f.falloff_power = 0.0;
      break;
    case ForceKind::drag:
      f.linear = 0.0;
      f.quadratic = 0.0;
      break;
    case ForceKind::vortex:
      f.direction = Vec3(0, 0, 1);
      f.perpendicular_strength = 20.0;
      break;
    case ForceKind::turbulence:
      f.strength = 1.0;
      f.frequency = 3.0;
      break;
    case ForceKind::noise:
      f.strength = 1.0;
      break;
  }
  return f;
}

ForceFieldSpec force_defaults(std::string_view kind) {
  const auto k = parse_force_kind(kind);
  if (!k) throw ConfigError("unknown force kind '" + std::string(kind) + "'");
  return force_defaults(*k);
}

// --- Parsing ---------------------------------------------------------------

namespace {

// Field names each force kind owns; anything else lands in extras.
std::set<std::string> force_fields(ForceKind kind) {
  switch (kind) {
    case ForceKind::constant: return {"direction", "strength"};
    case ForceKind::wind: return {"direction", "strength", "radius", "position"};
    case ForceKind::point: return {"strength", "position", "falloff_power"};
    case ForceKind::drag: return {"linear", "quadratic"};
    case ForceKind::vortex: return {"direction", "position", "perpendicular_strength"};
    case ForceKind::turbulence: return {"strength", "frequency"};
    case ForceKind::noise: return {"strength"};
  }
  return {};
}

bool material_has_elasticity(MaterialKind kind) { return solver_of(kind) == Solver::mpm; }

// Returns the end index (exclusive) of the bracketed value starting at `start`.
std::optional<std::size_t> match_brackets(std::string_view text, std::size_t start) {
  std::vector<char> stack;
  bool in_string = false, escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') stack.push_back(c == '{' ? '}' : ']');
    else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) return std::nullopt;
      stack.pop_back();
      if (stack.empty()) return i + 1;
    }
  }
  return std::nullopt;
}

// First balanced JSON value in the text that is either an object with an
// "objects" member or an array.
json extract_document(std::string_view text) {
  std::string last_error = "no JSON object or array found";
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    const auto end = match_brackets(text, i);
    if (!end) continue;
    try {
      json doc = json::parse(text.substr(i, *end - i));
      if ((doc.is_object() && doc.contains("objects")) || doc.is_array()) return doc;
    } catch (const json::parse_error& e) {
      last_error = e.what();
    }
  }
  throw ConfigError("unparseable scene config: " + last_error);
}

struct Context {
  std::vector<std::string>& warnings;
  void warn(std::string msg) { warnings.push_back(std::move(msg)); }
};

std::optional<ExtraValue> to_extra(const json& v) {
  if (v.is_boolean()) return ExtraValue(v.get<bool>());
  if (v.is_number()) return ExtraValue(v.get<double>());
  if (v.is_string()) return ExtraValue(v.get<std::string>());
  if (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
    return ExtraValue(v.get<std::vector<double>>());
  }
  return std::nullopt;
}

json from_extra(const ExtraValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

std::optional<double> number(const json& v, const std::string& where, const std::string& key, Context& ctx) {
  if (v.is_number()) {
    const double d = v.get<double>();
    if (std::isfinite(d)) return d;
  }
  ctx.warn(where + ": field '" + key + "' is not a finite number; using the default");
  return std::nullopt;
}

std::optional<Vec3> vec3(const json& v, const std::string& where, const std::string& key, Context& ctx) {
  if (v.is_array() && v.size() == 3 && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
    const Vec3 out(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    if (out.allFinite()) return out;
  }
  ctx.warn(where + ": field '" + key + "' must be a 3-vector; using the default");
  return std::nullopt;
}

std::optional<std::string> kind_name(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (obj.contains(k) && obj[k].is_string()) return obj[k].get<std::string>();
  }
  return std::nullopt;
}

MaterialSpec parse_material(const json& obj, const std::string& where, Context& ctx) {
  // Canonical: "material": {"kind": ...}. Prompt vocabulary: "material_type" plus "material_params".
  json params = json::object();
  std::optional<std::string> name;
  if (obj.contains("material") && obj["material"].is_object()) {
    params = obj["material"];
    name = kind_name(params, {"kind", "type", "material_type"});
    params.erase("kind");
    params.erase("type");
    params.erase("material_type");
  } else {
    name = kind_name(obj, {"material_type", "kind", "type", "material"});
  }
  if (obj.contains("material_params") && obj["material_params"].is_object()) {
    for (const auto& [k, v] : obj["material_params"].items()) params[k] = v;
  }

  MaterialKind kind = MaterialKind::mpm_elastic;
  if (!name) {
    ctx.warn(where + ": no material type given; falling back to mpm_elastic");
  } else if (const auto k = parse_material_kind(*name)) {
    kind = *k;
  } else {
    ctx.warn(where + ": unknown material type '" + *name + "'; falling back to mpm_elastic");
  }

  MaterialSpec m = material_defaults(kind);
  if (params.contains("compliance") && !params.contains("stretch_compliance") &&
      solver_of(kind) == Solver::pbd) {
    params["stretch_compliance"] = params["compliance"];
    params.erase("compliance");
  }
  for (const auto& [key, value] : params.items()) {
    if (key == "E" || key == "nu") {
      if (!material_has_elasticity(kind)) {
        if (auto extra = to_extra(value)) m.extras[key] = *extra;
        continue;
      }
      const auto d = number(value, where, key, ctx);
      if (!d) continue;
      if (key == "E") {
        if (*d > 0.0) m.E = *d;
        else ctx.warn(where + ": E must be positive; using the default");
      } else {
        if (*d >= 0.0 && *d < 0.5) m.nu = *d;
        else ctx.warn(where + ": nu must lie in [0, 0.5); using the default");
      }
    } else if (key == "rho") {
      const auto d = number(value, where, key, ctx);
      if (d && *d > 0.0) m.rho = *d;
      else if (d) ctx.warn(where + ": rho must be positive; using the default");
    } else if (auto extra = to_extra(value)) {
      // Keep the default's type for known numeric/bool fields when possible.
      const auto def = m.extras.find(key);
      if (def != m.extras.end() && std::holds_alternative<bool>(def->second) && value.is_number()) {
        m.extras[key] = value.get<double>() != 0.0;
      } else {
        m.extras[key] = *extra;
      }
    } else {
      ctx.warn(where + ": ignoring material field '" + key + "' of unsupported type");
    }
  }
  return m;
}

std::optional<ObjectSpec> parse_object(const json& obj, std::size_t position, Context& ctx) {
  const std::string where = "object " + std::to_string(position);
  if (!obj.is_object()) {
    ctx.warn(where + ": entry is not an object; skipped");
    return std::nullopt;
  }
  ObjectSpec o;
  o.index = static_cast<int>(position);
  if (obj.contains("index")) {
    if (obj["index"].is_number_integer() && obj["index"].get<long long>() >= 0) {
      o.index = static_cast<int>(obj["index"].get<long long>());
    } else {
      ctx.warn(where + ": index must be a non-negative integer; using the list position");
    }
  }
  for (const char* key : {"name", "object", "description"}) {
    if (obj.contains(key) && obj[key].is_string()) {
      o.name = obj[key].get<std::string>();
      break;
    }
  }
  o.material = parse_material(obj, where, ctx);
  if (obj.contains("fixed")) {
    if (obj["fixed"].is_boolean()) o.fixed = obj["fixed"].get<bool>();
    else ctx.warn(where + ": 'fixed' must be a boolean; using false");
  }
  if (obj.contains("surface_color")) {
    if (const auto c = vec3(obj["surface_color"], where, "surface_color", ctx)) {
      const Vec3 clamped = c->cwiseMax(0.0).cwiseMin(1.0);
      if (clamped != *c) ctx.warn(where + ": surface_color clamped to [0, 1]");
      o.surface_color = {clamped.x(), clamped.y(), clamped.z()};
    }
  }
  if (obj.contains("mesh_ref") && obj["mesh_ref"].is_string()) o.mesh_ref = obj["mesh_ref"].get<std::string>();
  if (obj.contains("fix_top_ratio") && !obj["fix_top_ratio"].is_null()) {
    if (const auto r = number(obj["fix_top_ratio"], where, "fix_top_ratio", ctx)) o.fix_top_ratio = *r;
  }
  return o;
}

std::optional<ForceFieldSpec> parse_force(const json& obj, std::size_t position, Context& ctx) {
  const std::string where = "force " + std::to_string(position);
  if (!obj.is_object()) {
    ctx.warn(where + ": entry is not an object; discarded");
    return std::nullopt;
  }
  const auto name = kind_name(obj, {"kind", "type", "force_type"});
  if (!name) {
    ctx.warn(where + ": missing force type; discarded");
    return std::nullopt;
  }
  const auto kind = parse_force_kind(*name);
  if (!kind) {
    ctx.warn(where + ": invalid force type '" + *name + "'; discarded");
    return std::nullopt;
  }
  ForceFieldSpec f = force_defaults(*kind);
  const auto owned = force_fields(*kind);
  for (const auto& [key, value] : obj.items()) {
    if (key == "kind" || key == "type" || key == "force_type") continue;
    if (key == "start_frame") {
      if (value.is_number_integer() && value.get<long long>() >= -1) {
        f.start_frame = static_cast<int>(value.get<long long>());
      } else {
        ctx.warn(where + ": start_frame must be an integer >= -1; using -1");
      }
      continue;
    }
    if (!owned.count(key)) {
      if (auto extra = to_extra(value)) f.extras[key] = *extra;
      continue;
    }
    if (key == "direction" || key == "position") {
      if (const auto v = vec3(value, where, key, ctx)) {
        (key == "direction" ? f.direction : f.position) = *v;
        if (key == "position" && f.kind == ForceKind::wind) f.localized = true;
      }
      continue;
    }
    const auto d = number(value, where, key, ctx);
    if (!d) continue;
    if (key == "strength") f.strength = *d;
    else if (key == "radius") f.radius = *d;
    else if (key == "falloff_power") f.falloff_power = *d;
    else if (key == "linear") f.linear = *d;
    else if (key == "quadratic") f.quadratic = *d;
    else if (key == "frequency") f.frequency = *d;
    else if (key == "perpendicular_strength") f.perpendicular_strength = *d;
  }
  return f;
}

SimSettings parse_sim(const json& obj, Context& ctx) {
  SimSettings s;
  if (!obj.is_object()) {
    ctx.warn("sim: expected an object; using defaults");
    return s;
  }
  const auto positive_int = [&](const char* key, int& out) {
    if (!obj.contains(key)) return;
    if (obj[key].is_number_integer() && obj[key].get<long long>() > 0) out = static_cast<int>(obj[key].get<long long>());
    else ctx.warn(std::string("sim: '") + key + "' must be a positive integer; using the default");
  };
  if (obj.contains("dt")) {
    if (obj["dt"].is_number() && obj["dt"].get<double>() > 0.0) s.dt = obj["dt"].get<double>();
    else ctx.warn("sim: 'dt' must be positive; using the default");
  }
  positive_int("substeps", s.substeps);
  positive_int("steps", s.steps);
  positive_int("render_fps", s.render_fps);
  return s;
}

}  // namespace

SceneConfig parse_scene_config(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) throw ConfigError("empty scene config");
  const json doc = extract_document(text);

  SceneConfig cfg;
  Context ctx{cfg.warnings};
  json objects = json::array();
  json forces = json::array();
  if (doc.is_array()) {
    objects = doc;
  } else {
    objects = doc["objects"];
    if (doc.contains("forces")) forces = doc["forces"];
    if (doc.contains("warnings") && doc["warnings"].is_array()) {
      for (const auto& w : doc["warnings"]) {
        if (w.is_string()) cfg.warnings.push_back(w.get<std::string>());
      }
    }
    if (doc.contains("sim")) cfg.sim = parse_sim(doc["sim"], ctx);
    if (doc.contains("background_ref") && doc["background_ref"].is_string()) {
      cfg.background_ref = doc["background_ref"].get<std::string>();
    }
  }
  if (!objects.is_array()) throw ConfigError("'objects' must be an array");
  if (!forces.is_array()) {
    ctx.warn("'forces' is not an array; ignored");
    forces = json::array();
  }

  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (auto o = parse_object(objects[i], i, ctx)) cfg.objects.push_back(std::move(*o));
  }
  if (cfg.objects.empty()) throw ConfigError("scene config has no objects");
  for (std::size_t i = 0; i < forces.size(); ++i) {
    if (auto f = parse_force(forces[i], i, ctx)) cfg.forces.push_back(std::move(*f));
  }

  std::stable_sort(cfg.objects.begin(), cfg.objects.end(),
                   [](const ObjectSpec& a, const ObjectSpec& b) { return a.index < b.index; });
  bool contiguous = true;
  for (std::size_t i = 0; i < cfg.objects.size(); ++i) contiguous &= cfg.objects[i].index == static_cast<int>(i);
  if (!contiguous) {
    ctx.warn("object indices are not unique and contiguous from 0; renumbered in index order");
    for (std::size_t i = 0; i < cfg.objects.size(); ++i) cfg.objects[i].index = static_cast<int>(i);
  }
  return cfg;
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scene_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string emit_scene_config(const SceneConfig& cfg) {
  json doc;
  doc["objects"] = json::array();
  for (const auto& o : cfg.objects) {
    json m = json::object();
    for (const auto& [k, v] : o.material.extras) m[k] = from_extra(v);
    m["kind"] = std::string(to_string(o.material.kind));
    if (o.material.E) m["E"] = *o.material.E;
    if (o.material.nu) m["nu"] = *o.material.nu;
    m["rho"] = o.material.rho;
    json j;
    j["index"] = o.index;
    j["name"] = o.name;
    j["material"] = m;
    j["fixed"] = o.fixed;
    j["surface_color"] = o.surface_color;
    j["mesh_ref"] = o.mesh_ref;
    if (o.fix_top_ratio) j["fix_top_ratio"] = *o.fix_top_ratio;
    doc["objects"].push_back(j);
  }
  doc["forces"] = json::array();
  for (const auto& f : cfg.forces) {
    json j = json::object();
    for (const auto& [k, v] : f.extras) j[k] = from_extra(v);
    j["kind"] = std::string(to_string(f.kind));
    j["start_frame"] = f.start_frame;
    const auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
    for (const auto& key : force_fields(f.kind)) {
      if (key == "direction") j[key] = vec(f.direction);
      else if (key == "position") {
        if (f.kind != ForceKind::wind || f.localized) j[key] = vec(f.position);
      }
      else if (key == "strength") j[key] = f.strength;
      else if (key == "radius") j[key] = f.radius;
      else if (key == "falloff_power") j[key] = f.falloff_power;
      else if (key == "linear") j[key] = f.linear;
      else if (key == "quadratic") j[key] = f.quadratic;
      else if (key == "frequency") j[key] = f.frequency;
      else if (key == "perpendicular_strength") j[key] = f.perpendicular_strength;
    }
    doc["forces"].push_back(j);
  }
  doc["sim"] = {{"dt", cfg.sim.dt}, {"substeps", cfg.sim.substeps}, {"steps", cfg.sim.steps},
                {"render_fps", cfg.sim.render_fps}};
  doc["background_ref"] = cfg.background_ref;
  doc["warnings"] = cfg.warnings;
  return doc.dump(2) + "\n";
}

std::vector<std::string> validate_config(const SceneConfig& cfg, const std::filesystem::path& base_dir) {
  std::vector<std::string> out;
  for (const auto& o : cfg.objects) {
    const std::string where = "object " + std::to_string(o.index) + (o.name.empty() ? "" : " (" + o.name + ")");
    const MaterialSpec& m = o.material;
    if (m.nu && (*m.nu < 0.2 || *m.nu > 0.45)) {
      out.push_back(where + ": Poisson ratio " + std::to_string(*m.nu) + " is outside the typical 0.2-0.45 band");
    }
    if (m.E && (*m.E < 1e2 || *m.E > 1e7)) {
      out.push_back(where + ": Young's modulus " + std::to_string(*m.E) + " Pa is outside the plausible 1e2-1e7 band");
    }
    if (m.kind != MaterialKind::pbd_cloth && (m.rho < 10.0 || m.rho > 3000.0)) {
      out.push_back(where + ": density " + std::to_string(m.rho) + " kg/m^3 is outside the plausible 10-3000 band");
    }
    if (o.mesh_ref.empty()) {
      out.push_back(where + ": no mesh_ref");
    } else {
      const std::filesystem::path p = base_dir.empty() ? std::filesystem::path(o.mesh_ref) : base_dir / o.mesh_ref;
      if (!std::filesystem::exists(p)) out.push_back(where + ": mesh file not found: " + p.string());
    }
    if (o.fix_top_ratio && (*o.fix_top_ratio < 0.0 || *o.fix_top_ratio > 1.0)) {
      out.push_back(where + ": fix_top_ratio " + std::to_string(*o.fix_top_ratio) + " is outside [0, 1]");
    }
  }
  for (std::size_t i = 0; i < cfg.forces.size(); ++i) {
    const auto& f = cfg.forces[i];
    if (f.kind == ForceKind::point && f.falloff_power == 0.0 && f.strength != 0.0) {
      // Constant-magnitude pull regardless of distance; legal but often unintended.
      out.push_back("force " + std::to_string(i) + ": point force with falloff_power 0 does not decay with distance");
    }
    if ((f.kind == ForceKind::constant || f.kind == ForceKind::wind || f.kind == ForceKind::vortex) &&
        f.direction.norm() == 0.0) {
      out.push_back("force " + std::to_string(i) + ": zero direction vector");
    }
  }
  if (!cfg.background_ref.empty()) {
    const std::filesystem::path p =
        base_dir.empty() ? std::filesystem::path(cfg.background_ref) : base_dir / cfg.background_ref;
    if (!std::filesystem::exists(p)) out.push_back("background image not found: " + p.string());
  }
  return out;
}

}  // namespace physweave::sceneconfig
