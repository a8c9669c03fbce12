#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "internal.hpp"
#include "json.hpp"

namespace physweave::sim {

using sceneconfig::Solver;

SimulationDiverged::SimulationDiverged(std::string solver, int frame)
    : SimError("simulation diverged in the " + solver + " solver at frame " + std::to_string(frame)),
      solver_(std::move(solver)),
      frame_(frame) {}

double SimState::total_particle_mass() const {
  double m = 0.0;
  for (const PbdBody& b : pbd) m = std::accumulate(b.mass.begin(), b.mass.end(), m);
  for (const MpmBody& b : mpm) {
    for (const MpmParticle& p : b.particles) m += p.mass;
  }
  return m;
}

double SimState::kinetic_energy() const {
  double e = 0.0;
  for (const RigidBody& b : rigid) {
    if (b.fixed) continue;
    const Mat3 r = b.rotation();
    e += 0.5 * b.mass * b.v.squaredNorm() + 0.5 * b.w.dot(r * b.inertia_body * r.transpose() * b.w);
  }
  for (const PbdBody& b : pbd) {
    for (std::size_t i = 0; i < b.x.size(); ++i) e += 0.5 * b.mass[i] * b.v[i].squaredNorm();
  }
  for (const MpmBody& b : mpm) {
    for (const MpmParticle& p : b.particles) e += 0.5 * p.mass * p.v.squaredNorm();
  }
  return e;
}

std::string to_json(const StepReport& r) {
  const nlohmann::json j = {{"frame", r.frame},
                            {"active_fields", r.active_fields},
                            {"rigid_ms", r.rigid_ms},
                            {"pbd_ms", r.pbd_ms},
                            {"mpm_ms", r.mpm_ms},
                            {"rigid_contacts", r.rigid_contacts},
                            {"escaped_particles", r.escaped_particles},
                            {"kinetic_energy", r.kinetic_energy}};
  return j.dump();
}

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

void check_finite(const SimState& s) {
  for (const RigidBody& b : s.rigid) {
    if (!finite(b.x) || !finite(b.v) || !finite(b.w) || !b.q.coeffs().allFinite()) {
      throw SimulationDiverged("rigid", s.frame);
    }
  }
  for (const PbdBody& b : s.pbd) {
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      if (!finite(b.x[i]) || !finite(b.v[i])) throw SimulationDiverged("pbd", s.frame);
    }
  }
  for (const MpmBody& b : s.mpm) {
    for (const MpmParticle& p : b.particles) {
      if (!finite(p.x) || !finite(p.v) || !p.F.allFinite()) throw SimulationDiverged("mpm", s.frame);
    }
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

StepReport sim_step(SimState& state) {
  const SimParams& prm = state.params;
  if (prm.substeps < 1 || !(prm.dt > 0.0)) throw SimError("sim_step: dt and substeps must be positive");
  StepReport report;
  report.frame = state.frame;
  for (const auto& f : state.forces) report.active_fields += f.active_at(state.frame) ? 1 : 0;

  const double h = prm.dt / prm.substeps;
  const long long escaped_before = state.diagnostics.escaped_particles;
  using clock = std::chrono::steady_clock;
  for (int k = 0; k < prm.substeps; ++k) {
    auto t0 = clock::now();
    detail::rigid_substep(state, h);
    report.rigid_ms += elapsed_ms(t0);
    t0 = clock::now();
    detail::pbd_substep(state, h, prm.pbd_iterations);
    report.pbd_ms += elapsed_ms(t0);
    t0 = clock::now();
    detail::mpm_substep(state, h);
    report.mpm_ms += elapsed_ms(t0);
    state.time += h;
    ++state.tick;
  }
  check_finite(state);
  report.rigid_contacts = state.diagnostics.rigid_contacts;
  report.escaped_particles = state.diagnostics.escaped_particles - escaped_before;
  report.kinetic_energy = state.kinetic_energy();
  ++state.frame;
  return report;
}

void run_sim(SimState& state, int steps, const FrameCallback& on_frame) {
  if (steps < 0) throw SimError("run_sim: steps must be >= 0");
  for (int t = 0; t < steps; ++t) {
    const StepReport report = sim_step(state);
    if (on_frame) on_frame(state, report);
  }
}

MpmMaterial mpm_material(const sceneconfig::MaterialSpec& spec, std::vector<std::string>* warnings) {
  if (sceneconfig::solver_of(spec.kind) != Solver::mpm) {
    throw SimError("material " + std::string(sceneconfig::to_string(spec.kind)) + " is not an MPM material");
  }
  const sceneconfig::MaterialSpec defaults = sceneconfig::material_defaults(spec.kind);
  MpmMaterial m;
  m.E = spec.E.value_or(*defaults.E);
  m.nu = spec.nu.value_or(*defaults.nu);
  m.rho = spec.rho;
  switch (spec.kind) {
    case MaterialKind::mpm_elastoplastic:
      m.model = spec.extra_bool("use_von_mises", true) ? MpmModel::von_mises : MpmModel::corotated;
      m.yield_stress = spec.extra_number("yield_stress", 1e4);
      break;
    case MaterialKind::mpm_sand:
      m.model = MpmModel::drucker_prager;
      m.friction_angle = spec.extra_number("friction_angle", 45.0);
      break;
    case MaterialKind::mpm_liquid:
      m.model = MpmModel::liquid;
      m.viscosity = spec.extra_bool("viscous", false) ? 0.1 : 0.0;
      break;
    case MaterialKind::mpm_snow:
    case MaterialKind::mpm_muscle:
      if (warnings) {
        warnings->push_back(std::string(sceneconfig::to_string(spec.kind)) +
                            " has no dedicated constitutive model; simulated as fixed corotated elastic");
      }
      m.model = MpmModel::corotated;
      break;
    default:
      m.model = MpmModel::corotated;
  }
  return m;
}

namespace {

std::string describe(const sceneconfig::ObjectSpec& o) {
  return "object " + std::to_string(o.index) + (o.name.empty() ? "" : " (" + o.name + ")");
}

void pin_top_particles(MpmBody& body, double ratio) {
  const auto count = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(body.particles.size())));
  std::vector<std::size_t> order(body.particles.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return body.particles[a].x.z() > body.particles[b].x.z();
  });
  for (std::size_t k = 0; k < count; ++k) body.particles[order[k]].pinned = true;
}

std::vector<Vec3> interior_points(const TriMesh& mesh, double spacing, const std::string& who,
                                  std::vector<std::string>& warnings) {
  std::vector<Vec3> pts = sample_volume(mesh, spacing);
  if (pts.empty()) {
    warnings.push_back(who + ": mesh encloses no particle at spacing " + std::to_string(spacing) +
                       "; using its vertices as particles");
    pts = mesh.vertices;
  }
  return pts;
}

}  // namespace

SimState build_sim(const sceneconfig::SceneConfig& cfg, std::span<const TriMesh> meshes, SimParams params) {
  if (meshes.size() != cfg.objects.size()) {
    throw SimError("build_sim: " + std::to_string(cfg.objects.size()) + " objects but " +
                   std::to_string(meshes.size()) + " meshes");
  }
  SimState s;
  s.params = params;
  s.params.dt = cfg.sim.dt;
  s.params.substeps = cfg.sim.substeps;
  s.forces = cfg.forces;
  const double ps = s.params.particle_size;

  for (std::size_t i = 0; i < cfg.objects.size(); ++i) {
    const sceneconfig::ObjectSpec& obj = cfg.objects[i];
    const sceneconfig::MaterialSpec& mat = obj.material;
    const TriMesh& mesh = meshes[i];
    const std::string who = describe(obj);
    if (mesh.empty()) throw SimError(who + ": empty mesh");
    const Solver solver = sceneconfig::solver_of(mat.kind);

    if (obj.fixed || solver == Solver::rigid) {
      if (obj.fixed && solver != Solver::rigid) {
        s.warnings.push_back(who + ": fixed " + std::string(sceneconfig::to_string(mat.kind)) +
                             " object is simulated as a static collider");
      }
      RigidBody b = make_rigid_from_mesh(mesh, mat.rho, mat.extra_number("friction", 0.7), obj.fixed);
      b.object_index = obj.index;
      s.rigid.push_back(std::move(b));
      continue;
    }

    if (solver == Solver::pbd) {
      PbdBody b;
      switch (mat.kind) {
        case MaterialKind::pbd_cloth:
          b = make_pbd_cloth(mesh, mat.rho, mat.extra_number("stretch_compliance", 1e-7),
                             mat.extra_number("bending_compliance", 1e-5), mat.extra_number("air_resistance", 1e-3));
          break;
        case MaterialKind::pbd_elastic: {
          b = make_pbd_cloth(mesh, 1.0, mat.extra_number("stretch_compliance", 0.0),
                             mat.extra_number("bending_compliance", 0.0), 0.0);
          b.kind = MaterialKind::pbd_elastic;
          b.rest_volume = signed_volume(mesh);
          b.preserve_volume = b.rest_volume > 0.0;
          b.volume_compliance = mat.extra_number("volume_compliance", 0.0);
          const double total = mat.rho * std::max(std::abs(b.rest_volume), 1e-9);
          const double each = total / static_cast<double>(b.x.size());
          std::fill(b.mass.begin(), b.mass.end(), each);
          std::fill(b.inv_mass.begin(), b.inv_mass.end(), 1.0 / each);
          break;
        }
        default: {
          if (mat.kind == MaterialKind::pbd_liquid) {
            s.warnings.push_back(who + ": pbd_liquid is simulated as free particles without density or "
                                       "viscosity relaxation");
          }
          const auto pts = interior_points(mesh, ps, who, s.warnings);
          b = make_pbd_particles(pts, mat.rho * ps * ps * ps, 0.5 * ps);
          b.kind = mat.kind;
        }
      }
      if (obj.fix_top_ratio) pin_top(b, std::clamp(*obj.fix_top_ratio, 0.0, 1.0));
      b.object_index = obj.index;
      s.pbd.push_back(std::move(b));
      continue;
    }

    std::vector<std::string> material_warnings;
    const MpmMaterial material = mpm_material(mat, &material_warnings);
    for (const auto& w : material_warnings) s.warnings.push_back(who + ": " + w);
    MpmBody b = make_mpm_body(interior_points(mesh, ps, who, s.warnings), ps, material);
    for (const MpmParticle& p : b.particles) {
      if ((p.x.array() < s.params.domain_lo).any() || (p.x.array() > s.params.domain_hi).any()) {
        throw SimError(who + ": particles outside the MPM domain [" + std::to_string(s.params.domain_lo) + ", " +
                       std::to_string(s.params.domain_hi) + "]^3");
      }
    }
    if (!b.render_as_particles) embed_surface(b, mesh);
    if (obj.fix_top_ratio) pin_top_particles(b, std::clamp(*obj.fix_top_ratio, 0.0, 1.0));
    b.object_index = obj.index;
    s.mpm.push_back(std::move(b));
  }
  return s;
}

std::vector<ObjectGeometry> scene_geometry(const SimState& state) {
  std::vector<ObjectGeometry> out;
  for (const RigidBody& b : state.rigid) {
    ObjectGeometry g;
    g.object_index = b.object_index;
    g.mesh = b.local_mesh;
    const Mat3 r = b.rotation();
    for (Vec3& v : g.mesh.vertices) v = r * v + b.x;
    out.push_back(std::move(g));
  }
  for (const PbdBody& b : state.pbd) {
    ObjectGeometry g;
    g.object_index = b.object_index;
    if (!b.faces.empty()) {
      g.mesh.vertices = b.x;
      g.mesh.faces = b.faces;
    } else {
      g.points = b.x;
      g.point_radius = b.particle_radius;
    }
    out.push_back(std::move(g));
  }
  for (const MpmBody& b : state.mpm) {
    ObjectGeometry g;
    g.object_index = b.object_index;
    if (b.render_as_particles || b.faces.empty()) {
      for (const MpmParticle& p : b.particles) g.points.push_back(p.x);
      g.point_radius = 0.6 * state.params.particle_size;
    } else {
      g.mesh.faces = b.faces;
      g.mesh.vertices.resize(b.anchor.size());
      for (std::size_t v = 0; v < b.anchor.size(); ++v) {
        const MpmParticle& p = b.particles[b.anchor[v]];
        g.mesh.vertices[v] = p.x + p.F * b.offset[v];
      }
    }
    out.push_back(std::move(g));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ObjectGeometry& a, const ObjectGeometry& b) { return a.object_index < b.object_index; });
  for (ObjectGeometry& g : out) g.mesh.object_id = g.object_index + 2;
  return out;
}

}  // namespace physweave::sim
