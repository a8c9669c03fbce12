#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "physweave/geom.hpp"
#include "physweave/sceneconfig.hpp"

namespace physweave::sim {

using sceneconfig::ForceFieldSpec;
using sceneconfig::MaterialKind;

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or infinity found in solver state after a step.
class SimulationDiverged : public SimError {
 public:
  SimulationDiverged(std::string solver, int frame);
  const std::string& solver() const { return solver_; }
  int frame() const { return frame_; }

 private:
  std::string solver_;
  int frame_;
};

// --- Force fields ----------------------------------------------------------

/// Identifies one evaluation for the stochastic fields (noise, turbulence phase).
struct FieldContext {
  int frame = 0;
  std::uint64_t seed = 0;
  std::uint64_t field = 0;     // index of the field in the scene
  std::uint64_t tick = 0;      // global substep counter
  std::uint64_t particle = 0;  // stable per-particle id
};

/// Acceleration (m/s^2) of one field at x with velocity v. Fields not yet
/// active at ctx.frame contribute zero; singular points return zero.
Vec3 eval_force_field(const ForceFieldSpec& spec, const Vec3& x, const Vec3& v, double t_seconds,
                      const FieldContext& ctx = {});

/// Sum over all fields; ctx.field is set to each field's index.
Vec3 eval_force_fields(std::span<const ForceFieldSpec> fields, const Vec3& x, const Vec3& v, double t_seconds,
                       FieldContext ctx);

// --- State -----------------------------------------------------------------

enum class ProxyShape { box, sphere };

struct RigidBody {
  int object_index = -1;
  Vec3 x = Vec3::Zero();  // center of mass, world
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
  double mass = 1.0;
  Mat3 inertia_body = Mat3::Identity();
  double friction = 0.7;
  bool fixed = false;

  ProxyShape shape = ProxyShape::box;
  Vec3 proxy_center = Vec3::Zero();  // body frame
  Vec3 half_extents = Vec3::Constant(0.5);
  double radius = 0.5;

  TriMesh local_mesh;  // body frame, for rendering

  Mat3 rotation() const { return q.toRotationMatrix(); }
  Vec3 to_world(const Vec3& local) const { return rotation() * local + x; }
  double inv_mass() const { return fixed ? 0.0 : 1.0 / mass; }
  Mat3 inv_inertia_world() const;
  Vec3 velocity_at(const Vec3& p) const { return v + w.cross(p - x); }
  /// Corners of the box proxy in world coordinates.
  std::array<Vec3, 8> corners() const;
  double lowest_z() const;
  /// Signed distance from p to the proxy surface (negative inside) and the
  /// outward surface normal at the closest point.
  double signed_distance(const Vec3& p, Vec3* normal) const;
};

RigidBody make_rigid_sphere(const Vec3& center, double radius, double mass);
RigidBody make_rigid_box(const Vec3& center, const Vec3& size, double mass);
/// Proxy, mass and inertia from a closed mesh: a sphere when the vertices are
/// nearly equidistant from the box center, else the axis-aligned box.
RigidBody make_rigid_from_mesh(const TriMesh& mesh, double density, double friction, bool fixed);

/// Distance-type constraints: `bending` joins the two vertices opposite a
/// shared edge and uses the bending compliance.
enum class PbdConstraintKind { distance, bending };

struct PbdConstraint {
  PbdConstraintKind kind = PbdConstraintKind::distance;
  std::array<int, 2> ids{};
  double rest = 0.0;
  double compliance = 0.0;  // 1/Pa
};

struct PbdBody {
  int object_index = -1;
  MaterialKind kind = MaterialKind::pbd_particle;
  std::vector<Vec3> x, v;
  std::vector<double> mass;
  std::vector<double> inv_mass;  // 0 for pinned particles
  std::vector<PbdConstraint> constraints;
  std::vector<std::array<int, 3>> faces;  // surface for rendering and volume
  bool preserve_volume = false;
  double rest_volume = 0.0;
  double volume_compliance = 0.0;
  double air_resistance = 0.0;
  bool particle_collisions = false;  // granular bodies without a mesh
  double particle_radius = 0.005;

  bool pinned(std::size_t i) const { return inv_mass[i] == 0.0; }
};

/// Cloth or shell: one particle per vertex, edge and bending constraints.
/// Vertex mass is density (kg/m^2) times a third of the incident area.
PbdBody make_pbd_cloth(const TriMesh& mesh, double density, double stretch_compliance, double bending_compliance,
                       double air_resistance);
/// Free particles with per-particle mass.
PbdBody make_pbd_particles(std::span<const Vec3> points, double particle_mass, double radius);
/// Pins the topmost `ratio` fraction of particles by initial z.
void pin_top(PbdBody& body, double ratio);

double constraint_value(const PbdBody& body, const PbdConstraint& c);
/// One XPBD projection of c with step h; updates the accumulated multiplier.
void project_constraint(PbdBody& body, const PbdConstraint& c, double h, double& lambda);

enum class MpmModel { corotated, von_mises, drucker_prager, liquid };

struct MpmMaterial {
  MpmModel model = MpmModel::corotated;
  double E = 3e5, nu = 0.2, rho = 1000.0;
  double yield_stress = 1e4;     // von_mises
  double friction_angle = 45.0;  // degrees, drucker_prager
  double viscosity = 0.0;        // Pa s, liquid

  double mu() const { return E / (2.0 * (1.0 + nu)); }
  double lambda() const { return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)); }
};

struct MpmParticle {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 F = Mat3::Identity();
  Mat3 C = Mat3::Zero();
  double mass = 0.0;
  double volume = 0.0;
  double J = 1.0;  // liquid volume ratio
  bool pinned = false;
};

struct MpmBody {
  int object_index = -1;
  MpmMaterial material;
  std::vector<MpmParticle> particles;
  bool render_as_particles = false;
  /// Surface embedding: each vertex follows particle `anchor` as x_p + F_p * offset.
  std::vector<std::array<int, 3>> faces;
  std::vector<int> anchor;
  std::vector<Vec3> offset;
};

MpmBody make_mpm_body(std::span<const Vec3> points, double spacing, const MpmMaterial& material);
/// Attaches a surface mesh that follows the particles.
void embed_surface(MpmBody& body, const TriMesh& mesh);

struct SimParams {
  double dt = 0.004;
  int substeps = 10;
  int pbd_iterations = 10;
  double particle_size = 0.01;
  double grid_dx = 0.02;
  double domain_lo = -2.0;
  double domain_hi = 2.0;
  double ground_friction = 0.5;  // particles on the ground plane
  std::uint64_t seed = 0;
};

struct Diagnostics {
  long long escaped_particles = 0;
  int rigid_contacts = 0;
};

struct SimState {
  SimParams params;
  std::vector<RigidBody> rigid;
  std::vector<PbdBody> pbd;
  std::vector<MpmBody> mpm;
  std::vector<ForceFieldSpec> forces;
  int frame = 0;
  std::uint64_t tick = 0;  // substeps taken
  double time = 0.0;
  Diagnostics diagnostics;
  std::vector<std::string> warnings;

  double total_particle_mass() const;
  double kinetic_energy() const;
};

struct StepReport {
  int frame = 0;  // frame index just simulated
  int active_fields = 0;
  double rigid_ms = 0.0, pbd_ms = 0.0, mpm_ms = 0.0;
  int rigid_contacts = 0;
  long long escaped_particles = 0;
  double kinetic_energy = 0.0;
};

std::string to_json(const StepReport& report);

// --- Stepping --------------------------------------------------------------

/// Advances the rigid bodies by dt in `substeps` equal substeps.
void step_rigid(SimState& state, double dt, int substeps);
/// One XPBD substep of length dt with `iterations` Gauss-Seidel passes.
void step_pbd(SimState& state, double dt, int iterations);
/// One MLS-MPM substep of length dt; returns the grid mass after P2G.
double step_mpm(SimState& state, double dt);

/// One frame: params.substeps rounds of rigid, PBD, MPM at dt/substeps, then
/// the frame counter increments. Throws SimulationDiverged on NaN.
StepReport sim_step(SimState& state);

using FrameCallback = std::function<void(const SimState&, const StepReport&)>;
void run_sim(SimState& state, int steps, const FrameCallback& on_frame = {});

/// Scene assembly from a parsed config and one mesh per object (by index).
SimState build_sim(const sceneconfig::SceneConfig& cfg, std::span<const TriMesh> meshes, SimParams params = {});
MpmMaterial mpm_material(const sceneconfig::MaterialSpec& spec, std::vector<std::string>* warnings = nullptr);

// --- Geometry snapshot -----------------------------------------------------

struct ObjectGeometry {
  int object_index = -1;
  TriMesh mesh;               // empty when drawn as particles
  std::vector<Vec3> points;   // particle positions when mesh is empty
  double point_radius = 0.0;
};

/// Current world-space geometry of every object, ordered by object index.
std::vector<ObjectGeometry> scene_geometry(const SimState& state);

}  // namespace physweave::sim
