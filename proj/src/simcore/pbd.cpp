#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "internal.hpp"

namespace physweave::sim {

PbdBody make_pbd_cloth(const TriMesh& mesh, double density, double stretch_compliance, double bending_compliance,
                       double air_resistance) {
  mesh.validate();
  if (mesh.empty()) throw SimError("pbd body from an empty mesh");
  PbdBody body;
  body.kind = MaterialKind::pbd_cloth;
  body.x = mesh.vertices;
  body.v.assign(mesh.vertices.size(), Vec3::Zero());
  body.mass.assign(mesh.vertices.size(), 0.0);
  body.faces = mesh.faces;
  body.air_resistance = air_resistance;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const double a = triangle_area(mesh, f) * density / 3.0;
    for (int k : mesh.faces[f]) body.mass[k] += a;
  }
  body.inv_mass.resize(body.mass.size());
  for (std::size_t i = 0; i < body.mass.size(); ++i) {
    body.mass[i] = std::max(body.mass[i], 1e-9);
    body.inv_mass[i] = 1.0 / body.mass[i];
  }

  // Edge -> opposite vertices of the faces sharing it.
  std::map<std::pair<int, int>, std::vector<int>> edges;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3], c = f[(k + 2) % 3];
      edges[{std::min(a, b), std::max(a, b)}].push_back(c);
    }
  }
  for (const auto& [e, opposite] : edges) {
    const double rest = (body.x[e.first] - body.x[e.second]).norm();
    body.constraints.push_back({PbdConstraintKind::distance, {e.first, e.second}, rest, stretch_compliance});
    if (opposite.size() == 2 && opposite[0] != opposite[1]) {
      const double bend_rest = (body.x[opposite[0]] - body.x[opposite[1]]).norm();
      body.constraints.push_back(
          {PbdConstraintKind::bending, {opposite[0], opposite[1]}, bend_rest, bending_compliance});
    }
  }
  return body;
}

PbdBody make_pbd_particles(std::span<const Vec3> points, double particle_mass, double radius) {
  if (points.empty()) throw SimError("pbd body with no particles");
  if (!(particle_mass > 0.0)) throw SimError("pbd particle mass must be positive");
  PbdBody body;
  body.kind = MaterialKind::pbd_particle;
  body.x.assign(points.begin(), points.end());
  body.v.assign(points.size(), Vec3::Zero());
  body.mass.assign(points.size(), particle_mass);
  body.inv_mass.assign(points.size(), 1.0 / particle_mass);
  body.particle_collisions = true;
  body.particle_radius = radius;
  return body;
}

void pin_top(PbdBody& body, double ratio) {
  if (ratio < 0.0 || ratio > 1.0) throw SimError("fix_top_ratio must lie in [0, 1]");
  const auto count = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(body.x.size())));
  std::vector<std::size_t> order(body.x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return body.x[a].z() > body.x[b].z(); });
  for (std::size_t k = 0; k < count; ++k) {
    body.inv_mass[order[k]] = 0.0;
    body.v[order[k]].setZero();
  }
}

double constraint_value(const PbdBody& body, const PbdConstraint& c) {
  return (body.x[c.ids[0]] - body.x[c.ids[1]]).norm() - c.rest;
}

void project_constraint(PbdBody& body, const PbdConstraint& c, double h, double& lambda) {
  const int i = c.ids[0], j = c.ids[1];
  const double wi = body.inv_mass[i], wj = body.inv_mass[j];
  const Vec3 d = body.x[i] - body.x[j];
  const double len = d.norm();
  if (len < 1e-12) return;
  const Vec3 grad = d / len;
  const double alpha = c.compliance / (h * h);
  const double denom = wi + wj + alpha;
  if (!(denom > 0.0)) return;
  const double dlambda = (-(len - c.rest) - alpha * lambda) / denom;
  lambda += dlambda;
  body.x[i] += wi * dlambda * grad;
  body.x[j] -= wj * dlambda * grad;
}

namespace detail {

namespace {

double mesh_volume(const PbdBody& b) {
  double v = 0.0;
  for (const auto& f : b.faces) v += b.x[f[0]].dot(b.x[f[1]].cross(b.x[f[2]])) / 6.0;
  return v;
}

void project_volume(PbdBody& b, double h, double& lambda) {
  std::vector<Vec3> grad(b.x.size(), Vec3::Zero());
  for (const auto& f : b.faces) {
    grad[f[0]] += b.x[f[1]].cross(b.x[f[2]]) / 6.0;
    grad[f[1]] += b.x[f[2]].cross(b.x[f[0]]) / 6.0;
    grad[f[2]] += b.x[f[0]].cross(b.x[f[1]]) / 6.0;
  }
  double denom = b.volume_compliance / (h * h);
  for (std::size_t i = 0; i < b.x.size(); ++i) denom += b.inv_mass[i] * grad[i].squaredNorm();
  if (!(denom > 0.0)) return;
  const double alpha = b.volume_compliance / (h * h);
  const double dlambda = (-(mesh_volume(b) - b.rest_volume) - alpha * lambda) / denom;
  lambda += dlambda;
  for (std::size_t i = 0; i < b.x.size(); ++i) b.x[i] += b.inv_mass[i] * dlambda * grad[i];
}

double ground_level(const PbdBody& b) { return b.particle_collisions ? b.particle_radius : 0.0; }

void project_boundaries(const SimState& s, PbdBody& b) {
  const double floor = ground_level(b);
  const double radius = b.particle_collisions ? b.particle_radius : 0.0;
  for (std::size_t i = 0; i < b.x.size(); ++i) {
    if (b.pinned(i)) continue;
    if (b.x[i].z() < floor) b.x[i].z() = floor;
    push_out_of_rigid(s, b.x[i], radius, nullptr);
  }
}

void resolve_particle_overlaps(PbdBody& b) {
  const double r = b.particle_radius;
  const double cell = 2.0 * r;
  const auto key = [cell](const Vec3& p) {
    const auto c = [cell](double v) { return static_cast<std::int64_t>(std::floor(v / cell)) & 0x1fffff; };
    return (static_cast<std::uint64_t>(c(p.x())) << 42) | (static_cast<std::uint64_t>(c(p.y())) << 21) |
           static_cast<std::uint64_t>(c(p.z()));
  };
  std::unordered_map<std::uint64_t, std::vector<int>> grid;
  for (std::size_t i = 0; i < b.x.size(); ++i) grid[key(b.x[i])].push_back(static_cast<int>(i));
  for (std::size_t i = 0; i < b.x.size(); ++i) {
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(key(b.x[i] + cell * Vec3(dx, dy, dz)));
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if (j <= static_cast<int>(i)) continue;
            const Vec3 d = b.x[i] - b.x[j];
            const double len = d.norm();
            const double wi = b.inv_mass[i], wj = b.inv_mass[j];
            if (len >= 2.0 * r || len < 1e-12 || wi + wj <= 0.0) continue;
            const Vec3 corr = (2.0 * r - len) / (wi + wj) * (d / len);
            b.x[i] += wi * corr;
            b.x[j] -= wj * corr;
          }
        }
      }
    }
  }
}

}  // namespace

void pbd_substep(SimState& s, double h, int iterations) {
  FieldContext ctx = field_context(s);
  for (std::size_t bi = 0; bi < s.pbd.size(); ++bi) {
    PbdBody& b = s.pbd[bi];
    const std::size_t n = b.x.size();
    const std::vector<Vec3> x_prev = b.x;
    std::vector<double> predicted_z(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!b.pinned(i)) {
        ctx.particle = particle_id(Solver::pbd, bi, i);
        b.v[i] += h * eval_force_fields(s.forces, b.x[i], b.v[i], s.time, ctx);
        b.v[i] *= 1.0 - b.air_resistance;
        b.x[i] += h * b.v[i];
      }
      predicted_z[i] = b.x[i].z();
    }

    std::vector<double> lambda(b.constraints.size(), 0.0);
    double volume_lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
      for (std::size_t k = 0; k < b.constraints.size(); ++k) project_constraint(b, b.constraints[k], h, lambda[k]);
      if (b.preserve_volume) project_volume(b, h, volume_lambda);
      project_boundaries(s, b);
    }
    if (b.particle_collisions) {
      for (int pass = 0; pass < 2; ++pass) {
        resolve_particle_overlaps(b);
        project_boundaries(s, b);
      }
    }

    // Static/kinetic friction against the ground from the normal correction.
    const double floor = ground_level(b);
    for (std::size_t i = 0; i < n; ++i) {
      if (b.pinned(i) || b.x[i].z() > floor + 1e-12) continue;
      const double depth = floor - predicted_z[i];
      if (depth <= 0.0) continue;
      Vec3 dt = b.x[i] - x_prev[i];
      dt.z() = 0.0;
      const double len = dt.norm();
      const double stop = s.params.ground_friction * depth;
      if (len <= stop) {
        b.x[i].x() = x_prev[i].x();
        b.x[i].y() = x_prev[i].y();
      } else {
        b.x[i] -= (stop / len) * dt;
      }
    }
    for (std::size_t i = 0; i < n; ++i) b.v[i] = b.pinned(i) ? Vec3::Zero() : Vec3((b.x[i] - x_prev[i]) / h);
  }
}

}  // namespace detail

void step_pbd(SimState& state, double dt, int iterations) {
  if (iterations < 0) throw SimError("step_pbd: iterations must be >= 0");
  detail::pbd_substep(state, dt, iterations);
  state.time += dt;
  ++state.tick;
}

}  // namespace physweave::sim
