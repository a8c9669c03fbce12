#include <algorithm>
#include <cmath>
#include <numbers>

#include "internal.hpp"

namespace physweave::sim {

namespace {

constexpr int kContactIterations = 12;
constexpr double kContactMargin = 1e-3;
constexpr double kPairSlop = 1e-4;

Mat3 box_inertia(double mass, const Vec3& half) {
  const Vec3 s = 2.0 * half;
  return (mass / 12.0) *
         Vec3(s.y() * s.y() + s.z() * s.z(), s.x() * s.x() + s.z() * s.z(), s.x() * s.x() + s.y() * s.y())
             .asDiagonal()
             .toDenseMatrix();
}

Mat3 sphere_inertia(double mass, double r) { return (0.4 * mass * r * r) * Mat3::Identity(); }

double bounding_radius(const RigidBody& b) {
  return b.proxy_center.norm() + (b.shape == ProxyShape::sphere ? b.radius : b.half_extents.norm());
}

}  // namespace

Mat3 RigidBody::inv_inertia_world() const {
  if (fixed) return Mat3::Zero();
  const Mat3 r = rotation();
  return r * inertia_body.inverse() * r.transpose();
}

std::array<Vec3, 8> RigidBody::corners() const {
  std::array<Vec3, 8> out;
  const Mat3 r = rotation();
  for (int i = 0; i < 8; ++i) {
    const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[i] = r * (proxy_center + s.cwiseProduct(half_extents)) + x;
  }
  return out;
}

double RigidBody::lowest_z() const {
  if (shape == ProxyShape::sphere) return to_world(proxy_center).z() - radius;
  double z = std::numeric_limits<double>::infinity();
  for (const Vec3& c : corners()) z = std::min(z, c.z());
  return z;
}

double RigidBody::signed_distance(const Vec3& p, Vec3* normal) const {
  if (shape == ProxyShape::sphere) {
    const Vec3 d = p - to_world(proxy_center);
    const double n = d.norm();
    if (normal) *normal = n > 1e-12 ? Vec3(d / n) : Vec3::UnitZ();
    return n - radius;
  }
  const Mat3 r = rotation();
  const Vec3 local = r.transpose() * (p - x) - proxy_center;
  const Vec3 q = local.cwiseAbs() - half_extents;
  Vec3 n_local;
  double dist;
  if (q.maxCoeff() > 0.0) {
    const Vec3 outside = q.cwiseMax(0.0);
    dist = outside.norm();
    n_local = outside.cwiseProduct(local.cwiseSign()) / dist;
  } else {
    int axis;
    dist = q.maxCoeff(&axis);
    n_local = Vec3::Zero();
    n_local[axis] = local[axis] >= 0.0 ? 1.0 : -1.0;
  }
  if (normal) *normal = r * n_local;
  return dist;
}

RigidBody make_rigid_sphere(const Vec3& center, double radius, double mass) {
  RigidBody b;
  b.x = center;
  b.mass = mass;
  b.shape = ProxyShape::sphere;
  b.radius = radius;
  b.half_extents = Vec3::Constant(radius);
  b.inertia_body = sphere_inertia(mass, radius);
  return b;
}

RigidBody make_rigid_box(const Vec3& center, const Vec3& size, double mass) {
  RigidBody b;
  b.x = center;
  b.mass = mass;
  b.shape = ProxyShape::box;
  b.half_extents = 0.5 * size;
  b.radius = b.half_extents.norm();
  b.inertia_body = box_inertia(mass, b.half_extents);
  return b;
}

RigidBody make_rigid_from_mesh(const TriMesh& mesh, double density, double friction, bool fixed) {
  if (mesh.empty()) throw SimError("rigid body from an empty mesh");
  const Aabb box = aabb(mesh);
  const Vec3 half = (0.5 * box.extent).cwiseMax(1e-3);

  // Volume and centroid by signed tetrahedra; open meshes fall back to the box.
  double volume = 0.0;
  Vec3 moment = Vec3::Zero();
  for (const auto& f : mesh.faces) {
    const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
    const double v = a.dot(b.cross(c)) / 6.0;
    volume += v;
    moment += v * (a + b + c) / 4.0;
  }
  const double box_volume = 8.0 * half.prod();
  Vec3 com = box.center;
  if (std::abs(volume) > 1e-3 * box_volume) {
    com = moment / volume;
    volume = std::abs(volume);
  } else {
    volume = box_volume;
  }

  RigidBody b;
  b.x = com;
  b.mass = density * volume;
  b.friction = friction;
  b.fixed = fixed;
  b.local_mesh = mesh;
  for (Vec3& v : b.local_mesh.vertices) v -= com;
  b.proxy_center = box.center - com;

  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  for (const Vec3& v : mesh.vertices) {
    const double d = (v - box.center).norm();
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  const bool round = dmin > 0.92 * dmax && half.minCoeff() > 0.9 * half.maxCoeff() &&
                     volume > 0.8 * (4.0 / 3.0) * std::numbers::pi * dmax * dmax * dmax;
  if (round) {
    b.shape = ProxyShape::sphere;
    b.radius = dmax;
    b.half_extents = Vec3::Constant(dmax);
    b.inertia_body = sphere_inertia(b.mass, dmax);
  } else {
    b.shape = ProxyShape::box;
    b.half_extents = half;
    b.radius = half.norm();
    b.inertia_body = box_inertia(b.mass, half);
  }
  return b;
}

namespace detail {

namespace {

struct Contact {
  int a = 0;
  int b = -1;  // -1: ground plane
  Vec3 p = Vec3::Zero();
  Vec3 n = Vec3::UnitZ();  // pushes body a
  double gap = 0.0;
  double mu = 0.0;
  double jn = 0.0;
  Vec3 jt = Vec3::Zero();
};

struct BodyCache {
  double inv_m = 0.0;
  Mat3 inv_i = Mat3::Zero();
};

void add_pair_contacts(const std::vector<RigidBody>& bodies, int ia, int ib, double margin,
                       std::vector<Contact>& out) {
  const RigidBody& a = bodies[ia];
  const RigidBody& b = bodies[ib];
  const double mu = std::sqrt(a.friction * b.friction);
  const auto push = [&](int first, int second, const Vec3& p, const Vec3& n, double gap) {
    if (gap < margin) out.push_back({first, second, p, n, gap, mu});
  };
  Vec3 n;
  if (a.shape == ProxyShape::sphere && b.shape == ProxyShape::sphere) {
    const double gap = b.signed_distance(a.to_world(a.proxy_center), &n) - a.radius;
    push(ia, ib, a.to_world(a.proxy_center) - a.radius * n, n, gap);
    return;
  }
  if (a.shape == ProxyShape::sphere || b.shape == ProxyShape::sphere) {
    const int is = a.shape == ProxyShape::sphere ? ia : ib;
    const int ibox = is == ia ? ib : ia;
    const RigidBody& s = bodies[is];
    const Vec3 c = s.to_world(s.proxy_center);
    const double gap = bodies[ibox].signed_distance(c, &n) - s.radius;
    push(is, ibox, c - s.radius * n, n, gap);
    return;
  }
  for (const Vec3& c : a.corners()) {
    const double gap = b.signed_distance(c, &n);
    push(ia, ib, c, n, gap);
  }
  for (const Vec3& c : b.corners()) {
    const double gap = a.signed_distance(c, &n);
    push(ib, ia, c, n, gap);
  }
}

std::vector<Contact> detect_contacts(const std::vector<RigidBody>& bodies, double h) {
  std::vector<Contact> out;
  std::vector<double> margin(bodies.size());
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const RigidBody& b = bodies[i];
    margin[i] = kContactMargin + h * (b.v.norm() + b.w.norm() * bounding_radius(b));
  }
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const RigidBody& b = bodies[i];
    if (b.fixed) continue;
    const int ii = static_cast<int>(i);
    if (b.shape == ProxyShape::sphere) {
      const double gap = b.lowest_z();
      if (gap < margin[i]) {
        out.push_back({ii, -1, b.to_world(b.proxy_center) - b.radius * Vec3::UnitZ(), Vec3::UnitZ(), gap, b.friction});
      }
    } else {
      for (const Vec3& c : b.corners()) {
        if (c.z() < margin[i]) out.push_back({ii, -1, c, Vec3::UnitZ(), c.z(), b.friction});
      }
    }
  }
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    for (std::size_t j = i + 1; j < bodies.size(); ++j) {
      if (bodies[i].fixed && bodies[j].fixed) continue;
      const double reach = bounding_radius(bodies[i]) + bounding_radius(bodies[j]) + margin[i] + margin[j];
      if ((bodies[i].x - bodies[j].x).squaredNorm() > reach * reach) continue;
      add_pair_contacts(bodies, static_cast<int>(i), static_cast<int>(j), margin[i] + margin[j], out);
    }
  }
  return out;
}

Vec3 velocity_at(const RigidBody& body, const Vec3& p) { return body.velocity_at(p); }

double effective_inverse_mass(const std::vector<RigidBody>& bodies, const std::vector<BodyCache>& cache,
                              const Contact& c, const Vec3& d) {
  const auto term = [&](int i) {
    if (i < 0) return 0.0;
    const Vec3 r = c.p - bodies[i].x;
    return cache[i].inv_m + d.dot((cache[i].inv_i * r.cross(d)).cross(r));
  };
  return term(c.a) + term(c.b);
}

void apply_impulse(std::vector<RigidBody>& bodies, const std::vector<BodyCache>& cache, const Contact& c,
                   const Vec3& j) {
  RigidBody& a = bodies[c.a];
  a.v += cache[c.a].inv_m * j;
  a.w += cache[c.a].inv_i * (c.p - a.x).cross(j);
  if (c.b >= 0) {
    RigidBody& b = bodies[c.b];
    b.v -= cache[c.b].inv_m * j;
    b.w -= cache[c.b].inv_i * (c.p - b.x).cross(j);
  }
}

Vec3 relative_velocity(const std::vector<RigidBody>& bodies, const Contact& c) {
  Vec3 v = velocity_at(bodies[c.a], c.p);
  if (c.b >= 0) v -= velocity_at(bodies[c.b], c.p);
  return v;
}

void solve_contacts(std::vector<RigidBody>& bodies, std::vector<Contact>& contacts, double h) {
  std::vector<BodyCache> cache(bodies.size());
  for (std::size_t i = 0; i < bodies.size(); ++i) cache[i] = {bodies[i].inv_mass(), bodies[i].inv_inertia_world()};
  std::vector<double> kn(contacts.size());
  for (std::size_t k = 0; k < contacts.size(); ++k) {
    kn[k] = effective_inverse_mass(bodies, cache, contacts[k], contacts[k].n);
  }

  for (int it = 0; it < kContactIterations; ++it) {
    for (std::size_t k = 0; k < contacts.size(); ++k) {
      Contact& c = contacts[k];
      if (!(kn[k] > 0.0)) continue;
      // Normal: speculative contacts may close the gap within this substep.
      const double vn = relative_velocity(bodies, c).dot(c.n);
      const double bias = std::max(c.gap, 0.0) / h;
      const double jn_new = std::max(c.jn - (vn + bias) / kn[k], 0.0);
      apply_impulse(bodies, cache, c, (jn_new - c.jn) * c.n);
      c.jn = jn_new;

      // Coulomb friction, clamped to the accumulated normal impulse.
      const Vec3 vrel = relative_velocity(bodies, c);
      const Vec3 vt = vrel - vrel.dot(c.n) * c.n;
      const double vt_norm = vt.norm();
      if (vt_norm < 1e-14) continue;
      const Vec3 t = vt / vt_norm;
      const double kt = effective_inverse_mass(bodies, cache, c, t);
      Vec3 jt_new = c.jt - (vt_norm / kt) * t;
      const double limit = c.mu * c.jn;
      if (jt_new.norm() > limit) jt_new *= limit / jt_new.norm();
      apply_impulse(bodies, cache, c, jt_new - c.jt);
      c.jt = jt_new;
    }
  }
}

void stabilize_positions(std::vector<RigidBody>& bodies) {
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<Contact> contacts;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      for (std::size_t j = i + 1; j < bodies.size(); ++j) {
        if (bodies[i].fixed && bodies[j].fixed) continue;
        const double reach = bounding_radius(bodies[i]) + bounding_radius(bodies[j]);
        if ((bodies[i].x - bodies[j].x).squaredNorm() > reach * reach) continue;
        add_pair_contacts(bodies, static_cast<int>(i), static_cast<int>(j), -kPairSlop, contacts);
      }
    }
    // Deepest contact per ordered pair.
    std::sort(contacts.begin(), contacts.end(), [](const Contact& l, const Contact& r) {
      return std::tie(l.a, l.b, l.gap) < std::tie(r.a, r.b, r.gap);
    });
    for (std::size_t k = 0; k < contacts.size(); ++k) {
      const Contact& c = contacts[k];
      if (k > 0 && contacts[k - 1].a == c.a && contacts[k - 1].b == c.b) continue;
      RigidBody& a = bodies[c.a];
      RigidBody& b = bodies[c.b];
      const double wa = a.inv_mass(), wb = b.inv_mass();
      if (wa + wb <= 0.0) continue;
      const double depth = -c.gap - kPairSlop;
      a.x += (depth * wa / (wa + wb)) * c.n;
      b.x -= (depth * wb / (wa + wb)) * c.n;
    }
  }
  for (RigidBody& b : bodies) {
    if (b.fixed) continue;
    const double z = b.lowest_z();
    if (z < 0.0) b.x.z() -= z;
  }
}

}  // namespace

void rigid_substep(SimState& s, double h) {
  auto& bodies = s.rigid;
  if (bodies.empty()) return;
  FieldContext ctx = field_context(s);
  std::vector<Vec3> v_start(bodies.size());
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    RigidBody& b = bodies[i];
    v_start[i] = b.v;
    if (b.fixed) {
      b.v.setZero();
      b.w.setZero();
      continue;
    }
    ctx.particle = particle_id(Solver::rigid, i, 0);
    b.v += h * eval_force_fields(s.forces, b.x, b.v, s.time, ctx);
    // Torque-free Euler equation; contacts add torque through impulses.
    const Mat3 r = b.rotation();
    const Mat3 inertia = r * b.inertia_body * r.transpose();
    b.w -= h * (inertia.inverse() * b.w.cross(inertia * b.w));
  }

  std::vector<Contact> contacts = detect_contacts(bodies, h);
  solve_contacts(bodies, contacts, h);
  s.diagnostics.rigid_contacts = static_cast<int>(contacts.size());
  std::vector<char> touched(bodies.size(), 0);
  for (const Contact& c : contacts) {
    if (c.jn > 0.0) {
      touched[c.a] = 1;
      if (c.b >= 0) touched[c.b] = 1;
    }
  }

  for (std::size_t i = 0; i < bodies.size(); ++i) {
    RigidBody& b = bodies[i];
    if (b.fixed) continue;
    // Free flight uses the trapezoid rule, exact under constant acceleration.
    b.x += touched[i] ? Vec3(h * b.v) : Vec3(0.5 * h * (v_start[i] + b.v));
    const Eigen::Quaterniond spin(0.0, b.w.x(), b.w.y(), b.w.z());
    Eigen::Quaterniond dq = spin * b.q;
    b.q.coeffs() += 0.5 * h * dq.coeffs();
    b.q.normalize();
  }
  stabilize_positions(bodies);
}

bool push_out_of_rigid(const SimState& s, Vec3& p, double radius, Vec3* normal) {
  bool moved = false;
  for (const RigidBody& b : s.rigid) {
    Vec3 n;
    const double d = b.signed_distance(p, &n) - radius;
    if (d < 0.0) {
      p -= d * n;
      if (normal) *normal = n;
      moved = true;
    }
  }
  return moved;
}

}  // namespace detail

void step_rigid(SimState& state, double dt, int substeps) {
  if (substeps < 1) throw SimError("step_rigid: substeps must be >= 1");
  const double h = dt / substeps;
  for (int k = 0; k < substeps; ++k) {
    detail::rigid_substep(state, h);
    state.time += h;
    ++state.tick;
  }
}

}  // namespace physweave::sim
