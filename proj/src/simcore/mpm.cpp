#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include <Eigen/SVD>

#include "internal.hpp"

namespace physweave::sim {

MpmBody make_mpm_body(std::span<const Vec3> points, double spacing, const MpmMaterial& material) {
  if (points.empty()) throw SimError("mpm body with no particles");
  if (!(spacing > 0.0)) throw SimError("mpm particle spacing must be positive");
  if (!(material.E > 0.0) || !(material.rho > 0.0) || material.nu < 0.0 || material.nu >= 0.5) {
    throw SimError("invalid mpm material parameters");
  }
  MpmBody body;
  body.material = material;
  body.render_as_particles = material.model == MpmModel::drucker_prager || material.model == MpmModel::liquid;
  const double volume = spacing * spacing * spacing;
  body.particles.reserve(points.size());
  for (const Vec3& p : points) {
    MpmParticle q;
    q.x = p;
    q.volume = volume;
    q.mass = material.rho * volume;
    body.particles.push_back(q);
  }
  return body;
}

void embed_surface(MpmBody& body, const TriMesh& mesh) {
  mesh.validate();
  body.faces = mesh.faces;
  body.anchor.assign(mesh.vertices.size(), 0);
  body.offset.assign(mesh.vertices.size(), Vec3::Zero());
  if (body.particles.empty()) return;
  // Nearest particle through a coarse hash grid, widening until a hit.
  const Aabb box = aabb(mesh);
  const double cell = std::max(box.extent.maxCoeff() / 16.0, 1e-3);
  const auto key = [cell](const Vec3& p, int dx, int dy, int dz) {
    const auto c = [cell](double v, int d) {
      return static_cast<std::uint64_t>((static_cast<std::int64_t>(std::floor(v / cell)) + d) & 0x1fffff);
    };
    return (c(p.x(), dx) << 42) | (c(p.y(), dy) << 21) | c(p.z(), dz);
  };
  std::unordered_map<std::uint64_t, std::vector<int>> grid;
  for (std::size_t i = 0; i < body.particles.size(); ++i) {
    grid[key(body.particles[i].x, 0, 0, 0)].push_back(static_cast<int>(i));
  }
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec3& p = mesh.vertices[v];
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int ring = 1; best < 0 || ring <= 2; ++ring) {
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dz = -ring; dz <= ring; ++dz) {
            const auto it = grid.find(key(p, dx, dy, dz));
            if (it == grid.end()) continue;
            for (int i : it->second) {
              const double d = (body.particles[i].x - p).squaredNorm();
              if (d < best_d || (d == best_d && i < best)) {
                best_d = d;
                best = i;
              }
            }
          }
        }
      }
      if (ring > 64) break;
    }
    body.anchor[v] = std::max(best, 0);
    body.offset[v] = p - body.particles[body.anchor[v]].x;
  }
}

namespace detail {

namespace {

struct Svd {
  Mat3 U, V;
  Vec3 sigma;
};

// Rotation-only factors; a reflection is pushed into the last singular value.
Svd svd3(const Mat3& F) {
  Eigen::JacobiSVD<Mat3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Svd out{svd.matrixU(), svd.matrixV(), svd.singularValues()};
  if (out.U.determinant() < 0.0) {
    out.U.col(2) *= -1.0;
    out.sigma[2] *= -1.0;
  }
  if (out.V.determinant() < 0.0) {
    out.V.col(2) *= -1.0;
    out.sigma[2] *= -1.0;
  }
  return out;
}

Vec3 log_strain(const Vec3& sigma) { return sigma.cwiseMax(1e-4).array().log().matrix(); }

Mat3 kirchhoff_stress(const MpmMaterial& m, const MpmParticle& p) {
  const double mu = m.mu(), lambda = m.lambda();
  switch (m.model) {
    case MpmModel::corotated:
    case MpmModel::von_mises: {
      const Svd s = svd3(p.F);
      const Mat3 R = s.U * s.V.transpose();
      const double J = s.sigma.prod();
      return 2.0 * mu * (p.F - R) * p.F.transpose() + lambda * (J - 1.0) * J * Mat3::Identity();
    }
    case MpmModel::drucker_prager: {
      const Svd s = svd3(p.F);
      const Vec3 e = log_strain(s.sigma);
      const Vec3 t = 2.0 * mu * e + Vec3::Constant(lambda * e.sum());
      return s.U * t.asDiagonal() * s.U.transpose();
    }
    case MpmModel::liquid: {
      const double bulk = m.E / (3.0 * (1.0 - 2.0 * m.nu));
      Mat3 tau = bulk * (p.J - 1.0) * p.J * Mat3::Identity();
      if (m.viscosity > 0.0) tau += m.viscosity * p.J * (p.C + p.C.transpose());
      return tau;
    }
  }
  return Mat3::Zero();
}

void plastic_projection(const MpmMaterial& m, MpmParticle& p) {
  if (m.model == MpmModel::von_mises) {
    const Svd s = svd3(p.F);
    Vec3 e = log_strain(s.sigma);
    const Vec3 dev = e - Vec3::Constant(e.mean());
    const double norm = dev.norm();
    const double dgamma = norm - m.yield_stress / (2.0 * m.mu());
    if (dgamma > 0.0 && norm > 0.0) {
      e -= (dgamma / norm) * dev;
      p.F = s.U * e.array().exp().matrix().asDiagonal() * s.V.transpose();
    }
  } else if (m.model == MpmModel::drucker_prager) {
    const Svd s = svd3(p.F);
    Vec3 e = log_strain(s.sigma);
    const double tr = e.sum();
    if (tr >= 0.0) {
      p.F = s.U * s.V.transpose();  // separation: stress-free
      return;
    }
    const double mu = m.mu(), lambda = m.lambda();
    const double sin_phi = std::sin(m.friction_angle * std::numbers::pi / 180.0);
    const double alpha = std::sqrt(2.0 / 3.0) * 2.0 * sin_phi / (3.0 - sin_phi);
    const Vec3 dev = e - Vec3::Constant(tr / 3.0);
    const double norm = dev.norm();
    const double dgamma = norm + (3.0 * lambda + 2.0 * mu) / (2.0 * mu) * tr * alpha;
    if (dgamma > 0.0 && norm > 0.0) {
      e -= (dgamma / norm) * dev;
    }
    p.F = s.U * e.array().exp().matrix().asDiagonal() * s.V.transpose();
  }
}

struct Weights {
  Eigen::Vector3i base;
  std::array<Vec3, 3> w;
  Vec3 fx;
};

Weights bspline(const Vec3& x, double lo, double inv_dx) {
  Weights out;
  const Vec3 g = (x - Vec3::Constant(lo)) * inv_dx;
  for (int a = 0; a < 3; ++a) out.base[a] = static_cast<int>(std::floor(g[a] - 0.5));
  out.fx = g - out.base.cast<double>();
  for (int a = 0; a < 3; ++a) {
    const double f = out.fx[a];
    out.w[0][a] = 0.5 * (1.5 - f) * (1.5 - f);
    out.w[1][a] = 0.75 - (f - 1.0) * (f - 1.0);
    out.w[2][a] = 0.5 * (f - 0.5) * (f - 0.5);
  }
  return out;
}

struct Grid {
  Eigen::Vector3i origin = Eigen::Vector3i::Zero();
  Eigen::Vector3i size = Eigen::Vector3i::Zero();
  std::vector<double> mass;
  std::vector<Vec3> mv;
  std::vector<char> pinned;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i - origin.x()) * size.y() + (j - origin.y())) * size.z() + (k - origin.z());
  }
};

}  // namespace

double mpm_substep(SimState& s, double h) {
  if (s.mpm.empty()) return 0.0;
  const SimParams& prm = s.params;
  const double dx = prm.grid_dx, inv_dx = 1.0 / dx;
  const double lo = prm.domain_lo, hi = prm.domain_hi;

  Eigen::Vector3i gmin = Eigen::Vector3i::Constant(std::numeric_limits<int>::max());
  Eigen::Vector3i gmax = Eigen::Vector3i::Constant(std::numeric_limits<int>::min());
  for (const MpmBody& b : s.mpm) {
    for (const MpmParticle& p : b.particles) {
      const Weights wt = bspline(p.x, lo, inv_dx);
      gmin = gmin.cwiseMin(wt.base);
      gmax = gmax.cwiseMax(wt.base);
    }
  }
  Grid grid;
  grid.origin = gmin;
  grid.size = (gmax - gmin).array() + 3;
  const std::size_t nodes = static_cast<std::size_t>(grid.size.x()) * grid.size.y() * grid.size.z();
  grid.mass.assign(nodes, 0.0);
  grid.mv.assign(nodes, Vec3::Zero());
  grid.pinned.assign(nodes, 0);

  // P2G
  FieldContext ctx = field_context(s);
  for (std::size_t bi = 0; bi < s.mpm.size(); ++bi) {
    const MpmBody& b = s.mpm[bi];
    for (std::size_t pi = 0; pi < b.particles.size(); ++pi) {
      const MpmParticle& p = b.particles[pi];
      const Weights wt = bspline(p.x, lo, inv_dx);
      const Mat3 affine = -(h * 4.0 * inv_dx * inv_dx * p.volume) * kirchhoff_stress(b.material, p) + p.mass * p.C;
      ctx.particle = particle_id(Solver::mpm, bi, pi);
      const Vec3 momentum = p.mass * (p.v + h * eval_force_fields(s.forces, p.x, p.v, s.time, ctx));
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          for (int k = 0; k < 3; ++k) {
            const double w = wt.w[i].x() * wt.w[j].y() * wt.w[k].z();
            const Vec3 dpos = (Vec3(i, j, k) - wt.fx) * dx;
            const std::size_t n = grid.index(wt.base.x() + i, wt.base.y() + j, wt.base.z() + k);
            grid.mv[n] += w * (momentum + affine * dpos);
            grid.mass[n] += w * p.mass;
            if (p.pinned && w > 0.0) grid.pinned[n] = 1;
          }
        }
      }
    }
  }

  // Grid update and boundaries.
  double grid_mass = 0.0;
  for (int i = 0; i < grid.size.x(); ++i) {
    for (int j = 0; j < grid.size.y(); ++j) {
      for (int k = 0; k < grid.size.z(); ++k) {
        const Eigen::Vector3i gi = grid.origin + Eigen::Vector3i(i, j, k);
        const std::size_t n = grid.index(gi.x(), gi.y(), gi.z());
        if (grid.mass[n] <= 0.0) continue;
        grid_mass += grid.mass[n];
        Vec3& v = grid.mv[n];
        v /= grid.mass[n];
        const Vec3 X = Vec3::Constant(lo) + gi.cast<double>() * dx;
        if (grid.pinned[n] || X.z() <= 0.0) {
          v.setZero();
          continue;
        }
        for (int a = 0; a < 3; ++a) {
          if (X[a] < lo + 2.0 * dx && v[a] < 0.0) v[a] = 0.0;
          if (X[a] > hi - 2.0 * dx && v[a] > 0.0) v[a] = 0.0;
        }
        for (const RigidBody& body : s.rigid) {
          Vec3 normal;
          if (body.signed_distance(X, &normal) >= 0.0) continue;
          const Vec3 vb = body.velocity_at(X);
          Vec3 rel = v - vb;
          const double vn = rel.dot(normal);
          if (vn < 0.0) rel -= vn * normal;
          v = vb + rel;
        }
      }
    }
  }

  // G2P
  for (MpmBody& b : s.mpm) {
    for (MpmParticle& p : b.particles) {
      const Weights wt = bspline(p.x, lo, inv_dx);
      Vec3 v = Vec3::Zero();
      Mat3 B = Mat3::Zero();
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          for (int k = 0; k < 3; ++k) {
            const double w = wt.w[i].x() * wt.w[j].y() * wt.w[k].z();
            const Vec3 dpos = (Vec3(i, j, k) - wt.fx) * dx;
            const Vec3& gv = grid.mv[grid.index(wt.base.x() + i, wt.base.y() + j, wt.base.z() + k)];
            v += w * gv;
            B += w * gv * dpos.transpose();
          }
        }
      }
      if (p.pinned) {
        p.v.setZero();
        p.C.setZero();
        continue;
      }
      p.v = v;
      p.C = 4.0 * inv_dx * inv_dx * B;
      p.x += h * p.v;
      if (b.material.model == MpmModel::liquid) {
        p.J = std::clamp(p.J * (1.0 + h * p.C.trace()), 0.05, 20.0);
      } else {
        p.F = (Mat3::Identity() + h * p.C) * p.F;
        plastic_projection(b.material, p);
      }
      bool escaped = false;
      for (int a = 0; a < 3; ++a) {
        const double lo_a = lo + dx, hi_a = hi - dx;
        if (p.x[a] < lo_a || p.x[a] > hi_a) {
          p.x[a] = std::clamp(p.x[a], lo_a, hi_a);
          p.v[a] = 0.0;
          escaped = true;
        }
      }
      if (escaped) ++s.diagnostics.escaped_particles;
    }
  }
  return grid_mass;
}

}  // namespace detail

double step_mpm(SimState& state, double dt) {
  const double mass = detail::mpm_substep(state, dt);
  state.time += dt;
  ++state.tick;
  return mass;
}

}  // namespace physweave::sim
