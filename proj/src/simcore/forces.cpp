#include <cmath>
#include <numbers>

#include "physweave/random.hpp"
#include "physweave/simcore.hpp"

namespace physweave::sim {

using sceneconfig::ForceKind;

namespace {

Vec3 unit_or_zero(const Vec3& d) {
  const double n = d.norm();
  return n > 0.0 ? Vec3(d / n) : Vec3::Zero();
}

}  // namespace

Vec3 eval_force_field(const ForceFieldSpec& spec, const Vec3& x, const Vec3& v, double t_seconds,
                      const FieldContext& ctx) {
  if (!spec.active_at(ctx.frame)) return Vec3::Zero();
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  switch (spec.kind) {
    case ForceKind::constant:
      return spec.strength * unit_or_zero(spec.direction);
    case ForceKind::wind: {
      Vec3 a = spec.strength * unit_or_zero(spec.direction);
      if (spec.localized) {
        if (!(spec.radius > 0.0)) return Vec3::Zero();
        a *= std::exp(-(x - spec.position).squaredNorm() / (spec.radius * spec.radius));
      }
      return a;
    }
    case ForceKind::point: {
      const Vec3 d = spec.position - x;
      const double r = d.norm();
      if (r < 1e-9) return Vec3::Zero();
      return spec.strength * (d / r) * std::pow(r, -spec.falloff_power);
    }
    case ForceKind::drag:
      return -(spec.linear * v + spec.quadratic * v.norm() * v);
    case ForceKind::vortex: {
      const Vec3 axis = unit_or_zero(spec.direction);
      const Vec3 r = x - spec.position;
      const Vec3 radial = r - r.dot(axis) * axis;
      const double rn = radial.norm();
      if (rn < 1e-9 || axis.isZero()) return Vec3::Zero();
      return spec.perpendicular_strength * axis.cross(radial / rn);
    }
    case ForceKind::turbulence: {
      // Three orthogonal travelling sinusoids with seeded phases.
      Vec3 a;
      for (int k = 0; k < 3; ++k) {
        const double phase = kTwoPi * to_unit(hash_key(ctx.seed, 0x7475726275ULL, ctx.field, k));
        a[k] = std::sin(kTwoPi * spec.frequency * (x[(k + 1) % 3] + t_seconds) + phase);
      }
      return spec.strength * a;
    }
    case ForceKind::noise: {
      Vec3 a;
      for (int k = 0; k < 3; ++k) {
        const std::uint64_t bits = hash_key(ctx.seed ^ (0x6e6f697365ULL + ctx.field), ctx.tick, ctx.particle, k);
        a[k] = 2.0 * to_unit(bits) - 1.0;
      }
      return spec.strength * a;
    }
  }
  return Vec3::Zero();
}

Vec3 eval_force_fields(std::span<const ForceFieldSpec> fields, const Vec3& x, const Vec3& v, double t_seconds,
                       FieldContext ctx) {
  Vec3 a = Vec3::Zero();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    ctx.field = i;
    a += eval_force_field(fields[i], x, v, t_seconds, ctx);
  }
  return a;
}

}  // namespace physweave::sim
