#pragma once

#include "physweave/simcore.hpp"

namespace physweave::sim::detail {

enum class Solver : std::uint64_t { rigid = 1, pbd = 2, mpm = 3 };

constexpr std::uint64_t particle_id(Solver solver, std::size_t body, std::size_t index) {
  return (static_cast<std::uint64_t>(solver) << 56) ^ (static_cast<std::uint64_t>(body) << 32) ^ index;
}

inline FieldContext field_context(const SimState& s) {
  FieldContext ctx;
  ctx.frame = s.frame;
  ctx.seed = s.params.seed;
  ctx.tick = s.tick;
  return ctx;
}

// Each advances its solver by h without touching time, tick or frame.
void rigid_substep(SimState& s, double h);
void pbd_substep(SimState& s, double h, int iterations);
double mpm_substep(SimState& s, double h);

/// Pushes p out of every rigid proxy; returns true if it moved. `normal`
/// receives the last push direction.
bool push_out_of_rigid(const SimState& s, Vec3& p, double radius, Vec3* normal);

}  // namespace physweave::sim::detail
