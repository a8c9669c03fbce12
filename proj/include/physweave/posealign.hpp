#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "physweave/geom.hpp"

namespace physweave::posealign {

/// Plane n.x + d = 0 with unit normal oriented so that n.z >= 0.
struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::vector<std::size_t> inliers;
  double inlier_rms = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

struct RansacParams {
  double distance_threshold = 0.01;
  int min_samples = 3;
  int iterations = 2000;
  double horizontality_threshold = 0.8;
  double ground_percentile = 5.0;
  int max_retries = 8;

  void validate() const;
};

enum class LossKind { huber, tukey };

struct RobustLoss {
  LossKind kind = LossKind::huber;
  double scale = 0.01;

  double rho(double r) const;
  /// IRLS weight rho'(r) / r.
  double weight(double r) const;
};

class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when no attempt produced a plane passing the horizontality check.
class GroundEstimationError : public AlignmentError {
 public:
  GroundEstimationError(const std::string& what, PlaneFit best_rejected, int attempts)
      : AlignmentError(what), best_rejected(std::move(best_rejected)), attempts(attempts) {}
  PlaneFit best_rejected;
  int attempts;
};

// --- Single-object canonical path -----------------------------------------

struct CentroidResult {
  TriMesh mesh;
  Vec3 centroid;
};

CentroidResult centroid_normalize(const TriMesh& mesh);
/// Rotation taking the dominant principal axis of a zero-centered mesh to +z.
Mat3 pca_canonical_rotation(const TriMesh& centered);
TriMesh ground_contact_correct(const TriMesh& mesh);

struct CanonicalResult {
  TriMesh mesh;
  RigidTransform transform;  // input -> output
};
CanonicalResult canonical_align(const TriMesh& mesh);

// --- Ground plane estimation ----------------------------------------------

/// The ceil(p% * n) lowest points by z (ties by original index), in that order.
PointCloud select_ground_candidates(const PointCloud& cloud, double percent);

/// Least-squares plane through points (smallest-eigenvalue direction of the
/// scatter matrix), normal oriented with non-negative z.
PlaneFit fit_plane_least_squares(std::span<const Vec3> points);

PlaneFit ransac_plane(const PointCloud& points, const RansacParams& params, std::uint64_t seed = 0);

/// Union over meshes of vertices with z <= min_z(mesh) + delta.
PointCloud agmf_anchors(std::span<const TriMesh> meshes, double delta);
/// Same as above with the per-mesh default band 0.02 * z-extent, floored at 1e-4 m.
PointCloud agmf_anchors(std::span<const TriMesh> meshes);

struct RobustFitResult {
  PlaneFit plane;
  std::vector<double> objective_trace;  // objective after each accepted iterate
  int iterations = 0;
};

RobustFitResult robust_plane_fit_traced(const PointCloud& anchors, const PlaneFit& seed_plane,
                                        const RobustLoss& loss, int max_iter = 50);
PlaneFit robust_plane_fit(const PointCloud& anchors, const PlaneFit& seed_plane,
                          const RobustLoss& loss, int max_iter = 50);

struct AttemptRecord {
  int attempt = 0;  // 1-based
  double percent = 0.0;
  double distance_threshold = 0.0;
  double horizontality_threshold = 0.0;
  PlaneFit plane;
  double alignment = 0.0;  // |n . gravity_hint|
  bool accepted = false;
};

struct GroundEstimate {
  PlaneFit plane;             // after anchor-guided refinement
  PlaneFit ransac_plane;      // accepted RANSAC plane before refinement
  int attempts_used = 0;
  std::vector<AttemptRecord> attempts;
  bool refined = false;
  std::size_t anchor_count = 0;
};

/// Relaxed parameters for 0-based attempt k (k = 0 reproduces the defaults).
RansacParams relaxed_params(const RansacParams& base, int attempt_index);

GroundEstimate adaptive_ground_estimation(std::span<const TriMesh> meshes,
                                          const RansacParams& params = {},
                                          const Vec3& gravity_hint = Vec3::UnitZ(),
                                          std::uint64_t seed = 0,
                                          std::size_t samples_per_mesh = 5000);

// --- Scene normalization and de-penetration -------------------------------

struct NormalizedScene {
  std::vector<TriMesh> meshes;
  RigidTransform transform;
};

/// x' = R (x - xbar) with R taking the plane normal to +z, then a global shift
/// making the scene-wide minimum z zero. xbar is the vertex centroid of the scene.
NormalizedScene normalize_scene(std::span<const TriMesh> meshes, const PlaneFit& plane);

struct PenetrationParams {
  double padding = 0.01;
  double delta_max = 0.05;
  int iterations = 2;
};

struct PenetrationResult {
  std::vector<TriMesh> meshes;
  std::vector<Vec3> displacements;  // total translation applied per mesh
  int residual_overlaps = 0;        // padded pairs still overlapping
  int residual_strict_overlaps = 0; // pairs overlapping without padding
};

PenetrationResult resolve_penetration(std::span<const TriMesh> meshes,
                                      const PenetrationParams& params = {});

/// Number of mesh pairs whose AABBs overlap after inflating by `padding`.
int count_overlapping_pairs(std::span<const Aabb> boxes, double padding = 0.0);

}  // namespace physweave::posealign
