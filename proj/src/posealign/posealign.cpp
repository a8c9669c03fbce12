#include "physweave/posealign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "physweave/random.hpp"

namespace physweave::posealign {

namespace {

// Flip so that n.z >= 0; exact-zero z falls back to x, then y.
Vec3 orient_up(Vec3 n) {
  for (int a : {2, 0, 1}) {
    if (n[a] > 0.0) return n;
    if (n[a] < 0.0) return -n;
  }
  return n;
}

void orient_plane(PlaneFit& plane) {
  const Vec3 n = orient_up(plane.normal);
  if (n.dot(plane.normal) < 0.0) plane.offset = -plane.offset;
  plane.normal = n;
}

void fill_inliers(PlaneFit& plane, std::span<const Vec3> points, double threshold) {
  plane.inliers.clear();
  double sq = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = plane.signed_distance(points[i]);
    if (std::abs(r) <= threshold) {
      plane.inliers.push_back(i);
      sq += r * r;
    }
  }
  plane.inlier_rms = plane.inliers.empty() ? 0.0 : std::sqrt(sq / plane.inliers.size());
}

double default_anchor_band(const TriMesh& mesh) {
  const Aabb box = aabb(mesh);
  return std::max(0.02 * box.extent.z(), 1e-4);
}

}  // namespace

void RansacParams::validate() const {
  if (!(distance_threshold > 0.0)) throw AlignmentError("RANSAC distance threshold must be > 0");
  if (min_samples < 3) throw AlignmentError("RANSAC min_samples must be >= 3");
  if (iterations < 1) throw AlignmentError("RANSAC iterations must be >= 1");
  if (!(horizontality_threshold > 0.0 && horizontality_threshold <= 1.0)) {
    throw AlignmentError("horizontality threshold must be in (0, 1]");
  }
  if (!(ground_percentile > 0.0 && ground_percentile <= 100.0)) {
    throw AlignmentError("ground percentile must be in (0, 100]");
  }
  if (max_retries < 1) throw AlignmentError("max_retries must be >= 1");
}

double RobustLoss::rho(double r) const {
  const double a = std::abs(r);
  if (kind == LossKind::huber) {
    return a <= scale ? 0.5 * a * a : scale * (a - 0.5 * scale);
  }
  const double c2 = scale * scale;
  if (a >= scale) return c2 / 6.0;
  const double t = 1.0 - (a * a) / c2;
  return c2 / 6.0 * (1.0 - t * t * t);
}

double RobustLoss::weight(double r) const {
  const double a = std::abs(r);
  if (kind == LossKind::huber) return a <= scale ? 1.0 : scale / a;
  if (a >= scale) return 0.0;
  const double t = 1.0 - (a * a) / (scale * scale);
  return t * t;
}

// --- Single object ---------------------------------------------------------

CentroidResult centroid_normalize(const TriMesh& mesh) {
  if (mesh.empty()) throw AlignmentError("centroid_normalize: empty mesh");
  const Vec3 c = vertex_centroid(mesh);
  TriMesh out = mesh;
  for (auto& v : out.vertices) v -= c;
  return {std::move(out), c};
}

Mat3 pca_canonical_rotation(const TriMesh& centered) {
  if (centered.empty()) throw AlignmentError("pca_canonical_rotation: empty mesh");
  Mat3 cov = Mat3::Zero();
  for (const auto& v : centered.vertices) cov += v * v.transpose();
  cov /= static_cast<double>(centered.vertices.size());

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 lambda = eig.eigenvalues();  // ascending
  const double l1 = lambda[2], l2 = lambda[1];
  if (!(l1 > 1e-300)) throw AlignmentError("pca_canonical_rotation: degenerate covariance");
  if (l1 - l2 < 1e-9 * l1) return Mat3::Identity();

  Vec3 u1 = eig.eigenvectors().col(2).normalized();
  if (std::abs(u1.z()) > 1e-12) {
    if (u1.z() < 0.0) u1 = -u1;
  } else if (u1.x() < 0.0) {
    u1 = -u1;
  }
  return rodrigues_between(u1, Vec3::UnitZ());
}

TriMesh ground_contact_correct(const TriMesh& mesh) {
  if (mesh.empty()) throw AlignmentError("ground_contact_correct: empty mesh");
  double zmin = std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices) zmin = std::min(zmin, v.z());
  TriMesh out = mesh;
  for (auto& v : out.vertices) v.z() -= zmin;
  return out;
}

CanonicalResult canonical_align(const TriMesh& mesh) {
  auto [centered, c] = centroid_normalize(mesh);
  const Mat3 r = pca_canonical_rotation(centered);
  TriMesh rotated = apply_transform(centered, {r, Vec3::Zero()});
  double zmin = std::numeric_limits<double>::infinity();
  for (const auto& v : rotated.vertices) zmin = std::min(zmin, v.z());
  TriMesh out = ground_contact_correct(rotated);
  RigidTransform tf{r, -(r * c) - Vec3(0.0, 0.0, zmin)};
  return {std::move(out), tf};
}

// --- Plane estimation ------------------------------------------------------

PointCloud select_ground_candidates(const PointCloud& cloud, double percent) {
  if (cloud.empty()) throw AlignmentError("select_ground_candidates: empty cloud");
  if (!(percent > 0.0 && percent <= 100.0)) {
    throw AlignmentError("select_ground_candidates: percent must be in (0, 100]");
  }
  const std::size_t n = cloud.size();
  const auto count = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(percent * static_cast<double>(n) / 100.0 - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cloud.points[a].z() < cloud.points[b].z();
  });
  PointCloud out;
  out.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.points.push_back(cloud.points[order[i]]);
  return out;
}

PlaneFit fit_plane_least_squares(std::span<const Vec3> points) {
  if (points.size() < 3) throw AlignmentError("least-squares plane needs >= 3 points");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : points) scatter += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 lambda = eig.eigenvalues();
  if (lambda[1] <= 1e-14 * std::max(lambda[2], 1e-300)) {
    throw AlignmentError("least-squares plane: points are collinear");
  }
  PlaneFit plane;
  plane.normal = eig.eigenvectors().col(0).normalized();
  plane.offset = -plane.normal.dot(c);
  orient_plane(plane);
  return plane;
}

PlaneFit ransac_plane(const PointCloud& cloud, const RansacParams& params, std::uint64_t seed) {
  params.validate();
  const auto& pts = cloud.points;
  const std::size_t n = pts.size();
  if (n < static_cast<std::size_t>(params.min_samples)) {
    throw AlignmentError("ransac_plane: " + std::to_string(n) + " points, need at least " +
                         std::to_string(params.min_samples));
  }
  CounterRng rng(seed, 0x52414e53);  // "RANS"
  const double tau = params.distance_threshold;

  bool found = false;
  std::size_t best_count = 0;
  Vec3 best_n = Vec3::UnitZ();
  double best_d = 0.0;
  std::vector<std::size_t> sample(static_cast<std::size_t>(params.min_samples));

  for (int it = 0; it < params.iterations; ++it) {
    // Distinct indices; min_samples > 3 adds points to a least-squares hypothesis.
    for (std::size_t k = 0; k < sample.size(); ++k) {
      std::size_t idx;
      do {
        idx = static_cast<std::size_t>(rng.below(n));
      } while (std::find(sample.begin(), sample.begin() + k, idx) != sample.begin() + k);
      sample[k] = idx;
    }
    Vec3 normal = (pts[sample[1]] - pts[sample[0]]).cross(pts[sample[2]] - pts[sample[0]]);
    const double len = normal.norm();
    if (len < 1e-12) continue;
    normal /= len;
    double d = -normal.dot(pts[sample[0]]);
    if (sample.size() > 3) {
      std::vector<Vec3> sub;
      for (auto s : sample) sub.push_back(pts[s]);
      try {
        const PlaneFit f = fit_plane_least_squares(sub);
        normal = f.normal;
        d = f.offset;
      } catch (const AlignmentError&) {
        continue;
      }
    }
    std::size_t count = 0;
    for (const auto& p : pts) count += std::abs(normal.dot(p) + d) <= tau;
    if (!found || count > best_count) {
      found = true;
      best_count = count;
      best_n = normal;
      best_d = d;
    }
  }
  if (!found) throw AlignmentError("ransac_plane: every sampled triple was collinear");

  PlaneFit hypothesis{best_n, best_d, {}, 0.0};
  orient_plane(hypothesis);
  fill_inliers(hypothesis, pts, tau);

  std::vector<Vec3> inlier_pts;
  inlier_pts.reserve(hypothesis.inliers.size());
  for (auto i : hypothesis.inliers) inlier_pts.push_back(pts[i]);
  try {
    PlaneFit refit = fit_plane_least_squares(inlier_pts);
    fill_inliers(refit, pts, tau);
    if (refit.inliers.size() >= 3) return refit;
  } catch (const AlignmentError&) {
    // Inliers of the hypothesis are collinear; keep the sampled plane.
  }
  return hypothesis;
}

PointCloud agmf_anchors(std::span<const TriMesh> meshes, double delta) {
  if (meshes.empty()) throw AlignmentError("agmf_anchors: empty mesh list");
  if (!(delta >= 0.0)) throw AlignmentError("agmf_anchors: delta must be non-negative");
  PointCloud out;
  for (const auto& m : meshes) {
    if (m.empty()) throw AlignmentError("agmf_anchors: mesh without vertices");
    double zmin = std::numeric_limits<double>::infinity();
    for (const auto& v : m.vertices) zmin = std::min(zmin, v.z());
    for (const auto& v : m.vertices) {
      if (v.z() <= zmin + delta) out.points.push_back(v);
    }
  }
  return out;
}

PointCloud agmf_anchors(std::span<const TriMesh> meshes) {
  if (meshes.empty()) throw AlignmentError("agmf_anchors: empty mesh list");
  PointCloud out;
  for (const auto& m : meshes) {
    if (m.empty()) throw AlignmentError("agmf_anchors: mesh without vertices");
    auto part = agmf_anchors(std::span<const TriMesh>(&m, 1), default_anchor_band(m));
    out.points.insert(out.points.end(), part.points.begin(), part.points.end());
  }
  return out;
}

RobustFitResult robust_plane_fit_traced(const PointCloud& anchors, const PlaneFit& seed_plane,
                                        const RobustLoss& loss, int max_iter) {
  if (anchors.size() < 3) throw AlignmentError("robust_plane_fit: need >= 3 anchors");
  if (!(loss.scale > 0.0)) throw AlignmentError("robust_plane_fit: loss scale must be > 0");
  const auto& pts = anchors.points;

  const auto objective = [&](const Vec3& n, double d) {
    double sum = 0.0;
    for (const auto& p : pts) sum += loss.rho(n.dot(p) + d);
    return sum;
  };

  RobustFitResult result;
  const double seed_norm = seed_plane.normal.norm();
  if (!(seed_norm > 0.0)) throw AlignmentError("robust_plane_fit: zero seed normal");
  Vec3 n = seed_plane.normal / seed_norm;
  double d = seed_plane.offset / seed_norm;
  double current = objective(n, d);
  result.objective_trace.push_back(current);

  for (int it = 0; it < max_iter; ++it) {
    double wsum = 0.0;
    Vec3 c = Vec3::Zero();
    std::vector<double> w(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      w[i] = loss.weight(n.dot(pts[i]) + d);
      wsum += w[i];
      c += w[i] * pts[i];
    }
    if (!(wsum > 0.0)) throw AlignmentError("robust_plane_fit: all anchor weights vanished");
    c /= wsum;
    Mat3 scatter = Mat3::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3 q = pts[i] - c;
      scatter += w[i] * q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
    const Vec3 lambda = eig.eigenvalues();
    if (lambda[1] <= 1e-14 * std::max(lambda[2], 1e-300)) {
      throw AlignmentError("robust_plane_fit: weighted system is rank deficient");
    }
    Vec3 n_new = eig.eigenvectors().col(0).normalized();
    if (n_new.dot(n) < 0.0) n_new = -n_new;
    const double d_new = -n_new.dot(c);
    const double next = objective(n_new, d_new);
    if (next > current) break;  // majorization guarantees descent; stop on round-off
    const double turn = std::acos(std::clamp(n_new.dot(n), -1.0, 1.0));
    const double shift = std::abs(d_new - d);
    n = n_new;
    d = d_new;
    current = next;
    result.objective_trace.push_back(current);
    result.iterations = it + 1;
    if (turn < 1e-7 && shift < 1e-9) break;
  }

  result.plane.normal = n;
  result.plane.offset = d;
  orient_plane(result.plane);
  fill_inliers(result.plane, pts, loss.scale);
  return result;
}

PlaneFit robust_plane_fit(const PointCloud& anchors, const PlaneFit& seed_plane,
                          const RobustLoss& loss, int max_iter) {
  return robust_plane_fit_traced(anchors, seed_plane, loss, max_iter).plane;
}

RansacParams relaxed_params(const RansacParams& base, int k) {
  RansacParams p = base;
  p.ground_percentile = std::min(base.ground_percentile + 5.0 * k, std::max(40.0, base.ground_percentile));
  p.distance_threshold = base.distance_threshold * (1.0 + 0.5 * k);
  p.horizontality_threshold =
      std::max(base.horizontality_threshold - 0.05 * k, std::min(0.5, base.horizontality_threshold));
  return p;
}

GroundEstimate adaptive_ground_estimation(std::span<const TriMesh> meshes, const RansacParams& params,
                                          const Vec3& gravity_hint, std::uint64_t seed,
                                          std::size_t samples_per_mesh) {
  params.validate();
  if (meshes.empty()) throw AlignmentError("adaptive_ground_estimation: no meshes");
  if (!(gravity_hint.norm() > 0.0)) throw AlignmentError("gravity hint must be non-zero");

  // Work in a frame where the gravity hint is +z so "lowest" means lowest z.
  const Mat3 to_hint = rodrigues_between(gravity_hint.normalized(), Vec3::UnitZ());
  std::vector<TriMesh> work;
  work.reserve(meshes.size());
  for (const auto& m : meshes) work.push_back(apply_transform(m, {to_hint, Vec3::Zero()}));

  PointCloud cloud;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const PointCloud part = sample_surface(work[i], samples_per_mesh, hash_key(seed, i));
    cloud.points.insert(cloud.points.end(), part.points.begin(), part.points.end());
  }

  GroundEstimate est;
  std::optional<PlaneFit> accepted;
  PlaneFit best_rejected;
  double best_alignment = -1.0;
  for (int k = 0; k < params.max_retries; ++k) {
    const RansacParams attempt = relaxed_params(params, k);
    AttemptRecord rec;
    rec.attempt = k + 1;
    rec.percent = attempt.ground_percentile;
    rec.distance_threshold = attempt.distance_threshold;
    rec.horizontality_threshold = attempt.horizontality_threshold;
    try {
      const PointCloud candidates = select_ground_candidates(cloud, attempt.ground_percentile);
      rec.plane = ransac_plane(candidates, attempt, hash_key(seed, 0x5eed, k));
    } catch (const AlignmentError&) {
      est.attempts.push_back(rec);
      continue;
    }
    rec.alignment = std::abs(rec.plane.normal.z());
    rec.accepted = rec.alignment >= attempt.horizontality_threshold;
    est.attempts.push_back(rec);
    if (rec.accepted) {
      accepted = rec.plane;
      break;
    }
    if (rec.alignment > best_alignment) {
      best_alignment = rec.alignment;
      best_rejected = rec.plane;
    }
  }
  est.attempts_used = static_cast<int>(est.attempts.size());

  const auto to_input = [&](PlaneFit p) {
    p.normal = to_hint.transpose() * p.normal;
    if (p.normal.dot(gravity_hint) < 0.0) {
      p.normal = -p.normal;
      p.offset = -p.offset;
    }
    return p;
  };

  if (!accepted) {
    throw GroundEstimationError("ground estimation failed after " +
                                    std::to_string(est.attempts_used) + " attempts",
                                to_input(best_rejected), est.attempts_used);
  }
  est.ransac_plane = to_input(*accepted);
  est.plane = est.ransac_plane;

  // Anchor-guided refinement in a frame where the accepted ground is level.
  const Mat3 level = rodrigues_between(accepted->normal, Vec3::UnitZ());
  std::vector<TriMesh> leveled;
  leveled.reserve(work.size());
  for (const auto& m : work) leveled.push_back(apply_transform(m, {level, Vec3::Zero()}));
  const PointCloud anchors = agmf_anchors(leveled);
  est.anchor_count = anchors.size();
  if (anchors.size() >= 3) {
    PlaneFit seed_plane{Vec3::UnitZ(), accepted->offset, {}, 0.0};
    try {
      const RobustLoss loss{LossKind::huber, params.distance_threshold};
      PlaneFit refined = robust_plane_fit(anchors, seed_plane, loss);
      refined.normal = level.transpose() * refined.normal;
      est.plane = to_input(refined);
      est.refined = true;
    } catch (const AlignmentError&) {
      // Anchors span no plane (e.g. a single object with a point foot); keep RANSAC.
    }
  }
  return est;
}

// --- Normalization ---------------------------------------------------------

NormalizedScene normalize_scene(std::span<const TriMesh> meshes, const PlaneFit& plane) {
  if (meshes.empty()) throw AlignmentError("normalize_scene: no meshes");
  const double len = plane.normal.norm();
  if (!(len > 0.0) || !plane.normal.allFinite()) throw AlignmentError("normalize_scene: invalid plane");

  Vec3 sum = Vec3::Zero();
  std::size_t count = 0;
  for (const auto& m : meshes) {
    for (const auto& v : m.vertices) sum += v;
    count += m.vertices.size();
  }
  if (count == 0) throw AlignmentError("normalize_scene: meshes have no vertices");
  const Vec3 xbar = sum / static_cast<double>(count);

  const Mat3 r = rodrigues_between(plane.normal / len, Vec3::UnitZ());
  RigidTransform tf{r, -(r * xbar)};
  double zmin = std::numeric_limits<double>::infinity();
  for (const auto& m : meshes) {
    for (const auto& v : m.vertices) zmin = std::min(zmin, tf.apply(v).z());
  }
  tf.translation.z() -= zmin;

  NormalizedScene out;
  out.transform = tf;
  out.meshes.reserve(meshes.size());
  for (const auto& m : meshes) {
    out.meshes.push_back(apply_transform(m, tf));
  }
  // Remove round-off so the lowest vertex sits exactly on the ground.
  double zmin_after = std::numeric_limits<double>::infinity();
  for (const auto& m : out.meshes) {
    for (const auto& v : m.vertices) zmin_after = std::min(zmin_after, v.z());
  }
  if (zmin_after != 0.0) {
    for (auto& m : out.meshes) {
      for (auto& v : m.vertices) v.z() -= zmin_after;
    }
    out.transform.translation.z() -= zmin_after;
  }
  return out;
}

int count_overlapping_pairs(std::span<const Aabb> boxes, double padding) {
  int n = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) n += boxes[i].overlaps(boxes[j], padding);
  }
  return n;
}

namespace {

// Largest signed step along `axis` in direction `sign` keeping the per-iteration
// displacement within the delta_max ball.
double step_capacity(const Vec3& used, int axis, double sign, double delta_max) {
  double rest = delta_max * delta_max;
  for (int b = 0; b < 3; ++b) {
    if (b != axis) rest -= used[b] * used[b];
  }
  if (rest <= 0.0) return 0.0;
  const double limit = std::sqrt(rest);
  // Want |used[axis] + sign*m| <= limit with m >= 0.
  return std::max(0.0, limit - sign * used[axis]);
}

}  // namespace

PenetrationResult resolve_penetration(std::span<const TriMesh> meshes, const PenetrationParams& params) {
  if (params.padding < 0.0) throw AlignmentError("resolve_penetration: padding must be >= 0");
  if (!(params.delta_max > 0.0)) throw AlignmentError("resolve_penetration: delta_max must be > 0");
  const std::size_t n = meshes.size();
  std::vector<Aabb> boxes;
  boxes.reserve(n);
  for (const auto& m : meshes) boxes.push_back(aabb(m));
  std::vector<Vec3> total(n, Vec3::Zero());

  for (int it = 0; it < params.iterations; ++it) {
    std::vector<Vec3> used(n, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!boxes[i].overlaps(boxes[j], params.padding)) continue;
        int axis = 0;
        double overlap = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
          const double o = 0.5 * (boxes[i].extent[a] + boxes[j].extent[a]) + params.padding -
                           std::abs(boxes[i].center[a] - boxes[j].center[a]);
          if (o < overlap) {
            overlap = o;
            axis = a;
          }
        }
        // j moves along +s, i along -s.
        const double s = boxes[j].center[axis] >= boxes[i].center[axis] ? 1.0 : -1.0;
        const double half = std::min(0.5 * overlap, params.delta_max);

        double cap_i = step_capacity(used[i], axis, -s, params.delta_max);
        double cap_j = step_capacity(used[j], axis, s, params.delta_max);
        if (axis == 2) {
          // Neither object may be pushed through the ground.
          if (s > 0.0) cap_i = std::min(cap_i, std::max(0.0, boxes[i].min().z()));
          else cap_j = std::min(cap_j, std::max(0.0, boxes[j].min().z()));
        }
        double move_i = std::min(half, cap_i);
        double move_j = std::min(half, cap_j);
        // Hand a blocked share to the partner, still within its own budget.
        move_j = std::min(cap_j, move_j + (half - move_i));
        move_i = std::min(cap_i, move_i + (half - std::min(half, cap_j)));

        boxes[i].center[axis] -= s * move_i;
        boxes[j].center[axis] += s * move_j;
        used[i][axis] -= s * move_i;
        used[j][axis] += s * move_j;
        total[i][axis] -= s * move_i;
        total[j][axis] += s * move_j;
      }
    }
  }

  PenetrationResult out;
  out.displacements = total;
  out.meshes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.meshes.push_back(apply_transform(meshes[i], RigidTransform::translate(total[i])));
  out.residual_overlaps = count_overlapping_pairs(boxes, params.padding);
  out.residual_strict_overlaps = count_overlapping_pairs(boxes, 0.0);
  return out;
}

}  // namespace physweave::posealign
