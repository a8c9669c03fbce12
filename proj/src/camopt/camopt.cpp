#include "physweave/camopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "physweave/random.hpp"

namespace physweave::camopt {

void CamOptConfig::validate() const {
  if (w_obj < 0.0 || w_bg < 0.0 || w_mask < 0.0) throw CamOptError("loss weights must be non-negative");
  if (n_random < 1) throw CamOptError("n_random must be >= 1");
  if (powell_max_iter < 0) throw CamOptError("powell_max_iter must be >= 0");
  if (!(epsilon > 0.0)) throw CamOptError("epsilon must be > 0");
  if (objective_size < 8) throw CamOptError("objective_size must be >= 8");
}

void SearchBounds::validate() const {
  if (!(radii.minCoeff() > 0.0) || !center.allFinite()) throw CamOptError("search bounds need positive radii");
}

bool SearchBounds::contains(const Vec3& p) const {
  return ((p - center).cwiseAbs() - radii).maxCoeff() <= 1e-12;
}

Vec3 SearchBounds::clamp(const Vec3& p) const { return p.cwiseMax(center - radii).cwiseMin(center + radii); }

namespace {

void require_same_size(int w, int h, int w2, int h2, const char* what) {
  if (w != w2 || h != h2) {
    throw CamOptError(std::string("region_losses: ") + what + " is " + std::to_string(w2) + "x" +
                      std::to_string(h2) + ", expected " + std::to_string(w) + "x" + std::to_string(h));
  }
}

}  // namespace

double dice_loss(const MaskImage& a, const MaskImage& b, double epsilon) {
  require_same_size(a.width, a.height, b.width, b.height, "mask");
  double inter = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    inter += static_cast<double>(a.values[i]) * b.values[i];
    sa += a.values[i];
    sb += b.values[i];
  }
  return 1.0 - (2.0 * inter + epsilon) / (sa + sb + epsilon);
}

RegionLosses region_losses(const RgbImage& rendered, const RgbImage& target, const MaskImage& target_mask,
                           const MaskImage& rendered_mask, const CamOptConfig& cfg) {
  require_same_size(target.width, target.height, rendered.width, rendered.height, "rendered image");
  require_same_size(target.width, target.height, target_mask.width, target_mask.height, "target mask");
  require_same_size(target.width, target.height, rendered_mask.width, rendered_mask.height, "rendered mask");
  double obj = 0.0, bg = 0.0, m_obj = 0.0, m_bg = 0.0;
  const bool l1 = cfg.appearance_norm == AppearanceNorm::l1;
  for (std::size_t i = 0; i < target.pixels(); ++i) {
    double e = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(rendered.data[3 * i + c]) - target.data[3 * i + c];
      e += l1 ? std::abs(d) : d * d;
    }
    e /= 3.0;
    const double m = target_mask.values[i];
    obj += m * e;
    bg += (1.0 - m) * e;
    m_obj += m;
    m_bg += 1.0 - m;
  }
  return {obj / (m_obj + cfg.epsilon), bg / (m_bg + cfg.epsilon),
          dice_loss(rendered_mask, target_mask, cfg.epsilon)};
}

CamOptTarget make_target(const RgbImage& image, const MaskImage& mask, int objective_size) {
  if (image.width != mask.width || image.height != mask.height) {
    throw CamOptError("target image and mask sizes differ");
  }
  if (image.width <= 0 || image.height <= 0) throw CamOptError("empty target image");
  const int longest = std::max(image.width, image.height);
  if (longest == objective_size) return {image, mask};
  const double s = static_cast<double>(objective_size) / longest;
  const int w = std::max(1, static_cast<int>(std::lround(image.width * s)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height * s)));
  return {resize_area(image, w, h), resize_area(mask, w, h)};
}

double camera_loss(const CameraPose& pose, const CamOptTarget& target, const CamOptScene& scene,
                   const CamOptConfig& cfg) {
  if (cfg.w_obj == 0.0 && cfg.w_bg == 0.0 && cfg.w_mask == 0.0) return 0.0;
  const RasterResult r =
      rasterize(scene.meshes, {}, pose, target.image.width, target.image.height, scene.options);
  const RegionLosses l = region_losses(r.frame.rgb, target.image, target.mask, r.mask, cfg);
  return cfg.w_obj * l.obj + cfg.w_bg * l.bg + cfg.w_mask * l.mask;
}

GlobalSearchResult global_search(const SearchBounds& bounds, const PositionObjective& objective, int n,
                                 std::uint64_t seed) {
  bounds.validate();
  if (n < 1) throw CamOptError("global_search: n must be >= 1");
  CounterRng rng(seed, 0x474c4f42);  // "GLOB"
  GlobalSearchResult out;
  out.best_loss = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = bounds.center[a] + bounds.radii[a] * (2.0 * rng.uniform() - 1.0);
    const double f = objective(p);
    out.samples.push_back({"global", p, f});
    if (f < out.best_loss || k == 0) {
      out.best_loss = f;
      out.best_position = p;
    }
  }
  return out;
}

namespace {

constexpr double kInvPhi = 0.6180339887498949;

struct LineSearch {
  const PositionObjective& f;
  const SearchBounds& bounds;
  std::vector<Evaluation>& log;

  double eval(const Vec3& p) {
    const double v = f(p);
    log.push_back({"powell", p, v});
    return v;
  }

  // Minimizes along unit direction u from x; updates x, fx only on improvement.
  void run(Vec3& x, double& fx, const Vec3& u) {
    double tlo = -std::numeric_limits<double>::infinity();
    double thi = std::numeric_limits<double>::infinity();
    const Vec3 lo = bounds.center - bounds.radii, hi = bounds.center + bounds.radii;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(u[a]) < 1e-15) continue;
      double t1 = (lo[a] - x[a]) / u[a], t2 = (hi[a] - x[a]) / u[a];
      if (t1 > t2) std::swap(t1, t2);
      tlo = std::max(tlo, t1);
      thi = std::min(thi, t2);
    }
    tlo = std::min(tlo, 0.0);
    thi = std::max(thi, 0.0);
    if (!(thi - tlo > 1e-12)) return;

    const auto at = [&](double t) { return bounds.clamp(x + t * u); };
    double a = tlo, b = thi;
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double fc = eval(at(c)), fd = eval(at(d));
    while (b - a > 1e-6) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = eval(at(c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = eval(at(d));
      }
    }
    const double t = fc <= fd ? c : d;
    const double ft = std::min(fc, fd);
    if (ft < fx) {
      x = at(t);
      fx = ft;
    }
  }
};

}  // namespace

PowellResult powell_refine(const Vec3& start, const PositionObjective& objective, const SearchBounds& bounds,
                           int max_iter, double tolerance) {
  bounds.validate();
  PowellResult out;
  Vec3 x = bounds.clamp(start);
  double fx = objective(x);
  out.evaluations.push_back({"powell", x, fx});
  LineSearch search{objective, bounds, out.evaluations};
  std::vector<Vec3> dirs = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};

  for (int it = 0; it < max_iter; ++it) {
    const Vec3 x0 = x;
    const double f0 = fx;
    std::size_t biggest = 0;
    double biggest_drop = 0.0;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const double before = fx;
      search.run(x, fx, dirs[i]);
      if (before - fx > biggest_drop) {
        biggest_drop = before - fx;
        biggest = i;
      }
    }
    out.iterations = it + 1;
    const Vec3 step = x - x0;
    if (step.norm() > 1e-12) {
      const Vec3 u = step.normalized();
      search.run(x, fx, u);
      // Replace the direction of largest decrease with the net displacement.
      dirs.erase(dirs.begin() + static_cast<std::ptrdiff_t>(biggest));
      dirs.push_back(u);
      Mat3 basis;
      basis << dirs[0], dirs[1], dirs[2];
      if (std::abs(basis.determinant()) < 1e-6) dirs = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
    }
    if (f0 - fx < tolerance) break;
  }
  out.position = x;
  out.loss = fx;
  return out;
}

CoarseToFineResult coarse_to_fine(const CameraPose& init, const CamOptTarget& target, const CamOptScene& scene,
                                  const CamOptConfig& cfg, const SearchBounds& bounds) {
  cfg.validate();
  bounds.validate();
  init.validate();
  const auto objective = [&](const Vec3& p) {
    CameraPose pose = init;
    pose.position = p;
    return camera_loss(pose, target, scene, cfg);
  };

  CoarseToFineResult out;
  out.init_loss = objective(init.position);
  out.trace.push_back({"init", init.position, out.init_loss});

  GlobalSearchResult global = global_search(bounds, objective, cfg.n_random, cfg.seed);
  out.trace.insert(out.trace.end(), global.samples.begin(), global.samples.end());
  out.global_pose = init;
  out.global_pose.position = global.best_position;
  out.global_loss = global.best_loss;

  // Refine from whichever of the global winner and the initial pose is better.
  const bool from_init = out.init_loss < global.best_loss && bounds.contains(init.position);
  const Vec3 start = from_init ? init.position : global.best_position;
  PowellResult local = powell_refine(start, objective, bounds, cfg.powell_max_iter);
  out.trace.insert(out.trace.end(), local.evaluations.begin(), local.evaluations.end());
  out.powell_iterations = local.iterations;
  out.pose = init;
  out.pose.position = local.position;
  out.loss = local.loss;
  return out;
}

CameraPose camera_init(std::span<const TriMesh> meshes, double fov_deg) {
  if (meshes.empty()) throw CamOptError("camera_init: empty scene");
  const Aabb box = scene_aabb(meshes);
  const double radius = std::max(0.5 * box.extent.norm(), 1e-3);
  const double half_span = 0.3 * fov_deg * std::numbers::pi / 180.0;
  const double dist = radius / std::tan(half_span);
  const double elev = 15.0 * std::numbers::pi / 180.0;
  CameraPose pose;
  pose.fov_deg = fov_deg;
  pose.look_at = box.center;
  pose.position = box.center + dist * Vec3(0.0, -std::cos(elev), std::sin(elev));
  return pose;
}

std::optional<Eigen::Vector2d> mask_centroid(const MaskImage& mask) {
  double sx = 0.0, sy = 0.0, s = 0.0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const double v = mask.values[static_cast<std::size_t>(y) * mask.width + x];
      sx += v * (x + 0.5);
      sy += v * (y + 0.5);
      s += v;
    }
  }
  if (!(s > 0.0)) return std::nullopt;
  return Eigen::Vector2d(sx / s, sy / s);
}

}  // namespace physweave::camopt
