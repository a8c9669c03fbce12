#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "physweave/camera.hpp"
#include "physweave/image.hpp"
#include "physweave/raster.hpp"

namespace physweave::camopt {

class CamOptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AppearanceNorm { mse, l1 };

struct CamOptConfig {
  double w_obj = 1.0;
  double w_bg = 0.2;
  double w_mask = 1.0;
  int n_random = 60;
  int powell_max_iter = 80;
  double epsilon = 1e-8;
  AppearanceNorm appearance_norm = AppearanceNorm::mse;
  int objective_size = 256;  // longest edge of the objective render
  std::uint64_t seed = 0;

  void validate() const;
};

struct SearchBounds {
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3::Constant(0.5);

  void validate() const;
  bool contains(const Vec3& p) const;
  Vec3 clamp(const Vec3& p) const;
};

struct RegionLosses {
  double obj = 0.0;
  double bg = 0.0;
  double mask = 0.0;
};

/// Masked appearance terms over the target's object and background regions
/// plus the Dice silhouette term. Appearance errors are averaged over channels.
RegionLosses region_losses(const RgbImage& rendered, const RgbImage& target, const MaskImage& target_mask,
                           const MaskImage& rendered_mask, const CamOptConfig& cfg = {});

double dice_loss(const MaskImage& a, const MaskImage& b, double epsilon = 1e-8);

/// Scene rendered by the objective.
struct CamOptScene {
  std::vector<RenderMesh> meshes;
  RenderOptions options;
};

/// Target image and mask, already at the objective resolution.
struct CamOptTarget {
  RgbImage image;
  MaskImage mask;
};

/// Resizes a reference image and mask so the longest edge is cfg.objective_size.
CamOptTarget make_target(const RgbImage& image, const MaskImage& mask, int objective_size);

double camera_loss(const CameraPose& pose, const CamOptTarget& target, const CamOptScene& scene,
                   const CamOptConfig& cfg = {});

using PositionObjective = std::function<double(const Vec3&)>;

struct Evaluation {
  std::string stage;  // "init", "global" or "powell"
  Vec3 position;
  double loss;
};

struct GlobalSearchResult {
  Vec3 best_position;
  double best_loss = 0.0;
  std::vector<Evaluation> samples;  // in sampling order
};

/// n uniform samples of the position inside the bounds; argmin with the
/// earliest sample winning ties. Deterministic in the seed.
GlobalSearchResult global_search(const SearchBounds& bounds, const PositionObjective& objective, int n,
                                 std::uint64_t seed = 0);

struct PowellResult {
  Vec3 position;
  double loss = 0.0;
  int iterations = 0;
  std::vector<Evaluation> evaluations;
};

/// Powell's conjugate-direction method with golden-section line searches
/// restricted to the bounds. Never returns a worse point than the start.
PowellResult powell_refine(const Vec3& start, const PositionObjective& objective, const SearchBounds& bounds,
                           int max_iter = 80, double tolerance = 1e-6);

struct CoarseToFineResult {
  CameraPose pose;
  double loss = 0.0;
  double init_loss = 0.0;
  CameraPose global_pose;
  double global_loss = 0.0;
  int powell_iterations = 0;
  std::vector<Evaluation> trace;
};

/// Global sampling followed by Powell refinement of the camera position;
/// look_at and fov stay at their initial values.
CoarseToFineResult coarse_to_fine(const CameraPose& init, const CamOptTarget& target, const CamOptScene& scene,
                                  const CamOptConfig& cfg, const SearchBounds& bounds);

/// Frames the scene AABB so it spans about 60% of the vertical field of view,
/// looking at the box centre from 15 degrees of elevation on the -y side.
CameraPose camera_init(std::span<const TriMesh> meshes, double fov_deg = 45.0);

/// Centroid of mask coverage in pixel coordinates; nullopt for an empty mask.
std::optional<Eigen::Vector2d> mask_centroid(const MaskImage& mask);

}  // namespace physweave::camopt
