#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "physweave/geom.hpp"
#include "physweave/image.hpp"

namespace physweave::metrics {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Single-channel image on the 0-255 scale.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0);

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// ITU-R BT.601 luma scaled to 0-255.
GrayImage to_gray(const RgbImage& img);

// --- Image quality ---------------------------------------------------------

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, data range 255, computed on the luma of both images.
double ssim(const RgbImage& a, const RgbImage& b);
double ssim(const GrayImage& a, const GrayImage& b);

/// Mean squared error over all channels of [0, 1] images.
double mse(const RgbImage& a, const RgbImage& b);
/// min(4 MSE, 1).
double lpips_fallback(const RgbImage& a, const RgbImage& b);

// --- Alignment -------------------------------------------------------------

/// Pixels with value >= 0.5.
std::size_t mask_pixel_count(const MaskImage& mask);
/// IoU of the binarized masks; 1 when both are empty.
double mask_iou(const MaskImage& a, const MaskImage& b);
/// Distance in pixels between the centroids of the binarized masks.
double reprojection_error(const MaskImage& a, const MaskImage& b);

// --- Physics ---------------------------------------------------------------

/// One evaluated frame: world-space object bounds and the number of object
/// pixels in a width x height render.
struct PhysicsFrame {
  std::vector<Aabb> objects;
  std::size_t mask_pixels = 0;
  int width = 880;
  int height = 880;
};

struct PhysicsRates {
  double penetration_rate = 0.0;
  double support_violation_rate = 0.0;
  double interaction_success_rate = 0.0;
  bool pr_defined = false;   // at least one object pair
  bool svr_defined = false;  // at least one object
  bool isr_defined = false;  // at least one frame
};

inline constexpr double kSupportTolerance = 0.02;    // m above the ground
inline constexpr double kVisibleAreaFraction = 0.001;

/// Object AABB has z_min above the support tolerance.
bool violates_support(const Aabb& box);
/// Mask covers strictly more than 0.1% of a width x height frame.
bool interaction_visible(std::size_t mask_pixels, int width, int height);

/// PR: overlapping pairs over all pairs; SVR: floating objects over all
/// objects; both pooled over frames. ISR: fraction of frames whose object
/// mask is visible. Undefined rates are reported as 0 with the flag cleared.
PhysicsRates physics_rates(std::span<const PhysicsFrame> frames);

// --- Video -----------------------------------------------------------------

struct FlowParams {
  int levels = 3;
  int window = 15;
  int iterations = 10;  // per level, stops early once the update is below 1e-3 px
  /// Minimum eigenvalue of the window-averaged structure tensor (gray^2 per
  /// pixel); flatter windows keep the coarser estimate.
  double min_eigen = 1.0;
  /// Flow is evaluated at every stride-th pixel in x and y; 1 is fully dense.
  int stride = 1;
};

/// Flow samples on the stride grid: entry (i, j) belongs to pixel
/// (i * stride, j * stride).
struct FlowField {
  int width = 0;
  int height = 0;
  int stride = 1;
  std::vector<double> u, v;

  double mean_magnitude() const;
};

/// Pyramidal Lucas-Kanade flow from a to b, tracked independently per sample
/// point with a translation-only window model.
FlowField lucas_kanade_flow(const GrayImage& a, const GrayImage& b, const FlowParams& params = {});

struct MotionStats {
  double amplitude = 0.0;
  double smoothness = 1.0;
  std::vector<double> mean_flow;  // per consecutive pair
};

/// amplitude = mean of per-pair mean flow magnitude; smoothness =
/// 1 / (1 + population variance of those means). Needs >= 2 frames.
MotionStats motion_stats(std::span<const RgbImage> frames, const FlowParams& params = {});
/// Same aggregation from precomputed per-pair mean flow magnitudes.
MotionStats summarize_motion(std::vector<double> mean_flow);

/// Variance of the 4-neighbour Laplacian over interior pixels.
double laplacian_variance(const GrayImage& img);
/// 2 / (1 + exp(-mean_variance / 500)) - 1.
double aesthetic_fallback(std::span<const RgbImage> frames);
/// Same score from precomputed per-frame Laplacian variances.
double aesthetic_from_variances(std::span<const double> variances);

// --- Frame sampling --------------------------------------------------------

/// round(linspace(0, n - 1, k)).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);
/// Size with the longest edge min(max_edge, original), aspect preserved.
std::pair<int, int> fit_longest_edge(int width, int height, int max_edge);
std::vector<RgbImage> sample_eval_frames(std::span<const RgbImage> frames, std::size_t k = 10, int max_edge = 880);

// --- Report ----------------------------------------------------------------

struct MetricsReport {
  std::optional<double> ssim, lpips_fallback, mask_iou, reproj_error_px;
  std::optional<double> penetration_rate, support_violation_rate, interaction_success_rate;
  std::optional<double> motion_amplitude, motion_smoothness, aesthetic;
  int frame_count = 0;
  std::vector<std::string> flags;  // e.g. undefined rates, missing references
};

/// JSON object; absent metrics are null.
std::string to_json(const MetricsReport& report);
std::string csv_header();
/// One CSV line matching csv_header(); absent metrics are empty cells.
std::string to_csv_row(const MetricsReport& report);

}  // namespace physweave::metrics
