#include "physweave/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "physweave/parallel.hpp"

namespace physweave::metrics {

namespace {

void require_same_size(int wa, int ha, int wb, int hb, const char* what) {
  if (wa != wb || ha != hb) {
    throw MetricsError(std::string(what) + ": size mismatch " + std::to_string(wa) + "x" + std::to_string(ha) +
                       " vs " + std::to_string(wb) + "x" + std::to_string(hb));
  }
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  const double c = 0.5 * (size - 1);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable 'valid' correlation: output is (w - n + 1) x (h - n + 1).
GrayImage filter_valid(const GrayImage& img, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = img.width - n + 1, oh = img.height - n + 1;
  GrayImage rows(ow, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * img.at(x + i, y);
      rows.at(x, y) = s;
    }
  }
  GrayImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * rows.at(x, y + i);
      out.at(x, y) = s;
    }
  }
  return out;
}

GrayImage multiply(const GrayImage& a, const GrayImage& b) {
  GrayImage out(a.width, a.height);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

struct Centroid {
  double x = 0.0, y = 0.0;
  std::size_t count = 0;
};

Centroid binary_centroid(const MaskImage& m) {
  Centroid c;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (m.values[static_cast<std::size_t>(y) * m.width + x] >= 0.5f) {
        c.x += x + 0.5;
        c.y += y + 0.5;
        ++c.count;
      }
    }
  }
  if (c.count > 0) {
    c.x /= static_cast<double>(c.count);
    c.y /= static_cast<double>(c.count);
  }
  return c;
}

// --- Lucas-Kanade helpers --------------------------------------------------

double sample_clamped(const GrayImage& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = std::min(static_cast<int>(x), img.width - 2 < 0 ? 0 : img.width - 2);
  const int y0 = std::min(static_cast<int>(y), img.height - 2 < 0 ? 0 : img.height - 2);
  const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = (1 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bottom = (1 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return (1 - fy) * top + fy * bottom;
}

// 5-tap binomial blur then 2x decimation.
GrayImage pyr_down(const GrayImage& img) {
  static const double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  GrayImage rows(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * img.at(clampi(x + i, img.width), y);
      rows.at(x, y) = s;
    }
  }
  GrayImage out((img.width + 1) / 2, (img.height + 1) / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * rows.at(2 * x, clampi(2 * y + i, img.height));
      out.at(x, y) = s;
    }
  }
  return out;
}

struct Level {
  GrayImage a, b;
  std::vector<double> ix, iy;
};

Level make_level(GrayImage a, GrayImage b) {
  Level l{std::move(a), std::move(b), {}, {}};
  const int w = l.a.width, h = l.a.height;
  l.ix.resize(static_cast<std::size_t>(w) * h);
  l.iy.resize(l.ix.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
      const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      l.ix[i] = (l.a.at(xr, y) - l.a.at(xl, y)) / std::max(1, xr - xl);
      l.iy[i] = (l.a.at(x, yd) - l.a.at(x, yu)) / std::max(1, yd - yu);
    }
  }
  return l;
}

// Translation-only inverse-compositional LK for the window centred at
// (cx, cy); refines g in place. Leaves g unchanged on flat windows.
void track_level(const Level& l, int cx, int cy, const FlowParams& p, double& gx, double& gy) {
  const int w = l.a.width, h = l.a.height, r = p.window / 2;
  const int x0 = std::max(0, cx - r), x1 = std::min(w, cx + r + 1);
  const int y0 = std::max(0, cy - r), y1 = std::min(h, cy + r + 1);
  double gxx = 0, gxy = 0, gyy = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gxx += l.ix[i] * l.ix[i];
      gxy += l.ix[i] * l.iy[i];
      gyy += l.iy[i] * l.iy[i];
    }
  }
  const double area = static_cast<double>((x1 - x0) * (y1 - y0));
  const double min_eig = 0.5 * (gxx + gyy) - std::sqrt(0.25 * (gxx - gyy) * (gxx - gyy) + gxy * gxy);
  if (min_eig / area < p.min_eigen) return;
  const double det = gxx * gyy - gxy * gxy;
  for (int it = 0; it < p.iterations; ++it) {
    double bx = 0, by = 0;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double e = sample_clamped(l.b, x + gx, y + gy) - l.a.at(x, y);
        bx += l.ix[i] * e;
        by += l.iy[i] * e;
      }
    }
    const double dx = (gyy * bx - gxy * by) / det, dy = (gxx * by - gxy * bx) / det;
    gx -= dx;
    gy -= dy;
    if (dx * dx + dy * dy < 1e-6) break;
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

GrayImage::GrayImage(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

GrayImage to_gray(const RgbImage& img) {
  GrayImage g(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const float* p = &img.data[3 * i];
    g.data[i] = 255.0 * (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
  }
  return g;
}

double ssim(const RgbImage& a, const RgbImage& b) {
  require_same_size(a.width, a.height, b.width, b.height, "ssim");
  return ssim(to_gray(a), to_gray(b));
}

double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_size(a.width, a.height, b.width, b.height, "ssim");
  constexpr int kWin = 11;
  if (a.width < kWin || a.height < kWin) throw MetricsError("ssim: images smaller than the 11x11 window");
  const auto k = gaussian_kernel(kWin, 1.5);
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0), c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const GrayImage mu_a = filter_valid(a, k), mu_b = filter_valid(b, k);
  const GrayImage aa = filter_valid(multiply(a, a), k), bb = filter_valid(multiply(b, b), k),
                  ab = filter_valid(multiply(a, b), k);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.data.size(); ++i) {
    const double ma = mu_a.data[i], mb = mu_b.data[i];
    const double va = aa.data[i] - ma * ma, vb = bb.data[i] - mb * mb, cov = ab.data[i] - ma * mb;
    sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return sum / static_cast<double>(mu_a.data.size());
}

double mse(const RgbImage& a, const RgbImage& b) {
  require_same_size(a.width, a.height, b.width, b.height, "mse");
  if (a.data.empty()) throw MetricsError("mse: empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

double lpips_fallback(const RgbImage& a, const RgbImage& b) { return std::min(4.0 * mse(a, b), 1.0); }

std::size_t mask_pixel_count(const MaskImage& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.values.begin(), mask.values.end(), [](float v) { return v >= 0.5f; }));
}

double mask_iou(const MaskImage& a, const MaskImage& b) {
  require_same_size(a.width, a.height, b.width, b.height, "mask_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool pa = a.values[i] >= 0.5f, pb = b.values[i] >= 0.5f;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double reprojection_error(const MaskImage& a, const MaskImage& b) {
  require_same_size(a.width, a.height, b.width, b.height, "reprojection_error");
  const Centroid ca = binary_centroid(a), cb = binary_centroid(b);
  if (ca.count == 0 || cb.count == 0) throw MetricsError("reprojection_error: empty mask");
  return std::hypot(ca.x - cb.x, ca.y - cb.y);
}

bool violates_support(const Aabb& box) { return box.min().z() > kSupportTolerance; }

bool interaction_visible(std::size_t mask_pixels, int width, int height) {
  return static_cast<double>(mask_pixels) > kVisibleAreaFraction * width * height;
}

PhysicsRates physics_rates(std::span<const PhysicsFrame> frames) {
  PhysicsRates r;
  std::size_t pairs = 0, overlapping = 0, objects = 0, floating = 0, visible = 0;
  for (const PhysicsFrame& f : frames) {
    const std::size_t n = f.objects.size();
    for (std::size_t i = 0; i < n; ++i) {
      floating += violates_support(f.objects[i]);
      for (std::size_t j = i + 1; j < n; ++j) overlapping += f.objects[i].overlaps(f.objects[j]);
    }
    objects += n;
    if (n > 1) pairs += n * (n - 1) / 2;
    visible += interaction_visible(f.mask_pixels, f.width, f.height);
  }
  r.pr_defined = pairs > 0;
  r.svr_defined = objects > 0;
  r.isr_defined = !frames.empty();
  if (r.pr_defined) r.penetration_rate = static_cast<double>(overlapping) / static_cast<double>(pairs);
  if (r.svr_defined) r.support_violation_rate = static_cast<double>(floating) / static_cast<double>(objects);
  if (r.isr_defined) r.interaction_success_rate = static_cast<double>(visible) / static_cast<double>(frames.size());
  return r;
}

double FlowField::mean_magnitude() const {
  if (u.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::hypot(u[i], v[i]);
  return s / static_cast<double>(u.size());
}

FlowField lucas_kanade_flow(const GrayImage& a, const GrayImage& b, const FlowParams& params) {
  require_same_size(a.width, a.height, b.width, b.height, "lucas_kanade_flow");
  if (a.width < 2 || a.height < 2) throw MetricsError("lucas_kanade_flow: image too small");
  if (params.levels < 1 || params.window < 3 || params.iterations < 1 || params.stride < 1) {
    throw MetricsError("lucas_kanade_flow: invalid parameters");
  }
  std::vector<Level> pyr;
  pyr.push_back(make_level(a, b));
  while (static_cast<int>(pyr.size()) < params.levels && pyr.back().a.width >= 16 && pyr.back().a.height >= 16) {
    pyr.push_back(make_level(pyr_down(pyr.back().a), pyr_down(pyr.back().b)));
  }
  FlowField flow;
  flow.stride = params.stride;
  flow.width = (a.width + params.stride - 1) / params.stride;
  flow.height = (a.height + params.stride - 1) / params.stride;
  flow.u.assign(static_cast<std::size_t>(flow.width) * flow.height, 0.0);
  flow.v.assign(flow.u.size(), 0.0);
  parallel_for(static_cast<std::size_t>(flow.height), [&](std::size_t row) {
    const int y = static_cast<int>(row) * params.stride;
    for (int col = 0; col < flow.width; ++col) {
      const int x = col * params.stride;
      double gx = 0.0, gy = 0.0;
      for (int l = static_cast<int>(pyr.size()) - 1; l >= 0; --l) {
        const int cx = std::min(x >> l, pyr[l].a.width - 1), cy = std::min(y >> l, pyr[l].a.height - 1);
        track_level(pyr[l], cx, cy, params, gx, gy);
        if (l > 0) {
          gx *= 2.0;
          gy *= 2.0;
        }
      }
      flow.u[row * flow.width + col] = gx;
      flow.v[row * flow.width + col] = gy;
    }
  });
  return flow;
}

MotionStats summarize_motion(std::vector<double> mean_flow) {
  if (mean_flow.empty()) throw MetricsError("summarize_motion: no frame pairs");
  MotionStats out;
  out.mean_flow = std::move(mean_flow);
  double mean = 0.0;
  for (double f : out.mean_flow) mean += f;
  mean /= static_cast<double>(out.mean_flow.size());
  double var = 0.0;
  for (double f : out.mean_flow) var += (f - mean) * (f - mean);
  var /= static_cast<double>(out.mean_flow.size());
  out.amplitude = mean;
  out.smoothness = 1.0 / (1.0 + var);
  return out;
}

MotionStats motion_stats(std::span<const RgbImage> frames, const FlowParams& params) {
  if (frames.size() < 2) throw MetricsError("motion_stats: need at least 2 frames");
  std::vector<double> mean_flow(frames.size() - 1);
  for (std::size_t t = 0; t < mean_flow.size(); ++t) {
    mean_flow[t] = lucas_kanade_flow(to_gray(frames[t]), to_gray(frames[t + 1]), params).mean_magnitude();
  }
  return summarize_motion(std::move(mean_flow));
}

double laplacian_variance(const GrayImage& img) {
  if (img.width < 3 || img.height < 3) throw MetricsError("laplacian_variance: image smaller than 3x3");
  double s = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      const double l = img.at(x - 1, y) + img.at(x + 1, y) + img.at(x, y - 1) + img.at(x, y + 1) - 4.0 * img.at(x, y);
      s += l;
      s2 += l * l;
      ++n;
    }
  }
  const double mean = s / static_cast<double>(n);
  return std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
}

double aesthetic_from_variances(std::span<const double> variances) {
  if (variances.empty()) throw MetricsError("aesthetic_fallback: no frames");
  double mean = 0.0;
  for (double v : variances) mean += v;
  mean /= static_cast<double>(variances.size());
  return 2.0 / (1.0 + std::exp(-mean / 500.0)) - 1.0;
}

double aesthetic_fallback(std::span<const RgbImage> frames) {
  if (frames.empty()) throw MetricsError("aesthetic_fallback: no frames");
  std::vector<double> vars(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) { vars[i] = laplacian_variance(to_gray(frames[i])); });
  return aesthetic_from_variances(vars);
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
  if (n == 0) throw MetricsError("sample_eval_frames: no frames");
  if (k == 0) throw MetricsError("sample_eval_frames: k must be >= 1");
  std::vector<std::size_t> idx(k);
  if (k == 1) return idx;
  for (std::size_t i = 0; i < k; ++i) {
    idx[i] = static_cast<std::size_t>(
        std::lround(static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(k - 1)));
  }
  return idx;
}

std::pair<int, int> fit_longest_edge(int width, int height, int max_edge) {
  if (width <= 0 || height <= 0 || max_edge <= 0) throw MetricsError("fit_longest_edge: non-positive size");
  const int longest = std::max(width, height);
  if (longest <= max_edge) return {width, height};
  const double s = static_cast<double>(max_edge) / longest;
  const auto scaled = [&](int v) { return v == longest ? max_edge : std::max(1, static_cast<int>(std::lround(v * s))); };
  return {scaled(width), scaled(height)};
}

std::vector<RgbImage> sample_eval_frames(std::span<const RgbImage> frames, std::size_t k, int max_edge) {
  const auto idx = sample_indices(frames.size(), k);
  std::vector<RgbImage> out(idx.size());
  parallel_for(idx.size(), [&](std::size_t i) {
    const RgbImage& f = frames[idx[i]];
    const auto [w, h] = fit_longest_edge(f.width, f.height, max_edge);
    out[i] = (w == f.width && h == f.height) ? f : resize_area(f, w, h);
  });
  return out;
}

namespace {

using Field = std::pair<const char*, std::optional<double> MetricsReport::*>;
constexpr Field kFields[] = {
    {"ssim", &MetricsReport::ssim},
    {"lpips_fallback", &MetricsReport::lpips_fallback},
    {"mask_iou", &MetricsReport::mask_iou},
    {"reproj_error_px", &MetricsReport::reproj_error_px},
    {"penetration_rate", &MetricsReport::penetration_rate},
    {"support_violation_rate", &MetricsReport::support_violation_rate},
    {"interaction_success_rate", &MetricsReport::interaction_success_rate},
    {"motion_amplitude", &MetricsReport::motion_amplitude},
    {"motion_smoothness", &MetricsReport::motion_smoothness},
    {"aesthetic", &MetricsReport::aesthetic},
};

}  // namespace

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  for (const auto& [name, member] : kFields) {
    const auto& v = report.*member;
    j[name] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  j["frame_count"] = report.frame_count;
  j["flags"] = report.flags;
  return j.dump(2);
}

std::string csv_header() {
  std::string h;
  for (const auto& [name, member] : kFields) h += std::string(name) + ",";
  return h + "frame_count";
}

std::string to_csv_row(const MetricsReport& report) {
  std::string row;
  for (const auto& [name, member] : kFields) {
    const auto& v = report.*member;
    row += (v ? fmt(*v) : std::string()) + ",";
  }
  return row + std::to_string(report.frame_count);
}

}  // namespace physweave::metrics
