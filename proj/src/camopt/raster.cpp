#include "physweave/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace physweave::camopt {

namespace {

constexpr double kNear = 1e-3;

struct ScreenVertex {
  double x, y, inv_z;
};

// Clips a camera-space polygon against z >= kNear.
std::vector<Vec3> clip_near(const std::array<Vec3, 3>& tri) {
  std::vector<Vec3> out;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = tri[i];
    const Vec3& b = tri[(i + 1) % 3];
    const bool ina = a.z() >= kNear, inb = b.z() >= kNear;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double t = (kNear - a.z()) / (b.z() - a.z());
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

class Canvas {
 public:
  Canvas(const Projector& proj, int w, int h)
      : proj_(proj), w_(w), h_(h), depth_(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()) {}

  ScreenVertex to_screen(const Vec3& cam) const {
    const auto p = proj_.camera_to_pixel(cam);
    return {p.x(), p.y(), 1.0 / cam.z()};
  }

  // Calls visit(index, depth) for every covered pixel centre of a camera-space triangle.
  template <class Visit>
  void triangle(const std::array<Vec3, 3>& cam, Visit&& visit) const {
    std::vector<Vec3> poly;
    if (cam[0].z() >= kNear && cam[1].z() >= kNear && cam[2].z() >= kNear) {
      poly.assign(cam.begin(), cam.end());
    } else {
      poly = clip_near(cam);
    }
    if (poly.size() < 3) return;
    const ScreenVertex s0 = to_screen(poly[0]);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      screen_triangle(s0, to_screen(poly[k]), to_screen(poly[k + 1]), visit);
    }
  }

  template <class Visit>
  void screen_triangle(const ScreenVertex& a, const ScreenVertex& b, const ScreenVertex& c, Visit&& visit) const {
    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (std::abs(area) < 1e-14 || !std::isfinite(area)) return;
    const double inv_area = 1.0 / area;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
    const int x1 = std::min(w_ - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
    const int y1 = std::min(h_ - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = ((b.x - px) * (c.y - py) - (b.y - py) * (c.x - px)) * inv_area;
        const double w1 = ((c.x - px) * (a.y - py) - (c.y - py) * (a.x - px)) * inv_area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double inv_z = w0 * a.inv_z + w1 * b.inv_z + w2 * c.inv_z;
        visit(static_cast<std::size_t>(y) * w_ + x, 1.0 / inv_z);
      }
    }
  }

  // Screen-space disc of radius r pixels around (cx, cy).
  template <class Visit>
  void disc(double cx, double cy, double r, Visit&& visit) const {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r - 0.5)));
    const int x1 = std::min(w_ - 1, static_cast<int>(std::ceil(cx + r - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r - 0.5)));
    const int y1 = std::min(h_ - 1, static_cast<int>(std::ceil(cy + r - 0.5)));
    const double r2 = r * r;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= r2) visit(static_cast<std::size_t>(y) * w_ + x);
      }
    }
  }

  std::vector<double>& depth() { return depth_; }

 private:
  const Projector& proj_;
  int w_, h_;
  std::vector<double> depth_;
};

Rgb shaded(const Rgb& c, float s) { return {c[0] * s, c[1] * s, c[2] * s}; }

void put(FrameBuffer& fb, std::size_t i, const Rgb& c, std::int32_t id) {
  fb.rgb.data[3 * i] = std::clamp(c[0], 0.f, 1.f);
  fb.rgb.data[3 * i + 1] = std::clamp(c[1], 0.f, 1.f);
  fb.rgb.data[3 * i + 2] = std::clamp(c[2], 0.f, 1.f);
  fb.seg[i] = id;
}

// Projection of p onto z = 0 along the light direction.
Vec3 ground_shadow(const Vec3& p, const Vec3& light) { return p - (p.z() / light.z()) * light; }

}  // namespace

Rgb palette_color(std::size_t index) {
  static constexpr std::array<Rgb, 8> kPalette{{{0.85f, 0.33f, 0.25f},
                                                {0.25f, 0.55f, 0.85f},
                                                {0.35f, 0.75f, 0.35f},
                                                {0.90f, 0.70f, 0.20f},
                                                {0.60f, 0.40f, 0.75f},
                                                {0.20f, 0.75f, 0.75f},
                                                {0.85f, 0.45f, 0.65f},
                                                {0.55f, 0.55f, 0.55f}}};
  return kPalette[index % kPalette.size()];
}

RasterResult rasterize(std::span<const RenderMesh> meshes, std::span<const RenderParticles> particles,
                       const CameraPose& camera, int width, int height, const RenderOptions& options) {
  camera.validate();
  if (width <= 0 || height <= 0) throw ImageError("rasterize: image size must be positive");
  const Projector proj(camera, width, height);
  const Vec3 light = options.light_direction.normalized();
  if (!(light.z() < -1e-6)) throw ImageError("rasterize: light must point downwards");

  RasterResult out{FrameBuffer(width, height, options.background), MaskImage(width, height), {}};
  FrameBuffer& fb = out.frame;
  Canvas canvas(proj, width, height);
  auto& depth = canvas.depth();
  const float ambient = options.ambient;
  const auto lit = [&](const Vec3& n) {
    return ambient + (1.f - ambient) * static_cast<float>(std::max(0.0, -light.dot(n)));
  };

  const bool ground = options.ground_plane && proj.eye.z() > 0.0;
  if (ground) {
    const Rgb ground_rgb = shaded(options.ground_color, lit(Vec3::UnitZ()));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const Vec3 d = proj.ray_direction(x + 0.5, y + 0.5);
        if (d.z() >= -1e-12) continue;
        const double t = -proj.eye.z() / d.z();
        const Vec3 hit = proj.eye + t * d;
        if (std::abs(hit.x()) > options.ground_half_extent || std::abs(hit.y()) > options.ground_half_extent) continue;
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        depth[i] = t * d.dot(proj.frame.forward);
        put(fb, i, ground_rgb, 1);
      }
    }
  }

  std::vector<std::uint8_t> shadow;
  if (ground && options.shadows) shadow.assign(static_cast<std::size_t>(width) * height, 0);
  const auto mark_shadow = [&](std::size_t i, double) { shadow[i] = 1; };

  for (const RenderMesh& rm : meshes) {
    const TriMesh& m = rm.mesh;
    std::vector<Vec3> cam(m.vertices.size());
    for (std::size_t v = 0; v < cam.size(); ++v) cam[v] = proj.to_camera(m.vertices[v]);
    std::vector<Vec3> shadow_cam;
    if (!shadow.empty()) {
      shadow_cam.resize(m.vertices.size());
      for (std::size_t v = 0; v < cam.size(); ++v) {
        shadow_cam[v] = proj.to_camera(ground_shadow(m.vertices[v], light));
      }
    }
    for (const auto& f : m.faces) {
      const Vec3& a = m.vertices[f[0]];
      Vec3 n = (m.vertices[f[1]] - a).cross(m.vertices[f[2]] - a);
      const double len = n.norm();
      if (!(len > 0.0)) continue;
      n /= len;
      if (n.dot(proj.eye - a) < 0.0) n = -n;
      const Rgb color = shaded(rm.color, lit(n));
      canvas.triangle({cam[f[0]], cam[f[1]], cam[f[2]]}, [&](std::size_t i, double z) {
        if (z < depth[i]) {
          depth[i] = z;
          put(fb, i, color, rm.seg_id);
        }
      });
      if (!shadow.empty()) canvas.triangle({shadow_cam[f[0]], shadow_cam[f[1]], shadow_cam[f[2]]}, mark_shadow);
    }
  }

  for (const RenderParticles& rp : particles) {
    const Rgb color = shaded(rp.color, lit(-light));
    for (const Vec3& p : rp.points) {
      const Vec3 c = proj.to_camera(p);
      if (c.z() < kNear) continue;
      const auto px = proj.camera_to_pixel(c);
      const double r = std::max(0.5, rp.radius * proj.focal_px / c.z());
      canvas.disc(px.x(), px.y(), r, [&](std::size_t i) {
        if (c.z() < depth[i]) {
          depth[i] = c.z();
          put(fb, i, color, rp.seg_id);
        }
      });
      if (!shadow.empty()) {
        const Vec3 s = proj.to_camera(ground_shadow(p, light));
        if (s.z() >= kNear) {
          const auto sp = proj.camera_to_pixel(s);
          canvas.disc(sp.x(), sp.y(), std::max(0.5, rp.radius * proj.focal_px / s.z()),
                      [&](std::size_t i) { shadow[i] = 1; });
        }
      }
    }
  }

  if (!shadow.empty()) {
    const Rgb dark = shaded(options.ground_color, options.shadow_shade);
    for (std::size_t i = 0; i < shadow.size(); ++i) {
      if (shadow[i] && fb.seg[i] == 1) put(fb, i, dark, 1);
    }
  }
  for (std::size_t i = 0; i < fb.seg.size(); ++i) out.mask.values[i] = fb.seg[i] >= 2 ? 1.f : 0.f;
  out.depth.assign(depth.begin(), depth.end());
  return out;
}

RasterResult rasterize(std::span<const TriMesh> meshes, const CameraPose& camera, int width, int height,
                       const RenderOptions& options) {
  std::vector<RenderMesh> items;
  items.reserve(meshes.size());
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    items.push_back({meshes[i], static_cast<std::int32_t>(i + 2), palette_color(i)});
  }
  return rasterize(items, {}, camera, width, height, options);
}

}  // namespace physweave::camopt
