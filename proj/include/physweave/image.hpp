#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace physweave {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rgb = std::array<float, 3>;

/// Interleaved RGB floats in [0, 1], row-major from the top-left pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {0.f, 0.f, 0.f});

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  float* px(int x, int y) { return &data[3 * (static_cast<std::size_t>(y) * width + x)]; }
  const float* px(int x, int y) const { return &data[3 * (static_cast<std::size_t>(y) * width + x)]; }
  /// Mean of the three channels.
  float brightness(std::size_t i) const { return (data[3 * i] + data[3 * i + 1] + data[3 * i + 2]) / 3.f; }
};

/// Per-pixel coverage in [0, 1].
struct MaskImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  MaskImage() = default;
  MaskImage(int w, int h, float fill = 0.f);

  std::size_t pixels() const { return values.size(); }
  double sum() const;
};

/// Rendered colour plus segmentation ids: 0 background, 1 ground plane,
/// >= 2 objects.
struct FrameBuffer {
  RgbImage rgb;
  std::vector<std::int32_t> seg;

  FrameBuffer() = default;
  FrameBuffer(int w, int h, Rgb fill = {0.f, 0.f, 0.f});

  int width() const { return rgb.width; }
  int height() const { return rgb.height; }
  /// Object coverage (seg >= 2) as a binary mask.
  MaskImage object_mask() const;
};

// 8-bit I/O. Values are quantized with round(clamp(v, 0, 1) * 255).
std::uint8_t quantize(float v);

RgbImage read_png(const std::filesystem::path& path);
/// Single-channel PNG (gray or RGB averaged) as a mask in [0, 1].
MaskImage read_png_mask(const std::filesystem::path& path);
void write_png(const RgbImage& img, const std::filesystem::path& path);
void write_png_gray(int width, int height, const std::vector<std::uint8_t>& gray,
                    const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
RgbImage decode_png(const std::vector<std::uint8_t>& bytes);

void write_ppm(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

/// Area-averaging resample to an arbitrary size.
RgbImage resize_area(const RgbImage& img, int width, int height);
MaskImage resize_area(const MaskImage& mask, int width, int height);

}  // namespace physweave
