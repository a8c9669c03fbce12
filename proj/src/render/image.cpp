#include "physweave/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

namespace physweave {

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw ImageError("negative image size");
  data.resize(3 * static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < pixels(); ++i) {
    data[3 * i] = fill[0];
    data[3 * i + 1] = fill[1];
    data[3 * i + 2] = fill[2];
  }
}

MaskImage::MaskImage(int w, int h, float fill)
    : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {
  if (w < 0 || h < 0) throw ImageError("negative mask size");
}

double MaskImage::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

FrameBuffer::FrameBuffer(int w, int h, Rgb fill)
    : rgb(w, h, fill), seg(static_cast<std::size_t>(w) * h, 0) {}

MaskImage FrameBuffer::object_mask() const {
  MaskImage m(width(), height());
  for (std::size_t i = 0; i < seg.size(); ++i) m.values[i] = seg[i] >= 2 ? 1.f : 0.f;
  return m;
}

std::uint8_t quantize(float v) {
  const float c = std::clamp(std::isfinite(v) ? v : 0.f, 0.f, 1.f);
  return static_cast<std::uint8_t>(std::lround(c * 255.f));
}

namespace {

std::vector<std::uint8_t> to_bytes(const RgbImage& img) {
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), quantize);
  return bytes;
}

RgbImage from_bytes(int w, int h, const std::vector<std::uint8_t>& bytes) {
  RgbImage img(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.f;
  return img;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write image: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("failed writing image: " + path.string());
}

// Decodes to 8-bit samples in the requested layout.
std::vector<std::uint8_t> decode(const std::vector<std::uint8_t>& bytes, png_uint_32 format, int& w,
                                 int& h, const std::string& what) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageError("invalid PNG " + what + ": " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> out(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ImageError("invalid PNG " + what + ": " + image.message);
  }
  w = static_cast<int>(image.width);
  h = static_cast<int>(image.height);
  return out;
}

std::vector<std::uint8_t> encode(const std::uint8_t* pixels, int w, int h, png_uint_32 format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, pixels, 0, nullptr)) {
    throw ImageError(std::string("PNG encoding failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw ImageError(std::string("PNG encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  if (img.width <= 0 || img.height <= 0) throw ImageError("cannot encode an empty image");
  const auto bytes = to_bytes(img);
  return encode(bytes.data(), img.width, img.height, PNG_FORMAT_RGB);
}

RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  int w = 0, h = 0;
  const auto px = decode(bytes, PNG_FORMAT_RGB, w, h, "data");
  return from_bytes(w, h, px);
}

RgbImage read_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto px = decode(read_file(path), PNG_FORMAT_RGB, w, h, path.string());
  return from_bytes(w, h, px);
}

MaskImage read_png_mask(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto px = decode(read_file(path), PNG_FORMAT_GRAY, w, h, path.string());
  MaskImage m(w, h);
  for (std::size_t i = 0; i < px.size(); ++i) m.values[i] = px[i] / 255.f;
  return m;
}

void write_png(const RgbImage& img, const std::filesystem::path& path) {
  write_file(encode_png(img), path);
}

void write_png_gray(int width, int height, const std::vector<std::uint8_t>& gray,
                    const std::filesystem::path& path) {
  if (gray.size() != static_cast<std::size_t>(width) * height) throw ImageError("gray buffer size mismatch");
  write_file(encode(gray.data(), width, height, PNG_FORMAT_GRAY), path);
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  const auto px = to_bytes(img);
  bytes.insert(bytes.end(), px.begin(), px.end());
  write_file(bytes, path);
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw ImageError("unsupported PPM: " + path.string());
  in.get();
  std::vector<std::uint8_t> px(3 * static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!in) throw ImageError("truncated PPM: " + path.string());
  return from_bytes(w, h, px);
}

namespace {

struct Tap {
  int index;
  float weight;
};

// Overlap weights of each destination cell with the source cells it covers.
std::vector<std::vector<Tap>> area_taps(int src, int dst) {
  std::vector<std::vector<Tap>> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int o = 0; o < dst; ++o) {
    const double lo = o * scale, hi = (o + 1) * scale;
    for (int s = static_cast<int>(std::floor(lo)); s < std::min(src, static_cast<int>(std::ceil(hi))); ++s) {
      const double w = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
      if (w > 0) taps[o].push_back({s, static_cast<float>(w / scale)});
    }
  }
  return taps;
}

template <int C>
std::vector<float> resample(const std::vector<float>& in, int w, int h, int nw, int nh) {
  if (w <= 0 || h <= 0 || nw <= 0 || nh <= 0) throw ImageError("resize: sizes must be positive");
  const auto tx = area_taps(w, nw), ty = area_taps(h, nh);
  std::vector<float> rows(static_cast<std::size_t>(C) * nw * h, 0.f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < nw; ++x) {
      for (const Tap& t : tx[x]) {
        for (int c = 0; c < C; ++c) {
          rows[(static_cast<std::size_t>(y) * nw + x) * C + c] += t.weight * in[(static_cast<std::size_t>(y) * w + t.index) * C + c];
        }
      }
    }
  }
  std::vector<float> out(static_cast<std::size_t>(C) * nw * nh, 0.f);
  for (int y = 0; y < nh; ++y) {
    for (const Tap& t : ty[y]) {
      for (int x = 0; x < nw; ++x) {
        for (int c = 0; c < C; ++c) {
          out[(static_cast<std::size_t>(y) * nw + x) * C + c] += t.weight * rows[(static_cast<std::size_t>(t.index) * nw + x) * C + c];
        }
      }
    }
  }
  return out;
}

}  // namespace

RgbImage resize_area(const RgbImage& img, int width, int height) {
  RgbImage out;
  out.width = width;
  out.height = height;
  out.data = resample<3>(img.data, img.width, img.height, width, height);
  return out;
}

MaskImage resize_area(const MaskImage& mask, int width, int height) {
  MaskImage out;
  out.width = width;
  out.height = height;
  out.values = resample<1>(mask.values, mask.width, mask.height, width, height);
  return out;
}

}  // namespace physweave
