#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "unweave/errors.hpp"
#include "unweave/geometry.hpp"

namespace unweave {

struct Rgb {
  std::uint8_t r{0};
  std::uint8_t g{0};
  std::uint8_t b{0};
  friend bool operator==(Rgb, Rgb) = default;
};

struct Hsv {
  double h{0.0};  // degrees, [0, 360)
  double s{0.0};  // [0, 1]
  double v{0.0};  // [0, 1]
};

inline Hsv to_hsv(Rgb c) {
  const double r = c.r / 255.0;
  const double g = c.g / 255.0;
  const double b = c.b / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out{0.0, mx == 0.0 ? 0.0 : d / mx, mx};
  if (d == 0.0) return out;
  if (mx == r)
    out.h = 60.0 * std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    out.h = 60.0 * ((b - r) / d + 2.0);
  else
    out.h = 60.0 * ((r - g) / d + 4.0);
  if (out.h < 0.0) out.h += 360.0;
  return out;
}

// 8-bit RGB raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {})
      : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height, fill) {
    if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidArgument, "Image: non-positive dimensions");
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  [[nodiscard]] Rgb at(int x, int y) const { return pixels_[index(x, y)]; }
  Rgb& at(int x, int y) { return pixels_[index(x, y)]; }

  void set(int x, int y, Rgb c) {
    if (in_bounds(x, y)) pixels_[index(x, y)] = c;
  }

  [[nodiscard]] const std::vector<Rgb>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_{0};
  int height_{0};
  std::vector<Rgb> pixels_;
};

// Pixel (x, y) covers the unit square whose center is (x + 0.5, y + 0.5).
inline Vec2 pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

inline void fill_disk(Image& img, Vec2 c, double radius, Rgb color) {
  const int x0 = static_cast<int>(std::floor(c.x - radius));
  const int x1 = static_cast<int>(std::ceil(c.x + radius));
  const int y0 = static_cast<int>(std::floor(c.y - radius));
  const int y1 = static_cast<int>(std::ceil(c.y + radius));
  for (int y = std::max(0, y0); y <= std::min(img.height() - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(img.width() - 1, x1); ++x)
      if (distance_sq(pixel_center(x, y), c) <= radius * radius) img.at(x, y) = color;
}

inline void draw_segment(Image& img, Vec2 a, Vec2 b, double thickness, Rgb color) {
  const double r = thickness / 2.0;
  const Box box = bounding_box(a, b);
  for (int y = std::max(0, static_cast<int>(std::floor(box.y_min - r)));
       y <= std::min(img.height() - 1, static_cast<int>(std::ceil(box.y_max + r))); ++y)
    for (int x = std::max(0, static_cast<int>(std::floor(box.x_min - r)));
         x <= std::min(img.width() - 1, static_cast<int>(std::ceil(box.x_max + r))); ++x)
      if (point_segment_distance(pixel_center(x, y), a, b) <= r) img.at(x, y) = color;
}

inline void draw_polyline(Image& img, std::span<const Vec2> pts, double thickness, Rgb color) {
  for (std::size_t i = 1; i < pts.size(); ++i) draw_segment(img, pts[i - 1], pts[i], thickness, color);
}

inline void draw_arrow(Image& img, Vec2 from, Vec2 to, double thickness, Rgb color) {
  draw_segment(img, from, to, thickness, color);
  const Vec2 d = normalized(to - from);
  if (norm_sq(d) == 0.0) return;
  const double head = 10.0;
  draw_segment(img, to, to - rotate_ccw(d, 0.45) * head, thickness, color);
  draw_segment(img, to, to - rotate_ccw(d, -0.45) * head, thickness, color);
}

inline void write_png(const Image& img, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorKind::Io, "write_png: cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::Io, "write_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::Io, "write_png: libpng error writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.at(x, y);
      row[3 * x] = c.r;
      row[3 * x + 1] = c.g;
      row[3 * x + 2] = c.b;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Image read_png(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "rb"), &std::fclose);
  if (!fp) throw Error(ErrorKind::Io, "read_png: cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Io, "read_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::Io, "read_png: libpng error reading " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  const auto color_type = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  Image img(width, height);
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x) img.at(x, y) = {row[3 * x], row[3 * x + 1], row[3 * x + 2]};
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace unweave
