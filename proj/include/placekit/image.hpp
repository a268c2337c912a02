#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "placekit/geometry.hpp"
#include "placekit/tensor.hpp"

namespace placekit {

using Rgb = std::array<std::uint8_t, 3>;

struct ImageRGB {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> px;  // 3 bytes per pixel, row-major

  ImageRGB() = default;
  ImageRGB(int width, int height, Rgb fill = {0, 0, 0}) : w(width), h(height) {
    px.resize(std::size_t(w) * h * 3);
    for (std::size_t i = 0; i < px.size(); i += 3) {
      px[i] = fill[0];
      px[i + 1] = fill[1];
      px[i + 2] = fill[2];
    }
  }

  std::uint8_t* at(int x, int y) { return &px[(std::size_t(y) * w + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &px[(std::size_t(y) * w + x) * 3];
  }
  void set(int x, int y, Rgb c) {
    auto* p = at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  bool operator==(const ImageRGB&) const = default;
};

// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const ImageRGB& img);
ImageRGB read_ppm(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255) from values already in [0,1].
void write_pgm(const std::filesystem::path& path, int w, int h,
               const std::vector<float>& values);

ImageRGB resize_nearest(const ImageRGB& img, int out_w, int out_h);

// Pads right/bottom with white so the image becomes square.
ImageRGB pad_to_square_white(const ImageRGB& img);

void fill_rect(ImageRGB& img, int x0, int y0, int x1, int y1, Rgb c);
void fill_ellipse(ImageRGB& img, double cx, double cy, double rx, double ry,
                  Rgb c);
Rgb hsv_to_rgb(double hue_deg, double sat, double val);

// Object raster pasted over the background at the clipped box; white object
// pixels (all channels >= 250) are treated as transparent.
ImageRGB composite_preview(const ImageRGB& bg, const ImageRGB& obj,
                           const PlacementBox& box);

// (h, w, 3) float tensor with entries px/255 - 0.5.
template <typename T>
TensorT<T> image_to_tensor(const ImageRGB& img) {
  TensorT<T> out({img.h, img.w, 3});
  for (std::size_t i = 0; i < img.px.size(); ++i)
    out.data[i] = T(img.px[i]) / T(255) - T(0.5);
  return out;
}

}  // namespace placekit
