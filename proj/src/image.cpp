#include "placekit/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "placekit/errors.hpp"

namespace placekit {

void write_ppm(const std::filesystem::path& path, const ImageRGB& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.px.data()),
          std::streamsize(img.px.size()));
  if (!f) throw Error("short write to " + path.string());
}

ImageRGB read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
    throw Error("unsupported PPM header in " + path.string());
  f.get();  // single whitespace after maxval
  ImageRGB img(w, h);
  f.read(reinterpret_cast<char*>(img.px.data()), std::streamsize(img.px.size()));
  if (f.gcount() != std::streamsize(img.px.size()))
    throw Error("truncated PPM " + path.string());
  return img;
}

void write_pgm(const std::filesystem::path& path, int w, int h,
               const std::vector<float>& values) {
  if (values.size() != std::size_t(w) * h)
    throw ShapeMismatch("pgm: value count does not match dimensions");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << "P5\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> bytes(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    float v = std::clamp(values[i], 0.0f, 1.0f);
    bytes[i] = std::uint8_t(std::lround(v * 255.0f));
  }
  f.write(reinterpret_cast<const char*>(bytes.data()),
          std::streamsize(bytes.size()));
}

ImageRGB resize_nearest(const ImageRGB& img, int out_w, int out_h) {
  if (img.w <= 0 || img.h <= 0) throw EmptyImage("resize of empty image");
  ImageRGB out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    int sy = std::min(img.h - 1, int((y + 0.5) * img.h / out_h));
    for (int x = 0; x < out_w; ++x) {
      int sx = std::min(img.w - 1, int((x + 0.5) * img.w / out_w));
      const std::uint8_t* s = img.at(sx, sy);
      out.set(x, y, {s[0], s[1], s[2]});
    }
  }
  return out;
}

ImageRGB pad_to_square_white(const ImageRGB& img) {
  if (img.w <= 0 || img.h <= 0) throw EmptyImage("pad of empty image");
  int side = std::max(img.w, img.h);
  ImageRGB out(side, side, {255, 255, 255});
  for (int y = 0; y < img.h; ++y)
    std::copy_n(img.at(0, y), std::size_t(img.w) * 3, out.at(0, y));
  return out;
}

void fill_rect(ImageRGB& img, int x0, int y0, int x1, int y1, Rgb c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.w);
  y1 = std::min(y1, img.h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.set(x, y, c);
}

void fill_ellipse(ImageRGB& img, double cx, double cy, double rx, double ry,
                  Rgb c) {
  int x0 = std::max(0, int(std::floor(cx - rx)));
  int x1 = std::min(img.w, int(std::ceil(cx + rx)) + 1);
  int y0 = std::max(0, int(std::floor(cy - ry)));
  int y1 = std::min(img.h, int(std::ceil(cy + ry)) + 1);
  for (int y = y0; y < y1; ++y) {
    double dy = (y + 0.5 - cy) / ry;
    for (int x = x0; x < x1; ++x) {
      double dx = (x + 0.5 - cx) / rx;
      if (dx * dx + dy * dy <= 1.0) img.set(x, y, c);
    }
  }
}

Rgb hsv_to_rgb(double hue_deg, double sat, double val) {
  double h = hue_deg / 60.0;
  int i = int(std::floor(h)) % 6;
  if (i < 0) i += 6;
  double f = h - std::floor(h);
  double p = val * (1 - sat);
  double q = val * (1 - sat * f);
  double t = val * (1 - sat * (1 - f));
  double r, g, b;
  switch (i) {
    case 0: r = val, g = t, b = p; break;
    case 1: r = q, g = val, b = p; break;
    case 2: r = p, g = val, b = t; break;
    case 3: r = p, g = q, b = val; break;
    case 4: r = t, g = p, b = val; break;
    default: r = val, g = p, b = q; break;
  }
  auto u8 = [](double v) { return std::uint8_t(std::lround(v * 255.0)); };
  return {u8(r), u8(g), u8(b)};
}

ImageRGB composite_preview(const ImageRGB& bg, const ImageRGB& obj,
                           const PlacementBox& box) {
  PlacementBox clipped = clip_box(box, ImageDims{bg.w, bg.h});
  int x0 = int(std::lround(clipped.l));
  int y0 = int(std::lround(clipped.t));
  int x1 = int(std::lround(clipped.right()));
  int y1 = int(std::lround(clipped.bottom()));
  x1 = std::min(x1, bg.w);
  y1 = std::min(y1, bg.h);
  if (x1 <= x0 || y1 <= y0) throw EmptyClip("clipped box rounds to zero area");

  ImageRGB out = bg;
  ImageRGB patch = resize_nearest(obj, x1 - x0, y1 - y0);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const std::uint8_t* s = patch.at(x - x0, y - y0);
      if (s[0] >= 250 && s[1] >= 250 && s[2] >= 250) continue;  // transparent
      out.set(x, y, {s[0], s[1], s[2]});
    }
  }
  return out;
}

}  // namespace placekit
