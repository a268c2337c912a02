#include "placekit/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "placekit/errors.hpp"
#include "placekit/image.hpp"

namespace placekit {

namespace {

std::pair<float, float> min_max(const std::vector<float>& v, std::size_t lo,
                                std::size_t hi, std::size_t stride = 1) {
  float mn = v[lo], mx = v[lo];
  for (std::size_t i = lo; i < hi; i += stride) {
    mn = std::min(mn, v[i]);
    mx = std::max(mx, v[i]);
  }
  return {mn, mx};
}

bool peak_less(const Peak& a, const Peak& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.idx.y != b.idx.y) return a.idx.y < b.idx.y;
  if (a.idx.x != b.idx.x) return a.idx.x < b.idx.x;
  return a.idx.z < b.idx.z;
}

}  // namespace

Heatmap3D normalize(const Heatmap3D& h) {
  auto [mn, mx] = min_max(h.data, 0, h.size());
  if (!(mx > mn))
    throw DegenerateHeatmap("normalize: heatmap has zero value range");
  Heatmap3D out(h.dims, h.grid);
  float range = mx - mn;
  for (std::size_t i = 0; i < h.size(); ++i)
    out.data[i] = (h.data[i] - mn) / range;
  return out;
}

GridIndex argmax_index(const Heatmap3D& h) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h.data[i] > h.data[best]) best = i;
  int c = h.channels();
  int z = int(best % c);
  int x = int((best / c) % h.dims.w);
  int y = int(best / (std::size_t(c) * h.dims.w));
  return GridIndex{x, y, z};
}

std::vector<Peak> local_maxima(const Heatmap3D& hn) {
  std::vector<Peak> peaks;
  int W = hn.dims.w, H = hn.dims.h, C = hn.channels();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int z = 0; z < C; ++z) {
        float v = hn.at(y, x, z);
        bool is_peak = true;
        for (int dy = -1; dy <= 1 && is_peak; ++dy) {
          int ny = y + dy;
          if (ny < 0 || ny >= H) continue;
          for (int dx = -1; dx <= 1 && is_peak; ++dx) {
            int nx = x + dx;
            if (nx < 0 || nx >= W) continue;
            for (int dz = -1; dz <= 1; ++dz) {
              int nz = z + dz;
              if (nz < 0 || nz >= C) continue;
              if (dy == 0 && dx == 0 && dz == 0) continue;
              if (hn.at(ny, nx, nz) >= v) {
                is_peak = false;
                break;
              }
            }
          }
        }
        if (is_peak) peaks.push_back(Peak{GridIndex{x, y, z}, v});
      }
    }
  }
  std::sort(peaks.begin(), peaks.end(), peak_less);
  return peaks;
}

std::vector<std::pair<PlacementBox, float>> top_k_boxes(const Heatmap3D& hn,
                                                        int k, double aspect) {
  if (k < 1) throw Error("top_k_boxes: k must be >= 1");
  int C = hn.channels();

  // Population mean/std over all normalized entries.
  double sum = 0, sumsq = 0;
  for (float v : hn.data) {
    sum += v;
    sumsq += double(v) * v;
  }
  double n = double(hn.size());
  double mean = sum / n;
  double var = std::max(0.0, sumsq / n - mean * mean);
  double thr = mean + 2.0 * std::sqrt(var);

  std::vector<Peak> peaks = local_maxima(hn);
  std::vector<char> taken(hn.size(), 0);
  std::vector<Peak> selected;
  auto take = [&](const Peak& p) {
    std::size_t off = hn.offset(p.idx.y, p.idx.x, p.idx.z);
    if (taken[off]) return;
    taken[off] = 1;
    selected.push_back(p);
  };

  // Top-1 is the global argmax regardless of peak structure.
  GridIndex g = argmax_index(hn);
  take(Peak{g, hn.at(g.y, g.x, g.z)});

  for (const Peak& p : peaks) {
    if (int(selected.size()) >= k) break;
    if (p.score > thr) take(p);
  }
  for (const Peak& p : peaks) {
    if (int(selected.size()) >= k) break;
    take(p);
  }
  if (int(selected.size()) < k) {
    // Highest non-selected entries, score descending, scan order on ties.
    std::vector<Peak> rest;
    rest.reserve(hn.size());
    for (int y = 0; y < hn.dims.h; ++y)
      for (int x = 0; x < hn.dims.w; ++x)
        for (int z = 0; z < C; ++z)
          if (!taken[hn.offset(y, x, z)])
            rest.push_back(Peak{GridIndex{x, y, z}, hn.at(y, x, z)});
    std::sort(rest.begin(), rest.end(), peak_less);
    for (const Peak& p : rest) {
      if (int(selected.size()) >= k) break;
      take(p);
    }
  }

  std::vector<std::pair<PlacementBox, float>> out;
  out.reserve(selected.size());
  for (const Peak& p : selected)
    out.emplace_back(box_from_index(p.idx, hn.grid, hn.dims, aspect), p.score);
  return out;
}

Map2D slice_fixed_scale(const Heatmap3D& h, int z) {
  if (z < 0 || z >= h.channels())
    throw IndexOutOfRange("slice_fixed_scale: channel out of range");
  Map2D m;
  m.w = h.dims.w;
  m.h = h.dims.h;
  m.data.resize(std::size_t(m.w) * m.h);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) m.at(y, x) = h.at(y, x, z);
  auto [mn, mx] = min_max(m.data, 0, m.data.size());
  if (!(mx > mn))
    throw DegenerateHeatmap("slice_fixed_scale: constant channel");
  for (float& v : m.data) v = (v - mn) / (mx - mn);
  return m;
}

ScaleScores slice_fixed_location(const Heatmap3D& h, int x, int y) {
  if (x < 0 || x >= h.dims.w || y < 0 || y >= h.dims.h)
    throw IndexOutOfRange("slice_fixed_location: location out of range");
  ScaleScores s;
  s.scores.resize(std::size_t(h.channels()));
  for (int z = 0; z < h.channels(); ++z) {
    s.scores[std::size_t(z)] = h.at(y, x, z);
    if (s.scores[std::size_t(z)] > s.scores[std::size_t(s.argmax)]) s.argmax = z;
  }
  return s;
}

void write_toph(const std::filesystem::path& path, const Heatmap3D& h) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write("TOPH", 4);
  std::uint32_t hdr[3] = {std::uint32_t(h.dims.h), std::uint32_t(h.dims.w),
                          std::uint32_t(h.channels())};
  f.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  f.write(reinterpret_cast<const char*>(h.data.data()),
          std::streamsize(h.size() * sizeof(float)));
  if (!f) throw Error("short write to " + path.string());
}

Heatmap3D read_toph(const std::filesystem::path& path, const ScaleGrid& grid) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (f.gcount() != 4 || std::memcmp(magic, "TOPH", 4) != 0)
    throw Error("not a TOPH file: " + path.string());
  std::uint32_t hdr[3];
  f.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  if (!f) throw Error("truncated TOPH header: " + path.string());
  ScaleGrid g = grid;
  if (std::size_t(hdr[2]) != g.values.size()) {
    // The file is self-describing for shape only; fall back to evenly
    // spaced scales when the caller's grid does not match.
    g.values.resize(hdr[2]);
    for (std::uint32_t i = 0; i < hdr[2]; ++i)
      g.values[i] = double(i + 1) / hdr[2];
  }
  Heatmap3D h(ImageDims{int(hdr[1]), int(hdr[0])}, g);
  f.read(reinterpret_cast<char*>(h.data.data()),
         std::streamsize(h.size() * sizeof(float)));
  if (f.gcount() != std::streamsize(h.size() * sizeof(float)))
    throw Error("truncated TOPH payload: " + path.string());
  return h;
}

void render_channels(const Heatmap3D& h, const std::filesystem::path& dir,
                     const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (int z = 0; z < h.channels(); ++z) {
    std::vector<float> plane(std::size_t(h.dims.w) * h.dims.h);
    for (int y = 0; y < h.dims.h; ++y)
      for (int x = 0; x < h.dims.w; ++x)
        plane[std::size_t(y) * h.dims.w + x] = h.at(y, x, z);
    auto [mn, mx] = min_max(plane, 0, plane.size());
    if (mx > mn)
      for (float& v : plane) v = (v - mn) / (mx - mn);
    else
      for (float& v : plane) v = 0.0f;
    char name[32];
    std::snprintf(name, sizeof name, "_z%02d.pgm", z);
    write_pgm(dir / (prefix + name), h.dims.w, h.dims.h, plane);
  }
}

}  // namespace placekit
