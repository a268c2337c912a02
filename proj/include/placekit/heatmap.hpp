#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "placekit/geometry.hpp"

namespace placekit {

// h x w x c plausibility volume, row-major with z fastest, then x, then y.
struct Heatmap3D {
  ImageDims dims;
  ScaleGrid grid;
  std::vector<float> data;

  Heatmap3D() = default;
  Heatmap3D(ImageDims d, ScaleGrid g)
      : dims(d), grid(std::move(g)),
        data(std::size_t(d.h) * d.w * grid.channels(), 0.0f) {}

  int channels() const { return grid.channels(); }
  std::size_t size() const { return data.size(); }
  std::size_t offset(int y, int x, int z) const {
    return (std::size_t(y) * dims.w + x) * channels() + z;
  }
  float& at(int y, int x, int z) { return data[offset(y, x, z)]; }
  float at(int y, int x, int z) const { return data[offset(y, x, z)]; }
};

struct Peak {
  GridIndex idx;
  float score = 0;
};

// 2D map (h x w), row-major.
struct Map2D {
  int w = 0;
  int h = 0;
  std::vector<float> data;

  float& at(int y, int x) { return data[std::size_t(y) * w + x]; }
  float at(int y, int x) const { return data[std::size_t(y) * w + x]; }
};

// (H - min) / (max - min). Throws DegenerateHeatmap when max == min.
Heatmap3D normalize(const Heatmap3D& h);

// Index of the largest entry; ties resolve to the first in scan order
// (y, then x, then z).
GridIndex argmax_index(const Heatmap3D& h);

// Entries strictly greater than every 3x3x3 neighbor (truncated at the
// boundary), sorted by score descending, ties by (y, x, z) ascending.
std::vector<Peak> local_maxima(const Heatmap3D& hn);

// Top-k candidate placements from a normalized heatmap. Peaks above the
// mean + 2*std threshold come first; remaining peaks and then highest
// non-peak entries fill up to k. The first box is always the global argmax.
std::vector<std::pair<PlacementBox, float>> top_k_boxes(const Heatmap3D& hn,
                                                        int k, double aspect);

// Channel z, min-max normalized over that slice only.
Map2D slice_fixed_scale(const Heatmap3D& h, int z);

struct ScaleScores {
  std::vector<float> scores;  // H[y, x, :]
  int argmax = 0;             // ties to the smaller channel
};
ScaleScores slice_fixed_location(const Heatmap3D& h, int x, int y);

// Binary heatmap format: "TOPH", u32le h, w, c, then float32le entries with
// z fastest, then x, then y.
void write_toph(const std::filesystem::path& path, const Heatmap3D& h);
Heatmap3D read_toph(const std::filesystem::path& path,
                    const ScaleGrid& grid = ScaleGrid::make_default());

// One P5 graymap per scale channel, min-max normalized per channel.
// Files are named <prefix>_z00.pgm etc. under dir.
void render_channels(const Heatmap3D& h, const std::filesystem::path& dir,
                     const std::string& prefix);

}  // namespace placekit
