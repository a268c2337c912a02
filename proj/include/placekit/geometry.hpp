#pragma once

#include <vector>

#include "placekit/errors.hpp"

namespace placekit {

struct ImageDims {
  int w = 0;  // background width, pixels
  int h = 0;  // background height, pixels

  bool valid() const { return w >= 8 && h >= 8; }
};

// A candidate placement [left, top, width, height] in background pixel
// coordinates. Real-valued and unclipped by construction; clipping happens
// only when rendering or scoring IOU.
struct PlacementBox {
  double l = 0;
  double t = 0;
  double w = 0;
  double h = 0;

  double right() const { return l + w; }
  double bottom() const { return t + h; }
  double cx() const { return l + w / 2; }
  double cy() const { return t + h / 2; }
  double area() const { return w * h; }

  bool operator==(const PlacementBox&) const = default;
};

// The c discrete scale values the heatmap channels represent.
struct ScaleGrid {
  std::vector<double> values;  // strictly increasing, in (0, 1]

  int channels() const { return int(values.size()); }

  // c = 16, scales 0.15, 0.20, ..., 0.90
  static ScaleGrid make_default() {
    ScaleGrid g;
    for (int i = 0; i < 16; ++i) g.values.push_back(double(15 + 5 * i) / 100.0);
    return g;
  }

  // Index of the nearest scale; ties break toward the smaller index.
  int nearest(double s) const;
};

struct GridIndex {
  int x = 0;  // column
  int y = 0;  // row
  int z = 0;  // scale channel

  bool operator==(const GridIndex&) const = default;
};

// s = sqrt(w*h / (w_b*h_b))
double scale_of_box(const PlacementBox& box, ImageDims dims);

// Box with the given center and scale, at the object's aspect ratio w_o/h_o.
PlacementBox box_from_center_scale(double cx, double cy, double s,
                                   double aspect, ImageDims dims);

// Lattice point -> box centered on it (unclipped).
PlacementBox box_from_index(GridIndex idx, const ScaleGrid& grid,
                            ImageDims dims, double aspect);

// Box -> nearest lattice point. Center rounds to the nearest integer and
// clamps into range; z is the nearest grid scale (ties toward smaller).
GridIndex index_from_box(const PlacementBox& box, const ScaleGrid& grid,
                         ImageDims dims);

// Intersection over union; 0 for disjoint boxes.
double iou(const PlacementBox& a, const PlacementBox& b);

// Intersection of box with [0,w]x[0,h]. Throws EmptyClip if the
// intersection has zero area.
PlacementBox clip_box(const PlacementBox& box, ImageDims dims);

}  // namespace placekit
