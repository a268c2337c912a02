#include "placekit/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace placekit {

int ScaleGrid::nearest(double s) const {
  int best = 0;
  double best_d = std::abs(s - values[0]);
  for (int i = 1; i < channels(); ++i) {
    double d = std::abs(s - values[std::size_t(i)]);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

double scale_of_box(const PlacementBox& box, ImageDims dims) {
  return std::sqrt(box.w * box.h / (double(dims.w) * double(dims.h)));
}

PlacementBox box_from_center_scale(double cx, double cy, double s,
                                   double aspect, ImageDims dims) {
  // Solve w*h = s^2*w_b*h_b and w/h = aspect.
  double area = s * s * double(dims.w) * double(dims.h);
  double w = std::sqrt(area * aspect);
  double h = w / aspect;
  return PlacementBox{cx - w / 2, cy - h / 2, w, h};
}

PlacementBox box_from_index(GridIndex idx, const ScaleGrid& grid,
                            ImageDims dims, double aspect) {
  return box_from_center_scale(double(idx.x), double(idx.y),
                               grid.values[std::size_t(idx.z)], aspect, dims);
}

GridIndex index_from_box(const PlacementBox& box, const ScaleGrid& grid,
                         ImageDims dims) {
  int x = int(std::lround(box.cx()));
  int y = int(std::lround(box.cy()));
  x = std::clamp(x, 0, dims.w - 1);
  y = std::clamp(y, 0, dims.h - 1);
  return GridIndex{x, y, grid.nearest(scale_of_box(box, dims))};
}

double iou(const PlacementBox& a, const PlacementBox& b) {
  double iw = std::min(a.right(), b.right()) - std::max(a.l, b.l);
  double ih = std::min(a.bottom(), b.bottom()) - std::max(a.t, b.t);
  if (iw <= 0 || ih <= 0) return 0.0;
  double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

PlacementBox clip_box(const PlacementBox& box, ImageDims dims) {
  double l = std::max(box.l, 0.0);
  double t = std::max(box.t, 0.0);
  double r = std::min(box.right(), double(dims.w));
  double b = std::min(box.bottom(), double(dims.h));
  if (r <= l || b <= t) throw EmptyClip("box does not intersect the image");
  return PlacementBox{l, t, r - l, b - t};
}

}  // namespace placekit
