#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "placekit/geometry.hpp"
#include "placekit/rng.hpp"

using namespace placekit;

namespace {

// Pixel-counting IOU oracle for integer-coordinate boxes: rasterize both on
// the integer grid and count cells.
double iou_pixel_oracle(const PlacementBox& a, const PlacementBox& b) {
  auto covers = [](const PlacementBox& box, int x, int y) {
    return x >= int(box.l) && x < int(box.l + box.w) && y >= int(box.t) &&
           y < int(box.t + box.h);
  };
  int x0 = int(std::min(a.l, b.l)), x1 = int(std::max(a.right(), b.right()));
  int y0 = int(std::min(a.t, b.t)), y1 = int(std::max(a.bottom(), b.bottom()));
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      bool ca = covers(a, x, y), cb = covers(b, x, y);
      inter += ca && cb;
      uni += ca || cb;
    }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

}  // namespace

TEST_CASE("scale_of_box basics") {
  ImageDims d{224, 224};
  CHECK(scale_of_box({0, 0, 112, 112}, d) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(scale_of_box({0, 0, 224, 224}, d) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(scale_of_box({5, 9, 32, 72}, ImageDims{64, 64}) ==
        doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("box_from_index centers and area") {
  ScaleGrid g = ScaleGrid::make_default();
  ImageDims d{64, 64};

  PlacementBox b = box_from_index({32, 32, 7}, g, d, 1.0);  // s = 0.5
  CHECK(b.l == doctest::Approx(16.0));
  CHECK(b.t == doctest::Approx(16.0));
  CHECK(b.w == doctest::Approx(32.0));
  CHECK(b.h == doctest::Approx(32.0));

  PlacementBox b2 = box_from_index({32, 32, 7}, g, d, 2.0);
  CHECK(b2.w * b2.h == doctest::Approx(1024.0).epsilon(1e-9));
  CHECK(b2.w / b2.h == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(b2.cx() == doctest::Approx(32.0));
  CHECK(b2.cy() == doctest::Approx(32.0));

  PlacementBox b3 = box_from_index({0, 0, 7}, g, d, 1.0);
  CHECK(b3.l < 0);  // unclipped by construction
  CHECK(b3.t < 0);
}

TEST_CASE("index_from_box nearest scale and clamping") {
  ScaleGrid g = ScaleGrid::make_default();
  ImageDims d{64, 64};
  CHECK(g.nearest(0.37) == 4);   // 0.35 is closer than 0.40
  CHECK(g.nearest(0.10) == 0);   // clamped to the smallest scale
  CHECK(g.nearest(0.375) == 4);  // tie breaks toward the smaller index
  CHECK(g.nearest(2.0) == 15);

  GridIndex idx{20, 30, 5};
  PlacementBox box = box_from_index(idx, g, d, 1.3);
  CHECK(index_from_box(box, g, d) == idx);
}

TEST_CASE("iou examples") {
  CHECK(iou({3, 4, 10, 6}, {3, 4, 10, 6}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 2, 2}, {10, 10, 2, 2}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0));
  CHECK(iou({0, 0, 2, 2}, {2, 0, 2, 2}) == 0.0);  // touching edges
}

TEST_CASE("clip_box") {
  ImageDims d{64, 64};
  PlacementBox inside{5, 6, 10, 12};
  PlacementBox c = clip_box(inside, d);
  CHECK(c == inside);

  PlacementBox crossing{-4, -4, 8, 8};
  PlacementBox cc = clip_box(crossing, d);
  CHECK(cc.l == 0.0);
  CHECK(cc.t == 0.0);
  CHECK(cc.w == doctest::Approx(4.0));
  CHECK(cc.h == doctest::Approx(4.0));

  CHECK_THROWS_AS(clip_box({-20, -20, 5, 5}, d), EmptyClip);
}

TEST_CASE("scale round-trips through box_from_index") {
  ScaleGrid g = ScaleGrid::make_default();
  ImageDims d{64, 48};
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    GridIndex idx{int(rng.uniform_int(64)), int(rng.uniform_int(48)),
                  int(rng.uniform_int(16))};
    double aspect = rng.uniform(0.2, 5.0);
    PlacementBox b = box_from_index(idx, g, d, aspect);
    CHECK(std::abs(scale_of_box(b, d) - g.values[std::size_t(idx.z)]) < 1e-9);
  }
}

TEST_CASE("iou is symmetric, bounded, and 1 iff identical") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    PlacementBox a{rng.uniform(-10, 50), rng.uniform(-10, 50),
                   rng.uniform(1, 30), rng.uniform(1, 30)};
    PlacementBox b{rng.uniform(-10, 50), rng.uniform(-10, 50),
                   rng.uniform(1, 30), rng.uniform(1, 30)};
    double v = iou(a, b);
    CHECK(v == doctest::Approx(iou(b, a)).epsilon(1e-12));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("iou agrees with the pixel-count oracle on integer boxes") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    PlacementBox a{double(rng.uniform_int(40)), double(rng.uniform_int(40)),
                   double(1 + rng.uniform_int(24)),
                   double(1 + rng.uniform_int(24))};
    PlacementBox b{double(rng.uniform_int(40)), double(rng.uniform_int(40)),
                   double(1 + rng.uniform_int(24)),
                   double(1 + rng.uniform_int(24))};
    double tol = 2.0 / std::min(a.area(), b.area());
    CHECK(std::abs(iou(a, b) - iou_pixel_oracle(a, b)) <= tol);
  }
}

TEST_CASE("index_from_box inverts box_from_index on the lattice") {
  ScaleGrid g = ScaleGrid::make_default();
  ImageDims d{64, 64};
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    GridIndex idx{int(rng.uniform_int(64)), int(rng.uniform_int(64)),
                  int(rng.uniform_int(16))};
    double aspect = rng.uniform(0.5, 2.0);
    CHECK(index_from_box(box_from_index(idx, g, d, aspect), g, d) == idx);
  }
}
