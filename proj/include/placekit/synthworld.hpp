#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "placekit/heatmap.hpp"
#include "placekit/image.hpp"
#include "placekit/loss.hpp"
#include "placekit/rng.hpp"

// Procedural scene world with an analytic placement oracle. A scene is a sky
// band over a ground plane: grounded objects sit on the ground with scale
// growing linearly as the bottom edge approaches the camera, flyers live in
// the sky within a fixed scale band. Object category is encoded by hue so
// the rule is learnable from pixels alone.
namespace placekit {

struct OracleParams {
  double horizon_frac_lo = 0.30;   // horizon row sampled per scene from
  double horizon_frac_hi = 0.50;   // [lo, hi] * h
  double s_min = 0.15;             // grounded scale at the horizon
  double s_max = 0.60;             // grounded scale at the bottom row
  double tau_s = 0.05;             // scale tolerance around the perspective line
  double flyer_lo = 0.15;          // flyer scale band
  double flyer_hi = 0.35;
  double max_obstacle_iou = 0.05;  // overlap cap against obstacles
  double flyer_frac = 0.4;         // fraction of flyer scenes
  int obstacles_min = 0;           // obstacles per scene, uniform range
  int obstacles_max = 3;
  bool bimodal = false;            // central wall splits the ground region

  bool operator==(const OracleParams&) const = default;
};

struct ObjectSpec {
  enum class Category { grounded, flyer };
  enum class Shape { ellipse, rectangle };

  Category category = Category::grounded;
  double aspect = 1.0;  // w_o / h_o, in [0.5, 2.0]
  Rgb color = {0, 0, 0};
  Shape shape = Shape::ellipse;

  bool operator==(const ObjectSpec&) const = default;
};

struct Scene {
  ImageRGB bg;
  ImageRGB obj;  // object raster on white
  ObjectSpec spec;
  OracleParams oracle;
  int horizon_row = 0;
  std::vector<PlacementBox> obstacles;
  GroundTruth gt;
  std::uint64_t seed = 0;

  ImageDims dims() const { return ImageDims{bg.w, bg.h}; }
};

// Deterministic in (seed, params, dims). Throws OracleInfeasible only after
// 8 reseeded retries fail to admit any plausible placement.
Scene generate_scene(std::uint64_t seed, const OracleParams& params,
                     ImageDims dims,
                     const ScaleGrid& grid = ScaleGrid::make_default());

bool oracle_plausibility(const Scene& scene, const PlacementBox& box);

// Exhaustive 0/1 evaluation of every lattice placement.
Heatmap3D oracle_heatmap(const Scene& scene, const ScaleGrid& grid);

// Uniform rejection sampling over the lattice until a plausible cell is hit.
GroundTruth sample_gt_placement(const Scene& scene, Rng& rng,
                                const ScaleGrid& grid, int max_draws = 10000);

struct Dataset {
  ImageDims dims;
  ScaleGrid grid;
  std::vector<Scene> scenes;
};

// bg_%06d.ppm / obj_%06d.ppm / meta_%06d.json plus manifest.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace placekit
