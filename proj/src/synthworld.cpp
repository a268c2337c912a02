#include "placekit/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace placekit {

namespace {

using nlohmann::json;

// Disjoint hue palettes: sky blues, ground greens, gray obstacles, warm
// grounded objects, purple flyers.
Rgb sample_sky_top(Rng& rng) {
  return hsv_to_rgb(rng.uniform(200, 230), rng.uniform(0.35, 0.6),
                    rng.uniform(0.65, 0.85));
}
Rgb sample_sky_bottom(Rng& rng) {
  return hsv_to_rgb(rng.uniform(195, 225), rng.uniform(0.15, 0.35),
                    rng.uniform(0.85, 0.98));
}
Rgb sample_ground(Rng& rng) {
  return hsv_to_rgb(rng.uniform(80, 140), rng.uniform(0.4, 0.7),
                    rng.uniform(0.35, 0.6));
}
Rgb sample_obstacle(Rng& rng) {
  return hsv_to_rgb(rng.uniform(0, 360), rng.uniform(0.0, 0.06),
                    rng.uniform(0.15, 0.35));
}
Rgb sample_object_color(ObjectSpec::Category cat, Rng& rng) {
  double hue = cat == ObjectSpec::Category::grounded ? rng.uniform(0, 50)
                                                     : rng.uniform(280, 330);
  return hsv_to_rgb(hue, rng.uniform(0.75, 0.95), rng.uniform(0.7, 0.95));
}

ImageRGB render_background(ImageDims dims, int horizon_row, Rgb sky_top,
                           Rgb sky_bottom, Rgb ground,
                           const std::vector<PlacementBox>& obstacles,
                           Rgb obstacle_color) {
  ImageRGB bg(dims.w, dims.h);
  for (int y = 0; y < dims.h; ++y) {
    Rgb c;
    if (y < horizon_row) {
      double t = horizon_row > 1 ? double(y) / (horizon_row - 1) : 0.0;
      for (int ch = 0; ch < 3; ++ch)
        c[std::size_t(ch)] = std::uint8_t(std::lround(
            (1 - t) * sky_top[std::size_t(ch)] + t * sky_bottom[std::size_t(ch)]));
    } else {
      c = ground;
    }
    for (int x = 0; x < dims.w; ++x) bg.set(x, y, c);
  }
  for (const auto& ob : obstacles)
    fill_rect(bg, int(std::lround(ob.l)), int(std::lround(ob.t)),
              int(std::lround(ob.right())), int(std::lround(ob.bottom())),
              obstacle_color);
  return bg;
}

ImageRGB render_object(const ObjectSpec& spec, int w_o, int h_o) {
  ImageRGB obj(w_o, h_o, {255, 255, 255});
  if (spec.shape == ObjectSpec::Shape::rectangle) {
    fill_rect(obj, 0, 0, w_o, h_o, spec.color);
  } else {
    fill_ellipse(obj, w_o / 2.0, h_o / 2.0, w_o / 2.0, h_o / 2.0, spec.color);
  }
  return obj;
}

Scene generate_once(std::uint64_t seed, std::uint64_t stream_seed,
                    const OracleParams& params, ImageDims dims,
                    const ScaleGrid& grid) {
  Rng rng = Rng::derive(stream_seed, 0x7363656e65ull);
  Scene s;
  s.seed = seed;
  s.oracle = params;

  double horizon_frac =
      rng.uniform(params.horizon_frac_lo, params.horizon_frac_hi);
  s.horizon_row = int(std::lround(horizon_frac * dims.h));

  s.spec.category = params.bimodal ? ObjectSpec::Category::grounded
                     : (rng.uniform() < params.flyer_frac
                            ? ObjectSpec::Category::flyer
                            : ObjectSpec::Category::grounded);
  double aspect = rng.uniform(0.5, 2.0);
  int base = std::max(8, int(std::lround(0.75 * std::min(dims.w, dims.h))));
  int w_o, h_o;
  if (aspect >= 1.0) {
    w_o = base;
    h_o = std::max(1, int(std::lround(base / aspect)));
  } else {
    h_o = base;
    w_o = std::max(1, int(std::lround(base * aspect)));
  }
  s.spec.aspect = double(w_o) / double(h_o);
  s.spec.shape = rng.uniform() < 0.5 ? ObjectSpec::Shape::ellipse
                                     : ObjectSpec::Shape::rectangle;
  s.spec.color = sample_object_color(s.spec.category, rng);

  Rgb sky_top = sample_sky_top(rng);
  Rgb sky_bottom = sample_sky_bottom(rng);
  Rgb ground = sample_ground(rng);
  Rgb obstacle_color = sample_obstacle(rng);

  int ground_h = dims.h - s.horizon_row;
  if (params.bimodal) {
    double w = 0.28 * dims.w;
    double cx = rng.uniform(0.45, 0.55) * dims.w;
    s.obstacles.push_back(PlacementBox{std::floor(cx - w / 2),
                                       double(s.horizon_row), std::floor(w),
                                       double(ground_h)});
  } else {
    int span = std::max(0, params.obstacles_max - params.obstacles_min);
    int n_obs = params.obstacles_min + int(rng.uniform_int(std::uint64_t(span) + 1));
    for (int i = 0; i < n_obs; ++i) {
      double ow = std::floor(rng.uniform(0.08, 0.22) * dims.w);
      double oh = std::floor(rng.uniform(0.10, 0.30) * ground_h);
      if (ow < 2 || oh < 2) continue;
      double ot = std::floor(rng.uniform(s.horizon_row, dims.h - oh));
      double ol = std::floor(rng.uniform(0, dims.w - ow));
      s.obstacles.push_back(PlacementBox{ol, ot, ow, oh});
    }
  }

  s.bg = render_background(dims, s.horizon_row, sky_top, sky_bottom, ground,
                           s.obstacles, obstacle_color);
  s.obj = render_object(s.spec, w_o, h_o);
  s.gt = sample_gt_placement(s, rng, grid);
  return s;
}

}  // namespace

bool oracle_plausibility(const Scene& scene, const PlacementBox& box) {
  ImageDims dims = scene.dims();
  bool inside = box.l >= 0 && box.t >= 0 && box.right() <= dims.w &&
                box.bottom() <= dims.h;
  if (!inside) return false;
  double s = scale_of_box(box, dims);
  const OracleParams& p = scene.oracle;
  if (scene.spec.category == ObjectSpec::Category::flyer) {
    return box.bottom() <= scene.horizon_row && s >= p.flyer_lo &&
           s <= p.flyer_hi;
  }
  double y_bot = box.bottom();
  if (y_bot < scene.horizon_row) return false;
  double denom = std::max(1.0, double(dims.h - 1 - scene.horizon_row));
  double s_star =
      p.s_min + (p.s_max - p.s_min) * (y_bot - scene.horizon_row) / denom;
  if (std::abs(s - s_star) > p.tau_s) return false;
  for (const auto& ob : scene.obstacles)
    if (iou(box, ob) >= p.max_obstacle_iou) return false;
  return true;
}

GroundTruth sample_gt_placement(const Scene& scene, Rng& rng,
                                const ScaleGrid& grid, int max_draws) {
  ImageDims dims = scene.dims();
  int c = grid.channels();
  for (int i = 0; i < max_draws; ++i) {
    GridIndex idx{int(rng.uniform_int(std::uint64_t(dims.w))),
                  int(rng.uniform_int(std::uint64_t(dims.h))),
                  int(rng.uniform_int(std::uint64_t(c)))};
    PlacementBox box = box_from_index(idx, grid, dims, scene.spec.aspect);
    if (oracle_plausibility(scene, box)) return GroundTruth{idx, box};
  }
  throw OracleInfeasible("no plausible placement found");
}

Scene generate_scene(std::uint64_t seed, const OracleParams& params,
                     ImageDims dims, const ScaleGrid& grid) {
  if (!dims.valid()) throw BadDim("generate_scene: image dims too small");
  std::uint64_t stream = seed;
  for (int attempt = 0;; ++attempt) {
    try {
      return generate_once(seed, stream, params, dims, grid);
    } catch (const OracleInfeasible&) {
      if (attempt >= 8) throw;
      stream = Rng::derive(seed, 0x72657472ull + std::uint64_t(attempt))
                   .next_u64();
    }
  }
}

Heatmap3D oracle_heatmap(const Scene& scene, const ScaleGrid& grid) {
  ImageDims dims = scene.dims();
  Heatmap3D h(dims, grid);
  for (int y = 0; y < dims.h; ++y)
    for (int x = 0; x < dims.w; ++x)
      for (int z = 0; z < grid.channels(); ++z) {
        PlacementBox box =
            box_from_index(GridIndex{x, y, z}, grid, dims, scene.spec.aspect);
        h.at(y, x, z) = oracle_plausibility(scene, box) ? 1.0f : 0.0f;
      }
  return h;
}

// ---------------------------------------------------------------------------
// dataset io

namespace {

json box_to_json(const PlacementBox& b) {
  return json::array({b.l, b.t, b.w, b.h});
}
PlacementBox box_from_json(const json& j) {
  return PlacementBox{j.at(0).get<double>(), j.at(1).get<double>(),
                      j.at(2).get<double>(), j.at(3).get<double>()};
}

json oracle_to_json(const OracleParams& p) {
  return json{{"horizon_frac", {p.horizon_frac_lo, p.horizon_frac_hi}},
              {"s_min", p.s_min},
              {"s_max", p.s_max},
              {"tau_s", p.tau_s},
              {"flyer_band", {p.flyer_lo, p.flyer_hi}},
              {"max_obstacle_iou", p.max_obstacle_iou},
              {"flyer_frac", p.flyer_frac},
              {"obstacles", {p.obstacles_min, p.obstacles_max}},
              {"bimodal", p.bimodal}};
}

OracleParams oracle_from_json(const json& j) {
  OracleParams p;
  p.horizon_frac_lo = j.at("horizon_frac").at(0).get<double>();
  p.horizon_frac_hi = j.at("horizon_frac").at(1).get<double>();
  p.s_min = j.at("s_min").get<double>();
  p.s_max = j.at("s_max").get<double>();
  p.tau_s = j.at("tau_s").get<double>();
  p.flyer_lo = j.at("flyer_band").at(0).get<double>();
  p.flyer_hi = j.at("flyer_band").at(1).get<double>();
  p.max_obstacle_iou = j.at("max_obstacle_iou").get<double>();
  p.flyer_frac = j.at("flyer_frac").get<double>();
  if (j.contains("obstacles")) {
    p.obstacles_min = j.at("obstacles").at(0).get<int>();
    p.obstacles_max = j.at("obstacles").at(1).get<int>();
  }
  p.bimodal = j.at("bimodal").get<bool>();
  return p;
}

std::string index_name(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06d.%s", stem, i, ext);
  return buf;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << "\n";
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw CorruptDataset("missing file " + path.string());
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded())
    throw CorruptDataset("invalid JSON in " + path.string());
  return j;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  json manifest{{"format", 1},
                {"count", ds.scenes.size()},
                {"dims", {{"w", ds.dims.w}, {"h", ds.dims.h}}},
                {"grid", ds.grid.values}};
  write_json_file(dir / "manifest.json", manifest);
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    const Scene& s = ds.scenes[i];
    write_ppm(dir / index_name("bg", int(i), "ppm"), s.bg);
    write_ppm(dir / index_name("obj", int(i), "ppm"), s.obj);
    json obstacles = json::array();
    for (const auto& ob : s.obstacles) obstacles.push_back(box_to_json(ob));
    json meta{
        {"seed", s.seed},
        {"horizon_row", s.horizon_row},
        {"spec",
         {{"category", s.spec.category == ObjectSpec::Category::grounded
                           ? "grounded"
                           : "flyer"},
          {"aspect", s.spec.aspect},
          {"color", {s.spec.color[0], s.spec.color[1], s.spec.color[2]}},
          {"shape", s.spec.shape == ObjectSpec::Shape::ellipse
                        ? "ellipse"
                        : "rectangle"}}},
        {"oracle", oracle_to_json(s.oracle)},
        {"obstacles", obstacles},
        {"gt",
         {{"index", {s.gt.idx.x, s.gt.idx.y, s.gt.idx.z}},
          {"box", box_to_json(s.gt.box)}}}};
    write_json_file(dir / index_name("meta", int(i), "json"), meta);
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  json manifest = read_json_file(dir / "manifest.json");
  if (manifest.value("format", 0) != 1)
    throw CorruptDataset("unsupported dataset format");
  Dataset ds;
  ds.dims.w = manifest.at("dims").at("w").get<int>();
  ds.dims.h = manifest.at("dims").at("h").get<int>();
  ds.grid.values = manifest.at("grid").get<std::vector<double>>();
  std::size_t count = manifest.at("count").get<std::size_t>();
  ds.scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Scene s;
    try {
      s.bg = read_ppm(dir / index_name("bg", int(i), "ppm"));
      s.obj = read_ppm(dir / index_name("obj", int(i), "ppm"));
    } catch (const Error& e) {
      throw CorruptDataset(e.what());
    }
    if (s.bg.w != ds.dims.w || s.bg.h != ds.dims.h)
      throw CorruptDataset("background size disagrees with manifest");
    json meta = read_json_file(dir / index_name("meta", int(i), "json"));
    s.seed = meta.at("seed").get<std::uint64_t>();
    s.horizon_row = meta.at("horizon_row").get<int>();
    const json& spec = meta.at("spec");
    s.spec.category = spec.at("category").get<std::string>() == "grounded"
                          ? ObjectSpec::Category::grounded
                          : ObjectSpec::Category::flyer;
    s.spec.aspect = spec.at("aspect").get<double>();
    for (int ch = 0; ch < 3; ++ch)
      s.spec.color[std::size_t(ch)] =
          spec.at("color").at(ch).get<std::uint8_t>();
    s.spec.shape = spec.at("shape").get<std::string>() == "ellipse"
                       ? ObjectSpec::Shape::ellipse
                       : ObjectSpec::Shape::rectangle;
    s.oracle = oracle_from_json(meta.at("oracle"));
    for (const auto& ob : meta.at("obstacles"))
      s.obstacles.push_back(box_from_json(ob));
    s.gt.idx = GridIndex{meta.at("gt").at("index").at(0).get<int>(),
                         meta.at("gt").at("index").at(1).get<int>(),
                         meta.at("gt").at("index").at(2).get<int>()};
    s.gt.box = box_from_json(meta.at("gt").at("box"));
    if (!oracle_plausibility(s, s.gt.box))
      throw CorruptDataset("stored ground truth fails the oracle");
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

}  // namespace placekit
