#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "json.hpp"
#include "placekit/image.hpp"
#include "placekit/synthworld.hpp"

using namespace placekit;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  std::string cmd = std::string(PLACEKIT_CLI_PATH) + " " + args;
  int rc = std::system(cmd.c_str());
  return rc < 0 ? rc : WEXITSTATUS(rc);
}

int run_capture(const std::string& args, const fs::path& out_file) {
  return run(args + " > " + out_file.string() + " 2>/dev/null");
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream f(e.path(), std::ios::binary);
    out[e.path().filename().string()] =
        std::string((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  }
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("definitely-not-a-subcommand 2>/dev/null") == 1);
  CHECK(run("eval --data somewhere 2>/dev/null") == 1);  // missing checkpoint
  CHECK(run("slice --checkpoint x --bg a --obj b 2>/dev/null") == 1);
  CHECK(run("--help > /dev/null") == 0);
}

TEST_CASE("missing files exit with code 2") {
  CHECK(run("eval --checkpoint /nonexistent.ck --data /nonexistent "
            "2>/dev/null") == 2);
  CHECK(run("render --heatmap /nonexistent.toph 2>/dev/null") == 2);
}

TEST_CASE("gen-data is byte-reproducible") {
  TempDir tmp("placekit_cli_gen");
  fs::path d1 = tmp.path / "d1", d2 = tmp.path / "d2";
  CHECK(run_capture("gen-data --seed 7 --n 5 --out " + d1.string() +
                        " --size 32",
                    tmp.path / "log1") == 0);
  CHECK(run_capture("gen-data --seed 7 --n 5 --out " + d2.string() +
                        " --size 32",
                    tmp.path / "log2") == 0);
  auto c1 = dir_contents(d1), c2 = dir_contents(d2);
  CHECK(c1.size() == 16);  // manifest + 5 * (bg, obj, meta)
  CHECK(c1 == c2);

  fs::path d3 = tmp.path / "d3";
  CHECK(run_capture("gen-data --seed 8 --n 5 --out " + d3.string() +
                        " --size 32",
                    tmp.path / "log3") == 0);
  CHECK(dir_contents(d3) != c1);
}

TEST_CASE("train / eval / predict / slice / render / attend pipeline") {
  TempDir tmp("placekit_cli_pipe");
  fs::path data = tmp.path / "data";
  fs::path cfg_path = tmp.path / "cfg.json";
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({"model": {"k": 3, "d_enc": 8, "d_t": 16, "d_ff": 16,
                "n_layers": 1, "n_heads": 2, "c": 16}})";
  }
  REQUIRE(run_capture("gen-data --seed 3 --n 6 --out " + data.string() +
                          " --size 32",
                      tmp.path / "gen.log") == 0);

  fs::path ckpt = tmp.path / "model.ck";
  REQUIRE(run_capture("train --data " + data.string() + " --out " +
                          ckpt.string() + " --config " + cfg_path.string() +
                          " --steps 4 --batch 2 --eval-every 2 --seed 5",
                      tmp.path / "train.log") == 0);
  REQUIRE(fs::exists(ckpt));
  {
    // progress lines parse as JSON
    std::ifstream f(tmp.path / "train.log");
    std::string line;
    int lines = 0;
    while (std::getline(f, line)) {
      auto j = nlohmann::json::parse(line);
      CHECK(j.contains("loss"));
      ++lines;
    }
    CHECK(lines == 2);
  }

  fs::path eval_json = tmp.path / "eval.json";
  REQUIRE(run_capture("eval --checkpoint " + ckpt.string() + " --data " +
                          data.string() + " --json",
                      eval_json) == 0);
  {
    std::ifstream f(eval_json);
    auto j = nlohmann::json::parse(f);
    CHECK(j.at("n_samples").get<int>() == 6);
    CHECK(j.at("mean_iou").get<double>() >= 0.0);
    CHECK(j.at("mean_iou").get<double>() <= 1.0);
  }

  // resume support: continuing for 0 extra steps preserves the checkpoint
  fs::path ckpt2 = tmp.path / "model2.ck";
  REQUIRE(run_capture("train --data " + data.string() + " --out " +
                          ckpt2.string() + " --config " + cfg_path.string() +
                          " --steps 4 --batch 2 --eval-every 2 --seed 5 "
                          "--resume " +
                          ckpt.string(),
                      tmp.path / "resume.log") == 0);

  fs::path pred_dir = tmp.path / "pred";
  fs::path pred_json = tmp.path / "pred.json";
  REQUIRE(run_capture("predict --checkpoint " + ckpt.string() + " --bg " +
                          (data / "bg_000000.ppm").string() + " --obj " +
                          (data / "obj_000000.ppm").string() + " --out " +
                          pred_dir.string() + " --k 5 --json",
                      pred_json) == 0);
  {
    std::ifstream f(pred_json);
    auto j = nlohmann::json::parse(f);
    CHECK(j.at("forward_passes").get<int>() == 1);
    CHECK(j.at("boxes").size() == 5);
    CHECK(fs::exists(pred_dir / "heatmap.toph"));
    CHECK(fs::exists(pred_dir / "preview_0.ppm"));
  }

  fs::path render_dir = tmp.path / "render";
  REQUIRE(run_capture("render --heatmap " +
                          (pred_dir / "heatmap.toph").string() + " --out " +
                          render_dir.string(),
                      tmp.path / "render.log") == 0);
  CHECK(fs::exists(render_dir / "heatmap_z00.pgm"));
  CHECK(fs::exists(render_dir / "heatmap_z15.pgm"));

  fs::path slice_json = tmp.path / "slice.json";
  REQUIRE(run_capture("slice --checkpoint " + ckpt.string() + " --bg " +
                          (data / "bg_000001.ppm").string() + " --obj " +
                          (data / "obj_000001.ppm").string() +
                          " --fix-scale 4 --out " + tmp.path.string() +
                          " --json",
                      slice_json) == 0);
  {
    std::ifstream f(slice_json);
    auto j = nlohmann::json::parse(f);
    CHECK(j.at("best_location").size() == 2);
    CHECK(fs::exists(tmp.path / "slice_z4.pgm"));
  }
  fs::path loc_json = tmp.path / "loc.json";
  REQUIRE(run_capture("slice --checkpoint " + ckpt.string() + " --bg " +
                          (data / "bg_000001.ppm").string() + " --obj " +
                          (data / "obj_000001.ppm").string() +
                          " --fix-location 10,12 --json",
                      loc_json) == 0);
  {
    std::ifstream f(loc_json);
    auto j = nlohmann::json::parse(f);
    CHECK(j.at("scores").size() == 16);
    CHECK(j.at("argmax_z").get<int>() >= 0);
  }

  fs::path attn_json = tmp.path / "attn.json";
  REQUIRE(run_capture("attend --checkpoint " + ckpt.string() + " --bg " +
                          (data / "bg_000002.ppm").string() + " --obj " +
                          (data / "obj_000002.ppm").string() +
                          " --layer 0 --head 1 --out " +
                          (tmp.path / "attn.pgm").string() + " --json",
                      attn_json) == 0);
  {
    std::ifstream f(attn_json);
    auto j = nlohmann::json::parse(f);
    auto map = j.at("map").get<std::vector<double>>();
    CHECK(map.size() == 16);  // 4x4 grid at 32/2^3
    double sum = 0;
    for (double v : map) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(fs::exists(tmp.path / "attn.pgm"));
  }
}

TEST_CASE("composite preview pastes the object with white transparent") {
  OracleParams p;
  Scene s = generate_scene(31, p, ImageDims{64, 64});
  ImageRGB composite = composite_preview(s.bg, s.obj, s.gt.box);
  CHECK(composite.w == 64);
  CHECK(composite.h == 64);
  // something changed inside the gt box, nothing outside it
  bool changed_inside = false;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      bool inside = x >= int(s.gt.box.l) - 1 && x <= int(s.gt.box.right()) + 1 &&
                    y >= int(s.gt.box.t) - 1 && y <= int(s.gt.box.bottom()) + 1;
      const auto* a = composite.at(x, y);
      const auto* b = s.bg.at(x, y);
      bool same = a[0] == b[0] && a[1] == b[1] && a[2] == b[2];
      if (!inside) CHECK(same);
      if (inside && !same) changed_inside = true;
    }
  CHECK(changed_inside);

  // an all-white object leaves the background untouched
  ImageRGB white(12, 12, {255, 255, 255});
  CHECK(composite_preview(s.bg, white, s.gt.box) == s.bg);

  // pixel at the box center comes from the object's center pixel
  ImageRGB obj(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      obj.set(x, y, {std::uint8_t(x * 16), std::uint8_t(y * 16), 7});
  PlacementBox box{16, 16, 32, 32};
  ImageRGB out = composite_preview(s.bg, obj, box);
  const auto* center = out.at(32, 32);
  const auto* src = obj.at(8, 8);
  CHECK(center[0] == src[0]);
  CHECK(center[1] == src[1]);
  CHECK(center[2] == src[2]);

  CHECK_THROWS_AS(composite_preview(s.bg, obj, PlacementBox{-99, -99, 4, 4}),
                  EmptyClip);
}
