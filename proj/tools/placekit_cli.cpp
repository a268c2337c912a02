// Command-line front end: dataset generation, training, evaluation,
// single-pair prediction, interactive slice queries, and rendering.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "placekit/config.hpp"
#include "placekit/trainer.hpp"

using namespace placekit;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  bool json_out = false;
};

RunConfig load_run_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) {
    std::ifstream f(opts.config_path);
    if (!f) throw Error("cannot open config " + opts.config_path);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded())
      throw Error("invalid JSON in config " + opts.config_path);
    cfg = run_config_from_json(j);
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "run config JSON file");
  cmd->add_flag("--json", opts.json_out, "machine-readable JSON on stdout");
}

PlacementNet model_from_checkpoint(const std::filesystem::path& path,
                                   CheckpointData& ck, ScaleGrid& grid) {
  ck = read_checkpoint(path);
  json cfg = json::parse(ck.config_json);
  ModelConfig mc = model_config_from_json(cfg.at("model"));
  if (cfg.contains("grid"))
    grid.values = cfg.at("grid").get<std::vector<double>>();
  PlacementNet net(mc, 0);
  unpack_params(ck, net.parameters());
  return net;
}

json boxes_to_json(const std::vector<std::pair<PlacementBox, float>>& boxes) {
  json out = json::array();
  for (const auto& [b, score] : boxes)
    out.push_back({{"box", {b.l, b.t, b.w, b.h}}, {"score", score}});
  return out;
}

int cmd_gen_data(const CommonOpts& opts, std::uint64_t seed, int n,
                 const std::string& out_dir, int size, bool bimodal,
                 double flyer_frac) {
  RunConfig cfg = load_run_config(opts);
  if (bimodal) cfg.oracle.bimodal = true;
  if (flyer_frac >= 0) cfg.oracle.flyer_frac = flyer_frac;
  Dataset ds;
  ds.dims = ImageDims{size, size};
  ds.grid = cfg.grid;
  ds.scenes.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    std::uint64_t scene_seed = Rng::derive(seed, std::uint64_t(i)).next_u64();
    ds.scenes.push_back(
        generate_scene(scene_seed, cfg.oracle, ds.dims, ds.grid));
  }
  write_dataset(out_dir, ds);
  if (opts.json_out)
    std::cout << json{{"count", n}, {"dir", out_dir}}.dump() << "\n";
  else
    std::cout << "wrote " << n << " scenes to " << out_dir << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir,
              const std::string& eval_dir, const std::string& out_path,
              const std::string& resume_path, const json& overrides) {
  RunConfig cfg = load_run_config(opts);
  if (overrides.contains("total_steps"))
    cfg.train.total_steps = overrides.at("total_steps").get<int>();
  if (overrides.contains("batch_size"))
    cfg.train.batch_size = overrides.at("batch_size").get<int>();
  if (overrides.contains("base_lr"))
    cfg.train.base_lr = overrides.at("base_lr").get<double>();
  if (overrides.contains("weight_decay"))
    cfg.train.weight_decay = overrides.at("weight_decay").get<double>();
  if (overrides.contains("seed"))
    cfg.train.seed = overrides.at("seed").get<std::uint64_t>();
  if (overrides.contains("eval_every"))
    cfg.train.eval_every = overrides.at("eval_every").get<int>();
  if (overrides.contains("loss_kind"))
    cfg.train.loss.kind = overrides.at("loss_kind").get<std::string>();
  if (overrides.contains("variant"))
    cfg.model.variant =
        variant_from_string(overrides.at("variant").get<std::string>());

  Dataset train_ds = read_dataset(data_dir);
  if (train_ds.dims.w != train_ds.dims.h)
    throw Error("training images must be square");
  cfg.model.input_size = train_ds.dims.w;
  cfg.model.c = train_ds.grid.channels();
  cfg.grid = train_ds.grid;

  std::vector<Scene> eval_scenes;
  if (!eval_dir.empty()) eval_scenes = read_dataset(eval_dir).scenes;

  PlacementNet net(cfg.model, cfg.train.seed);
  Trainer trainer(net, cfg.train, cfg.grid);
  std::string snapshot = config_snapshot_json(cfg.model, cfg.train, cfg.grid);
  if (!resume_path.empty()) trainer.load_checkpoint(resume_path, snapshot);
  run_training(trainer, train_ds, eval_dir.empty() ? nullptr : &eval_scenes,
               std::cout);
  trainer.save_checkpoint(out_path, snapshot);
  if (!opts.json_out)
    std::cerr << "checkpoint written to " << out_path << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& ckpt,
             const std::string& data_dir, int k) {
  CheckpointData ck;
  ScaleGrid grid = ScaleGrid::make_default();
  PlacementNet net = model_from_checkpoint(ckpt, ck, grid);
  Dataset ds = read_dataset(data_dir);
  EvalReport r = evaluate_model(net, ds.scenes, ds.grid, k);
  if (opts.json_out)
    std::cout << r.to_json_string() << "\n";
  else
    std::cout << r.render_tables();
  return 0;
}

int cmd_predict(const CommonOpts& opts, const std::string& ckpt,
                const std::string& bg_path, const std::string& obj_path,
                const std::string& out_dir, int k) {
  CheckpointData ck;
  ScaleGrid grid = ScaleGrid::make_default();
  PlacementNet net = model_from_checkpoint(ckpt, ck, grid);
  ImageRGB bg = read_ppm(bg_path);
  ImageRGB obj = read_ppm(obj_path);
  if (bg.w != net.config().input_size || bg.h != net.config().input_size)
    throw BadInputSize("background size does not match the model input size");
  double aspect = double(obj.w) / double(obj.h);

  Tensor bg_t = image_to_tensor<float>(bg);
  Tensor obj_t = image_to_tensor<float>(
      PlacementNet::preprocess_object(obj, net.config().input_size));
  std::int64_t before = net.forward_count();
  Heatmap3D h = heatmap_from_tensor(net.forward(bg_t, obj_t), grid);
  std::int64_t passes = net.forward_count() - before;

  Heatmap3D hn = normalize(h);
  auto boxes = top_k_boxes(hn, k, aspect);

  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);
  write_toph(dir / "heatmap.toph", h);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    try {
      write_ppm(dir / ("preview_" + std::to_string(i) + ".ppm"),
                composite_preview(bg, obj, boxes[i].first));
    } catch (const EmptyClip&) {
    }
  }
  json out{{"boxes", boxes_to_json(boxes)},
           {"forward_passes", passes},
           {"heatmap", (dir / "heatmap.toph").string()}};
  if (opts.json_out)
    std::cout << out.dump() << "\n";
  else
    std::cout << "top-" << k << " boxes written to " << out_dir << "\n"
              << out.dump(2) << "\n";
  return 0;
}

int cmd_slice(const CommonOpts& opts, const std::string& ckpt,
              const std::string& bg_path, const std::string& obj_path,
              int fix_scale, const std::string& fix_location,
              const std::string& out_dir) {
  CheckpointData ck;
  ScaleGrid grid = ScaleGrid::make_default();
  PlacementNet net = model_from_checkpoint(ckpt, ck, grid);
  ImageRGB bg = read_ppm(bg_path);
  ImageRGB obj = read_ppm(obj_path);
  Tensor bg_t = image_to_tensor<float>(bg);
  Tensor obj_t = image_to_tensor<float>(
      PlacementNet::preprocess_object(obj, net.config().input_size));
  Heatmap3D h = heatmap_from_tensor(net.forward(bg_t, obj_t), grid);

  json out;
  if (fix_scale >= 0) {
    Map2D m = slice_fixed_scale(h, fix_scale);
    int best = 0;
    for (std::size_t i = 1; i < m.data.size(); ++i)
      if (m.data[i] > m.data[std::size_t(best)]) best = int(i);
    out = json{{"fixed_scale", fix_scale},
               {"best_location", {best % m.w, best / m.w}},
               {"scale_value", grid.values[std::size_t(fix_scale)]}};
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      auto path = std::filesystem::path(out_dir) /
                  ("slice_z" + std::to_string(fix_scale) + ".pgm");
      write_pgm(path, m.w, m.h, m.data);
      out["map"] = path.string();
    }
  } else {
    int x = 0, y = 0;
    if (std::sscanf(fix_location.c_str(), "%d,%d", &x, &y) != 2)
      throw CLI::ValidationError("slice", "--fix-location expects x,y");
    ScaleScores s = slice_fixed_location(h, x, y);
    out = json{{"fixed_location", {x, y}},
               {"scores", s.scores},
               {"argmax_z", s.argmax},
               {"scale_value", grid.values[std::size_t(s.argmax)]}};
  }
  std::cout << out.dump(opts.json_out ? -1 : 2) << "\n";
  return 0;
}

int cmd_render(const std::string& heatmap_path, const std::string& out_dir,
               const std::string& prefix) {
  Heatmap3D h = read_toph(heatmap_path);
  render_channels(h, out_dir, prefix);
  std::cout << "wrote " << h.channels() << " channel maps to " << out_dir
            << "\n";
  return 0;
}

int cmd_attend(const CommonOpts& opts, const std::string& ckpt,
               const std::string& bg_path, const std::string& obj_path,
               int layer, int head, const std::string& out_path) {
  CheckpointData ck;
  ScaleGrid grid = ScaleGrid::make_default();
  PlacementNet net = model_from_checkpoint(ckpt, ck, grid);
  ImageRGB bg = read_ppm(bg_path);
  ImageRGB obj = read_ppm(obj_path);
  Tensor bg_t = image_to_tensor<float>(bg);
  Tensor obj_t = image_to_tensor<float>(
      PlacementNet::preprocess_object(obj, net.config().input_size));
  Map2D m = net.attention_map(bg_t, obj_t, layer, head);
  if (!out_path.empty()) {
    std::vector<float> scaled = m.data;
    float mx = 0;
    for (float v : scaled) mx = std::max(mx, v);
    if (mx > 0)
      for (float& v : scaled) v /= mx;
    write_pgm(out_path, m.w, m.h, scaled);
  }
  if (opts.json_out) {
    std::cout << json{{"layer", layer},
                      {"head", head},
                      {"grid", {m.w, m.h}},
                      {"map", m.data}}
                     .dump()
              << "\n";
  } else {
    std::cout << "attention map (" << m.w << "x" << m.h << ") written to "
              << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dense object-placement toolkit"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, eval_opts, pred_opts, slice_opts,
      render_opts, attend_opts;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::uint64_t gen_seed = 0;
  int gen_n = 100, gen_size = 64;
  std::string gen_out;
  bool gen_bimodal = false;
  double gen_flyer_frac = -1;
  gen->add_option("--seed", gen_seed, "generation seed")->required();
  gen->add_option("--n", gen_n, "number of scenes")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--size", gen_size, "image side length");
  gen->add_flag("--bimodal", gen_bimodal, "two disjoint plausible regions");
  gen->add_option("--flyer-frac", gen_flyer_frac, "fraction of flyer scenes");
  add_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  std::string train_data, train_eval, train_out, train_resume;
  json train_overrides = json::object();
  train->add_option("--data", train_data, "training dataset dir")->required();
  train->add_option("--eval-data", train_eval, "held-out dataset dir");
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--resume", train_resume, "checkpoint to resume from");
  train->add_option_function<int>(
      "--steps", [&](const int& v) { train_overrides["total_steps"] = v; });
  train->add_option_function<int>(
      "--batch", [&](const int& v) { train_overrides["batch_size"] = v; });
  train->add_option_function<double>(
      "--lr", [&](const double& v) { train_overrides["base_lr"] = v; });
  train->add_option_function<double>(
      "--wd", [&](const double& v) { train_overrides["weight_decay"] = v; });
  train->add_option_function<std::uint64_t>(
      "--seed",
      [&](const std::uint64_t& v) { train_overrides["seed"] = v; });
  train->add_option_function<int>(
      "--eval-every", [&](const int& v) { train_overrides["eval_every"] = v; });
  train->add_option_function<std::string>(
      "--loss-kind",
      [&](const std::string& v) { train_overrides["loss_kind"] = v; });
  train->add_option_function<std::string>(
      "--variant",
      [&](const std::string& v) { train_overrides["variant"] = v; });
  add_common(train, train_opts);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data;
  int eval_k = 5;
  ev->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  ev->add_option("--data", eval_data, "dataset dir")->required();
  ev->add_option("--k", eval_k, "top-k candidates");
  add_common(ev, eval_opts);

  auto* pred =
      app.add_subcommand("predict", "score one background/object pair");
  std::string pred_ckpt, pred_bg, pred_obj, pred_out = ".";
  int pred_k = 5;
  pred->add_option("--checkpoint", pred_ckpt, "model checkpoint")->required();
  pred->add_option("--bg", pred_bg, "background PPM")->required();
  pred->add_option("--obj", pred_obj, "object PPM")->required();
  pred->add_option("--out", pred_out, "output directory");
  pred->add_option("--k", pred_k, "top-k candidates");
  add_common(pred, pred_opts);

  auto* slice = app.add_subcommand(
      "slice", "interactive search with location or scale fixed");
  std::string slice_ckpt, slice_bg, slice_obj, slice_loc, slice_out;
  int slice_scale = -1;
  slice->add_option("--checkpoint", slice_ckpt, "model checkpoint")
      ->required();
  slice->add_option("--bg", slice_bg, "background PPM")->required();
  slice->add_option("--obj", slice_obj, "object PPM")->required();
  auto* fs = slice->add_option("--fix-scale", slice_scale,
                               "scale channel to fix");
  auto* fl = slice->add_option("--fix-location", slice_loc,
                               "x,y location to fix");
  fs->excludes(fl);
  slice->add_option("--out", slice_out, "output directory for maps");
  add_common(slice, slice_opts);

  auto* render =
      app.add_subcommand("render", "export heatmap channels as graymaps");
  std::string render_heatmap, render_out = ".", render_prefix = "heatmap";
  render->add_option("--heatmap", render_heatmap, "TOPH file")->required();
  render->add_option("--out", render_out, "output directory");
  render->add_option("--prefix", render_prefix, "output file prefix");
  add_common(render, render_opts);

  auto* attend = app.add_subcommand("attend", "object-token attention map");
  std::string attend_ckpt, attend_bg, attend_obj, attend_out;
  int attend_layer = 0, attend_head = 0;
  attend->add_option("--checkpoint", attend_ckpt, "model checkpoint")
      ->required();
  attend->add_option("--bg", attend_bg, "background PPM")->required();
  attend->add_option("--obj", attend_obj, "object PPM")->required();
  attend->add_option("--layer", attend_layer, "transformer layer");
  attend->add_option("--head", attend_head, "attention head");
  attend->add_option("--out", attend_out, "output PGM path");
  add_common(attend, attend_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(gen_opts, gen_seed, gen_n, gen_out, gen_size,
                          gen_bimodal, gen_flyer_frac);
    if (train->parsed())
      return cmd_train(train_opts, train_data, train_eval, train_out,
                       train_resume, train_overrides);
    if (ev->parsed()) return cmd_eval(eval_opts, eval_ckpt, eval_data, eval_k);
    if (pred->parsed())
      return cmd_predict(pred_opts, pred_ckpt, pred_bg, pred_obj, pred_out,
                         pred_k);
    if (slice->parsed()) {
      if (slice_scale < 0 && slice_loc.empty()) {
        std::cerr << "slice: one of --fix-scale/--fix-location is required\n";
        return 1;
      }
      return cmd_slice(slice_opts, slice_ckpt, slice_bg, slice_obj,
                       slice_scale, slice_loc, slice_out);
    }
    if (render->parsed())
      return cmd_render(render_heatmap, render_out, render_prefix);
    if (attend->parsed())
      return cmd_attend(attend_opts, attend_ckpt, attend_bg, attend_obj,
                        attend_layer, attend_head, attend_out);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
