#include "placekit/config.hpp"

namespace placekit {

using nlohmann::json;

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "local_concat") return Variant::local_concat;
  if (s == "global_only") return Variant::global_only;
  throw Error("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::local_concat: return "local_concat";
    case Variant::global_only: return "global_only";
  }
  return "full";
}

json to_json(const ModelConfig& m) {
  return json{{"input_size", m.input_size},
              {"k", m.k},
              {"d_enc", m.d_enc},
              {"d_t", m.d_t},
              {"d_ff", m.d_ff},
              {"n_layers", m.n_layers},
              {"n_heads", m.n_heads},
              {"c", m.c},
              {"variant", to_string(m.variant)},
              {"attn_scale", m.attn_scale == AttnScaleMode::inv_sqrt_d
                                 ? "inv_sqrt_d"
                                 : "inv_d"},
              {"use_pos_embed", m.use_pos_embed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  m.input_size = j.value("input_size", m.input_size);
  m.k = j.value("k", m.k);
  m.d_enc = j.value("d_enc", m.d_enc);
  m.d_t = j.value("d_t", m.d_t);
  m.d_ff = j.value("d_ff", m.d_ff);
  m.n_layers = j.value("n_layers", m.n_layers);
  m.n_heads = j.value("n_heads", m.n_heads);
  m.c = j.value("c", m.c);
  if (j.contains("variant"))
    m.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("attn_scale"))
    m.attn_scale = j.at("attn_scale").get<std::string>() == "inv_d"
                       ? AttnScaleMode::inv_d
                       : AttnScaleMode::inv_sqrt_d;
  m.use_pos_embed = j.value("use_pos_embed", m.use_pos_embed);
  return m;
}

json to_json(const TrainConfig& t) {
  return json{{"batch_size", t.batch_size},
              {"base_lr", t.base_lr},
              {"weight_decay", t.weight_decay},
              {"total_steps", t.total_steps},
              {"eval_every", t.eval_every},
              {"seed", t.seed},
              {"loss",
               {{"kind", t.loss.kind},
                {"reduction",
                 t.loss.reduction == Reduction::mean ? "mean" : "sum"},
                {"margin", t.loss.margin},
                {"radius_x", t.loss.radius_x},
                {"radius_y", t.loss.radius_y},
                {"radius_z", t.loss.radius_z},
                {"sigma_xy", t.loss.sigma_xy},
                {"sigma_z", t.loss.sigma_z}}}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  t.batch_size = j.value("batch_size", t.batch_size);
  t.base_lr = j.value("base_lr", t.base_lr);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.total_steps = j.value("total_steps", t.total_steps);
  t.eval_every = j.value("eval_every", t.eval_every);
  t.seed = j.value("seed", t.seed);
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    t.loss.kind = l.value("kind", t.loss.kind);
    if (l.contains("reduction"))
      t.loss.reduction = l.at("reduction").get<std::string>() == "sum"
                             ? Reduction::sum
                             : Reduction::mean;
    t.loss.margin = l.value("margin", t.loss.margin);
    t.loss.radius_x = l.value("radius_x", t.loss.radius_x);
    t.loss.radius_y = l.value("radius_y", t.loss.radius_y);
    t.loss.radius_z = l.value("radius_z", t.loss.radius_z);
    t.loss.sigma_xy = l.value("sigma_xy", t.loss.sigma_xy);
    t.loss.sigma_z = l.value("sigma_z", t.loss.sigma_z);
  }
  return t;
}

json to_json(const OracleParams& p) {
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

OracleParams oracle_params_from_json(const json& j) {
  OracleParams p;
  if (j.contains("horizon_frac")) {
    p.horizon_frac_lo = j.at("horizon_frac").at(0).get<double>();
    p.horizon_frac_hi = j.at("horizon_frac").at(1).get<double>();
  }
  p.s_min = j.value("s_min", p.s_min);
  p.s_max = j.value("s_max", p.s_max);
  p.tau_s = j.value("tau_s", p.tau_s);
  if (j.contains("flyer_band")) {
    p.flyer_lo = j.at("flyer_band").at(0).get<double>();
    p.flyer_hi = j.at("flyer_band").at(1).get<double>();
  }
  p.max_obstacle_iou = j.value("max_obstacle_iou", p.max_obstacle_iou);
  p.flyer_frac = j.value("flyer_frac", p.flyer_frac);
  if (j.contains("obstacles")) {
    p.obstacles_min = j.at("obstacles").at(0).get<int>();
    p.obstacles_max = j.at("obstacles").at(1).get<int>();
  }
  p.bimodal = j.value("bimodal", p.bimodal);
  return p;
}

json to_json(const RunConfig& c) {
  return json{{"dataset", c.dataset},
              {"eval_dataset", c.eval_dataset},
              {"checkpoint", c.checkpoint},
              {"out_dir", c.out_dir},
              {"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"oracle", to_json(c.oracle)},
              {"grid", c.grid.values}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.dataset = j.value("dataset", c.dataset);
  c.eval_dataset = j.value("eval_dataset", c.eval_dataset);
  c.checkpoint = j.value("checkpoint", c.checkpoint);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("oracle")) c.oracle = oracle_params_from_json(j.at("oracle"));
  if (j.contains("grid"))
    c.grid.values = j.at("grid").get<std::vector<double>>();
  return c;
}

std::string config_snapshot_json(const ModelConfig& m, const TrainConfig& t,
                                 const ScaleGrid& grid) {
  json j{{"model", to_json(m)}, {"train", to_json(t)}, {"grid", grid.values}};
  return j.dump();
}

}  // namespace placekit
