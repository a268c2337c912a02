#include "placekit/trainer.hpp"

#include <cmath>
#include <ostream>

#if defined(__SSE2__)
#include <immintrin.h>
#endif

#include "json.hpp"

namespace placekit {

namespace {

// Saturated losses (sigmoid tails) produce denormal gradients that hit
// 100x slow paths on x86; flush them to zero. Deterministic either way.
void enable_flush_to_zero() {
#if defined(__SSE2__)
  _mm_setcsr(_mm_getcsr() | 0x8040);  // FTZ | DAZ
#endif
}

}  // namespace

double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr) {
  if (total_steps < 1 || step < 0 || step > total_steps)
    throw Error("cosine_lr: step outside [0, total_steps]");
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * double(step) / double(total_steps)));
}

MarginSpec resolve_margin_spec(const LossConfig& loss, ImageDims dims) {
  MarginSpec spec = MarginSpec::scaled_default(dims);
  if (loss.radius_x >= 0) spec.radius_x = loss.radius_x;
  if (loss.radius_y >= 0) spec.radius_y = loss.radius_y;
  spec.radius_z = loss.radius_z;
  spec.margin = loss.margin;
  return spec;
}

AdamW::AdamW(const nn::ParamRefs<float>& params) {
  std::size_t total = 0;
  for (const auto* p : params) total += p->value.numel();
  m.assign(total, 0.0f);
  v.assign(total, 0.0f);
}

void AdamW::apply(const nn::ParamRefs<float>& params, double lr,
                  double weight_decay) {
  ++t;
  const float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  float bc1 = 1.0f / (1.0f - std::pow(b1, float(t)));
  float bc2 = 1.0f / (1.0f - std::pow(b2, float(t)));
  float flr = float(lr);
  float fwd = float(lr * weight_decay);
  std::size_t off = 0;
  for (auto* p : params) {
    float* val = p->value.data.data();
    const float* grad = p->grad.data.data();
    std::size_t n = p->value.numel();
    float* mm = m.data() + off;
    float* vv = v.data() + off;
    for (std::size_t i = 0; i < n; ++i) {
      float g = grad[i];
      mm[i] = b1 * mm[i] + (1.0f - b1) * g;
      vv[i] = b2 * vv[i] + (1.0f - b2) * g * g;
      float mhat = mm[i] * bc1;
      float vhat = vv[i] * bc2;
      val[i] -= flr * mhat / (std::sqrt(vhat) + eps);
      val[i] -= fwd * val[i];  // decoupled decay, separate from the step
    }
    off += n;
  }
}

Trainer::Trainer(PlacementNet& model, TrainConfig cfg, ScaleGrid grid)
    : model_(model), cfg_(cfg), grid_(std::move(grid)),
      opt_(model.parameters()), rng_(Rng::derive(cfg.seed, 0x747261696eull)) {
  enable_flush_to_zero();
}

double Trainer::sample_loss(const Scene& scene, double inv_batch) {
  ImageDims dims = scene.dims();
  Tensor bg = image_to_tensor<float>(scene.bg);
  Tensor obj = image_to_tensor<float>(
      PlacementNet::preprocess_object(scene.obj, model_.config().input_size));
  const LossConfig& lc = cfg_.loss;

  if (lc.kind == "regression") {
    Tensor raw = model_.regression_raw(bg, obj);
    double targets[3] = {scene.gt.box.cx() / dims.w, scene.gt.box.cy() / dims.h,
                         scale_of_box(scene.gt.box, dims)};
    Tensor graw({1, 4});
    double loss = 0;
    for (int j = 0; j < 3; ++j) {
      double s = 1.0 / (1.0 + std::exp(-double(raw(0, j))));
      double diff = s - targets[j];
      loss += diff * diff / 3.0;
      graw(0, j) = float(2.0 * diff * s * (1.0 - s) / 3.0 * inv_batch);
    }
    model_.regression_backward(graw);
    return loss;
  }

  Tensor h = model_.forward(bg, obj);
  Tensor grad(h.shape);
  double loss = 0;
  if (lc.kind == "sparse") {
    MarginSpec spec = resolve_margin_spec(lc, dims);
    Tensor m = margin_matrix<float>(scene.gt.idx, dims, model_.config().c, spec);
    loss = total_loss(h, m, scene.gt.idx, lc.reduction, &grad);
  } else if (lc.kind == "gaussian" || lc.kind == "binary") {
    MarginSpec spec = resolve_margin_spec(lc, dims);
    double sigma_xy = lc.sigma_xy > 0 ? lc.sigma_xy : double(spec.radius_x);
    loss = assignment_loss(h, scene.gt.idx,
                           lc.kind == "binary" ? AssignKind::binary
                                               : AssignKind::gaussian,
                           sigma_xy, lc.sigma_z, &grad);
  } else {
    throw Error("unknown loss kind: " + lc.kind);
  }
  for (auto& g : grad.data) g *= float(inv_batch);
  model_.backward(grad);
  return loss;
}

double Trainer::train_step(const std::vector<const Scene*>& batch) {
  if (batch.empty()) throw Error("train_step: empty batch");
  for (auto* p : model_.parameters()) p->grad.zero();
  double inv_batch = 1.0 / double(batch.size());
  double loss = 0;
  for (const Scene* s : batch) loss += sample_loss(*s, inv_batch) * inv_batch;
  if (!std::isfinite(loss))
    throw NonFiniteLoss("step " + std::to_string(step_) +
                        ": loss is not finite (seed " +
                        std::to_string(batch.front()->seed) + "...)");
  double lr = cosine_lr(step_, cfg_.total_steps, cfg_.base_lr);
  opt_.apply(model_.parameters(), lr, cfg_.weight_decay);
  ++step_;
  return loss;
}

void Trainer::save_checkpoint(const std::filesystem::path& path,
                              const std::string& config_json) const {
  CheckpointData ck = pack_params(model_.parameters());
  ck.step = step_;
  ck.rng_state = rng_.state();
  ck.config_json = config_json;
  ck.m = opt_.m;
  ck.v = opt_.v;
  write_checkpoint(path, ck);
}

void Trainer::load_checkpoint(const std::filesystem::path& path,
                              const std::string& expected_config_json) {
  CheckpointData ck = read_checkpoint(path);
  if (nlohmann::json::parse(ck.config_json) !=
      nlohmann::json::parse(expected_config_json))
    throw CorruptCheckpoint("checkpoint config does not match the run config");
  unpack_params(ck, model_.parameters());
  if (ck.m.size() != opt_.m.size() || ck.v.size() != opt_.v.size())
    throw CorruptCheckpoint("optimizer moment size mismatch");
  opt_.m = ck.m;
  opt_.v = ck.v;
  opt_.t = ck.step;
  step_ = ck.step;
  rng_.set_state(ck.rng_state);
}

std::vector<Heatmap3D> forward_heatmaps(PlacementNet& model,
                                        const std::vector<Scene>& scenes,
                                        const ScaleGrid& grid) {
  std::vector<Heatmap3D> out;
  out.reserve(scenes.size());
  for (const Scene& s : scenes) {
    Tensor bg = image_to_tensor<float>(s.bg);
    Tensor obj = image_to_tensor<float>(
        PlacementNet::preprocess_object(s.obj, model.config().input_size));
    out.push_back(heatmap_from_tensor(model.forward(bg, obj), grid));
  }
  return out;
}

EvalReport evaluate_model(PlacementNet& model, const std::vector<Scene>& scenes,
                          const ScaleGrid& grid, int k) {
  std::vector<Heatmap3D> heatmaps = forward_heatmaps(model, scenes, grid);
  std::vector<GroundTruth> gts;
  std::vector<double> aspects;
  gts.reserve(scenes.size());
  for (const Scene& s : scenes) {
    gts.push_back(s.gt);
    aspects.push_back(s.spec.aspect);
  }
  EvalReport r;
  r.n_samples = int(scenes.size());
  std::tie(r.frac_iou_gt_05, r.mean_iou) =
      topk_iou_stats(heatmaps, gts, k, aspects);
  NsStats ns = ns_location_stats(heatmaps, gts);
  r.ns_mean = ns.ns_mean;
  r.ns_frac = ns.ns_frac;
  r.ns_degenerate = ns.degenerate;
  ScaleStats ss = scale_given_location(heatmaps, gts, aspects);
  r.scale_iou_frac = ss.iou_frac;
  r.scale_mean_err = ss.mean_err;
  std::tie(r.oracle_top1_hit, r.oracle_top5_hit) =
      oracle_agreement(heatmaps, scenes, k);
  return r;
}

void run_training(Trainer& trainer, const Dataset& train,
                  const std::vector<Scene>* eval_scenes,
                  std::ostream& progress) {
  const TrainConfig& cfg = trainer.config();
  std::size_t n = train.scenes.size();
  if (n == 0) throw Error("run_training: empty dataset");
  double window_loss = 0;
  int window_n = 0;
  while (trainer.step() < cfg.total_steps) {
    std::vector<const Scene*> batch;
    batch.reserve(std::size_t(cfg.batch_size));
    for (int i = 0; i < cfg.batch_size; ++i)
      batch.push_back(&train.scenes[trainer.rng().uniform_int(n)]);
    double lr = cosine_lr(trainer.step(), cfg.total_steps, cfg.base_lr);
    window_loss += trainer.train_step(batch);
    ++window_n;
    if (trainer.step() % cfg.eval_every == 0 ||
        trainer.step() == cfg.total_steps) {
      nlohmann::json line{{"step", trainer.step()},
                          {"lr", lr},
                          {"loss", window_loss / window_n}};
      if (eval_scenes) {
        EvalReport r =
            evaluate_model(trainer.model(), *eval_scenes, train.grid);
        line["eval"] = nlohmann::json::parse(r.to_json_string());
      }
      progress << line.dump() << "\n" << std::flush;
      window_loss = 0;
      window_n = 0;
    }
  }
}

}  // namespace placekit
