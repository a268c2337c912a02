#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "placekit/evalsuite.hpp"
#include "placekit/model.hpp"
#include "placekit/serialize.hpp"
#include "placekit/synthworld.hpp"

namespace placekit {

struct LossConfig {
  std::string kind = "sparse";  // sparse | gaussian | binary | regression
  Reduction reduction = Reduction::mean;
  double margin = 0.1;
  int radius_x = -1;  // -1: scale the 20-cell radius with resolution
  int radius_y = -1;
  int radius_z = 2;
  double sigma_xy = -1;  // -1: same as radius_xy
  double sigma_z = 2;
};

struct TrainConfig {
  int batch_size = 16;
  double base_lr = 3e-4;  // from-scratch rate; the pretrained-encoder
                          // setting would use 1e-5
  double weight_decay = 0.03;
  int total_steps = 600;
  int eval_every = 100;
  std::uint64_t seed = 1;
  LossConfig loss;
};

// lr = base * 0.5 * (1 + cos(pi * step / total))
double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr);

MarginSpec resolve_margin_spec(const LossConfig& loss, ImageDims dims);

// Adaptive moments with decoupled weight decay (beta1 0.9, beta2 0.999,
// eps 1e-8). Moments are float32 and checkpointable.
class AdamW {
 public:
  explicit AdamW(const nn::ParamRefs<float>& params);

  void apply(const nn::ParamRefs<float>& params, double lr,
             double weight_decay);

  std::int64_t t = 0;
  std::vector<float> m, v;  // flat, aligned with the packed parameter order
};

class Trainer {
 public:
  Trainer(PlacementNet& model, TrainConfig cfg, ScaleGrid grid);

  // Forward/backward over the batch (mean loss), one optimizer step.
  // Throws NonFiniteLoss with diagnostics when the loss leaves the reals.
  double train_step(const std::vector<const Scene*>& batch);

  std::int64_t step() const { return step_; }
  Rng& rng() { return rng_; }
  AdamW& optimizer() { return opt_; }
  PlacementNet& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }

  void save_checkpoint(const std::filesystem::path& path,
                       const std::string& config_json) const;
  // Restores params, moments, step, and rng; checks the stored config
  // snapshot against expected_config_json (CorruptCheckpoint on mismatch).
  void load_checkpoint(const std::filesystem::path& path,
                       const std::string& expected_config_json);

 private:
  double sample_loss(const Scene& scene, double inv_batch);

  PlacementNet& model_;
  TrainConfig cfg_;
  ScaleGrid grid_;
  AdamW opt_;
  Rng rng_;
  std::int64_t step_ = 0;
};

// Forward every scene once and aggregate all evaluation protocols.
EvalReport evaluate_model(PlacementNet& model, const std::vector<Scene>& scenes,
                          const ScaleGrid& grid, int k = 5);

// Full loop: samples batches, steps, and emits one JSON line per
// eval_every steps (step, lr, loss, and eval metrics when eval_scenes is
// provided).
void run_training(Trainer& trainer, const Dataset& train,
                  const std::vector<Scene>* eval_scenes, std::ostream& progress);

// Heatmaps for a list of scenes (one forward per scene).
std::vector<Heatmap3D> forward_heatmaps(PlacementNet& model,
                                        const std::vector<Scene>& scenes,
                                        const ScaleGrid& grid);

}  // namespace placekit
