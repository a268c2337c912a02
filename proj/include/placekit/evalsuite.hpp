#pragma once

#include <map>
#include <string>
#include <vector>

#include "placekit/heatmap.hpp"
#include "placekit/loss.hpp"
#include "placekit/synthworld.hpp"

// Evaluation protocols: top-k IOU, normalized score at the ground truth,
// scale search given the ground-truth location, and oracle-agreement rates
// specific to the synthetic world.
namespace placekit {

struct EvalReport {
  double frac_iou_gt_05 = 0;             // top-k IOU > 0.5 rate
  double mean_iou = 0;                   // mean of per-sample best IOU
  double ns_mean = 0;
  std::map<double, double> ns_frac;      // threshold -> fraction
  std::map<double, double> scale_iou_frac;
  double scale_mean_err = 0;
  double oracle_top1_hit = 0;
  double oracle_top5_hit = 0;
  int n_samples = 0;
  int ns_degenerate = 0;                 // samples with a constant gt slice

  std::string to_json_string() const;
  // Plain-text tables in the layout of the placement/location/scale tables.
  std::string render_tables() const;
};

// Per sample: best IOU between the clipped top-k boxes and the clipped
// ground-truth box. Returns (fraction with IOU > 0.5, mean IOU).
std::pair<double, double> topk_iou_stats(const std::vector<Heatmap3D>& heatmaps,
                                         const std::vector<GroundTruth>& gts,
                                         int k,
                                         const std::vector<double>& aspects);

struct NsStats {
  double ns_mean = 0;
  std::map<double, double> ns_frac;
  int degenerate = 0;
};
// NS_i = slice_fixed_scale(H_i, z_gt)[y_gt, x_gt]; degenerate slices are
// excluded from the average and counted separately.
NsStats ns_location_stats(const std::vector<Heatmap3D>& heatmaps,
                          const std::vector<GroundTruth>& gts,
                          const std::vector<double>& thresholds = {0.95, 0.9,
                                                                   0.75});

struct ScaleStats {
  std::map<double, double> iou_frac;
  double mean_err = 0;
};
// Scale search with the location fixed at the ground truth: the predicted
// channel is the argmax of H[y_gt, x_gt, :].
ScaleStats scale_given_location(const std::vector<Heatmap3D>& heatmaps,
                                const std::vector<GroundTruth>& gts,
                                const std::vector<double>& aspects,
                                const std::vector<double>& thresholds = {
                                    0.95, 0.9, 0.75});

// top-1 hit: the argmax lattice point is oracle-plausible;
// top-k hit: any of the top-k boxes is oracle-plausible.
std::pair<double, double> oracle_agreement(
    const std::vector<Heatmap3D>& heatmaps, const std::vector<Scene>& scenes,
    int k);

// Chance level for oracle agreement: mean fraction of plausible cells.
double mean_plausible_fraction(const std::vector<Scene>& scenes,
                               const ScaleGrid& grid);

}  // namespace placekit
