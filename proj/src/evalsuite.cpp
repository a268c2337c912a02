#include "placekit/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace placekit {

namespace {
void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw LengthMismatch(std::string("evalsuite: ") + what);
}
}  // namespace

std::pair<double, double> topk_iou_stats(const std::vector<Heatmap3D>& heatmaps,
                                         const std::vector<GroundTruth>& gts,
                                         int k,
                                         const std::vector<double>& aspects) {
  check_aligned(heatmaps.size(), gts.size(), "heatmap/gt count");
  check_aligned(heatmaps.size(), aspects.size(), "heatmap/aspect count");
  if (heatmaps.empty()) return {0.0, 0.0};
  double sum_iou = 0;
  int over = 0;
  for (std::size_t i = 0; i < heatmaps.size(); ++i) {
    const Heatmap3D& h = heatmaps[i];
    double best = 0;
    try {
      Heatmap3D hn = normalize(h);
      PlacementBox gt_clipped = clip_box(gts[i].box, h.dims);
      for (const auto& [box, score] : top_k_boxes(hn, k, aspects[i])) {
        try {
          best = std::max(best, iou(clip_box(box, h.dims), gt_clipped));
        } catch (const EmptyClip&) {
        }
      }
    } catch (const DegenerateHeatmap&) {
      // constant heatmap scores zero
    }
    sum_iou += best;
    if (best > 0.5) ++over;
  }
  double n = double(heatmaps.size());
  return {over / n, sum_iou / n};
}

NsStats ns_location_stats(const std::vector<Heatmap3D>& heatmaps,
                          const std::vector<GroundTruth>& gts,
                          const std::vector<double>& thresholds) {
  check_aligned(heatmaps.size(), gts.size(), "heatmap/gt count");
  NsStats stats;
  std::map<double, int> over;
  for (double t : thresholds) over[t] = 0;
  int counted = 0;
  double sum = 0;
  for (std::size_t i = 0; i < heatmaps.size(); ++i) {
    const GridIndex& gi = gts[i].idx;
    try {
      Map2D slice = slice_fixed_scale(heatmaps[i], gi.z);
      double ns = slice.at(gi.y, gi.x);
      sum += ns;
      ++counted;
      for (double t : thresholds)
        if (ns > t) ++over[t];
    } catch (const DegenerateHeatmap&) {
      ++stats.degenerate;
    }
  }
  stats.ns_mean = counted ? sum / counted : 0.0;
  for (double t : thresholds)
    stats.ns_frac[t] = counted ? double(over[t]) / counted : 0.0;
  return stats;
}

ScaleStats scale_given_location(const std::vector<Heatmap3D>& heatmaps,
                                const std::vector<GroundTruth>& gts,
                                const std::vector<double>& aspects,
                                const std::vector<double>& thresholds) {
  check_aligned(heatmaps.size(), gts.size(), "heatmap/gt count");
  check_aligned(heatmaps.size(), aspects.size(), "heatmap/aspect count");
  ScaleStats stats;
  std::map<double, int> over;
  for (double t : thresholds) over[t] = 0;
  double err_sum = 0;
  for (std::size_t i = 0; i < heatmaps.size(); ++i) {
    const Heatmap3D& h = heatmaps[i];
    const GridIndex& gi = gts[i].idx;
    ScaleScores ss = slice_fixed_location(h, gi.x, gi.y);
    PlacementBox pred = box_from_index(GridIndex{gi.x, gi.y, ss.argmax},
                                       h.grid, h.dims, aspects[i]);
    double v = 0;
    try {
      v = iou(clip_box(pred, h.dims), clip_box(gts[i].box, h.dims));
    } catch (const EmptyClip&) {
    }
    for (double t : thresholds)
      if (v > t) ++over[t];
    err_sum += std::abs(h.grid.values[std::size_t(ss.argmax)] -
                        scale_of_box(gts[i].box, h.dims));
  }
  double n = heatmaps.empty() ? 1.0 : double(heatmaps.size());
  for (double t : thresholds) stats.iou_frac[t] = over[t] / n;
  stats.mean_err = err_sum / n;
  return stats;
}

std::pair<double, double> oracle_agreement(
    const std::vector<Heatmap3D>& heatmaps, const std::vector<Scene>& scenes,
    int k) {
  check_aligned(heatmaps.size(), scenes.size(), "heatmap/scene count");
  if (heatmaps.empty()) return {0.0, 0.0};
  int hit1 = 0, hitk = 0;
  for (std::size_t i = 0; i < heatmaps.size(); ++i) {
    const Heatmap3D& h = heatmaps[i];
    const Scene& sc = scenes[i];
    GridIndex top = argmax_index(h);
    PlacementBox top_box =
        box_from_index(top, h.grid, h.dims, sc.spec.aspect);
    if (oracle_plausibility(sc, top_box)) ++hit1;
    try {
      Heatmap3D hn = normalize(h);
      for (const auto& [box, score] : top_k_boxes(hn, k, sc.spec.aspect)) {
        if (oracle_plausibility(sc, box)) {
          ++hitk;
          break;
        }
      }
    } catch (const DegenerateHeatmap&) {
    }
  }
  double n = double(heatmaps.size());
  return {hit1 / n, hitk / n};
}

double mean_plausible_fraction(const std::vector<Scene>& scenes,
                               const ScaleGrid& grid) {
  if (scenes.empty()) return 0.0;
  double acc = 0;
  for (const Scene& sc : scenes) {
    Heatmap3D oh = oracle_heatmap(sc, grid);
    double nz = 0;
    for (float v : oh.data) nz += v > 0 ? 1 : 0;
    acc += nz / double(oh.size());
  }
  return acc / double(scenes.size());
}

std::string EvalReport::to_json_string() const {
  nlohmann::json j{{"frac_iou_gt_05", frac_iou_gt_05},
                   {"mean_iou", mean_iou},
                   {"ns_mean", ns_mean},
                   {"scale_mean_err", scale_mean_err},
                   {"oracle_top1_hit", oracle_top1_hit},
                   {"oracle_top5_hit", oracle_top5_hit},
                   {"n_samples", n_samples},
                   {"ns_degenerate", ns_degenerate}};
  for (const auto& [t, f] : ns_frac) {
    char key[32];
    std::snprintf(key, sizeof key, "ns_gt_%g", t);
    j[key] = f;
  }
  for (const auto& [t, f] : scale_iou_frac) {
    char key[32];
    std::snprintf(key, sizeof key, "scale_iou_gt_%g", t);
    j[key] = f;
  }
  return j.dump();
}

std::string EvalReport::render_tables() const {
  std::ostringstream os;
  os << "placement (top-5)\n";
  os << "  IOU>0.5   Mean IOU\n";
  char line[128];
  std::snprintf(line, sizeof line, "  %7.2f   %8.3f\n",
                100.0 * frac_iou_gt_05, mean_iou);
  os << line;
  os << "location given scale (NS)\n";
  os << "  >0.95   >0.9   >0.75   Mean NS\n  ";
  for (double t : {0.95, 0.9, 0.75}) {
    auto it = ns_frac.find(t);
    std::snprintf(line, sizeof line, "%5.2f   ",
                  it == ns_frac.end() ? 0.0 : 100.0 * it->second);
    os << line;
  }
  std::snprintf(line, sizeof line, "%7.2f\n", ns_mean);
  os << line;
  os << "scale given location (IOU)\n";
  os << "  >0.95   >0.9   >0.75   Mean Error\n  ";
  for (double t : {0.95, 0.9, 0.75}) {
    auto it = scale_iou_frac.find(t);
    std::snprintf(line, sizeof line, "%5.2f   ",
                  it == scale_iou_frac.end() ? 0.0 : 100.0 * it->second);
    os << line;
  }
  std::snprintf(line, sizeof line, "%7.3f\n", scale_mean_err);
  os << line;
  os << "oracle agreement\n";
  std::snprintf(line, sizeof line, "  top-1 %.3f   top-5 %.3f   (n=%d)\n",
                oracle_top1_hit, oracle_top5_hit, n_samples);
  os << line;
  return os.str();
}

}  // namespace placekit
