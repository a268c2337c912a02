#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "placekit/gradcheck.hpp"
#include "placekit/loss.hpp"
#include "placekit/rng.hpp"

using namespace placekit;

namespace {

constexpr ImageDims kDims{10, 8};
constexpr int kC = 4;
const MarginSpec kSpec{2, 2, 1, 0.1};

TensorD random_heatmap(Rng& rng, double lo = 0.0, double hi = 1.0) {
  TensorD h({kDims.h, kDims.w, kC});
  for (auto& v : h.data) v = rng.uniform(lo, hi);
  return h;
}

// Keeps the finite-difference sweep away from hinge/abs kinks. The gt
// entry is skipped: its hinge argument is identically zero.
bool clear_of_kinks(const TensorD& h, const TensorD& m, GridIndex gt,
                    double dist = 1e-3) {
  double hgt = h(gt.y, gt.x, gt.z);
  std::size_t gt_off = (std::size_t(gt.y) * h.dim(1) + gt.x) * h.dim(2) + gt.z;
  double mn = h.data[0];
  int min_count = 0;
  for (std::size_t i = 0; i < h.numel(); ++i) {
    if (i != gt_off && std::abs(h.data[i] - hgt + m.data[i]) < dist)
      return false;
    mn = std::min(mn, h.data[i]);
  }
  for (std::size_t i = 0; i < h.numel(); ++i)
    if (h.data[i] < mn + dist) ++min_count;
  return std::abs(1.0 - hgt) > dist && std::abs(mn) > dist && min_count == 1;
}

}  // namespace

TEST_CASE("margin_matrix zeros the gt neighborhood") {
  GridIndex gt{4, 3, 2};
  TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
  CHECK(m(3, 4, 2) == 0.0);
  CHECK(m(3, 4 + kSpec.radius_x, 2) == 0.0);
  CHECK(m(3, 4 + kSpec.radius_x + 1, 2) == 0.1);
  CHECK(m(3 + kSpec.radius_y, 4, 2) == 0.0);
  CHECK(m(3, 4, 2 - kSpec.radius_z) == 0.0);
  CHECK(m(3, 4, 0) == 0.1);

  // zero count by direct enumeration, including border clipping
  for (GridIndex g :
       {GridIndex{4, 3, 2}, GridIndex{0, 0, 0}, GridIndex{9, 7, 3}}) {
    TensorD mm = margin_matrix<double>(g, kDims, kC, kSpec);
    long zeros = 0;
    for (double v : mm.data) zeros += v == 0.0;
    long expect = 0;
    for (int y = 0; y < kDims.h; ++y)
      for (int x = 0; x < kDims.w; ++x)
        for (int z = 0; z < kC; ++z)
          expect += std::abs(x - g.x) <= kSpec.radius_x &&
                    std::abs(y - g.y) <= kSpec.radius_y &&
                    std::abs(z - g.z) <= kSpec.radius_z;
    CHECK(zeros == expect);
  }
}

TEST_CASE("sparse_contrastive zero-loss construction") {
  GridIndex gt{4, 3, 2};
  TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
  TensorD h({kDims.h, kDims.w, kC});
  for (std::size_t i = 0; i < h.numel(); ++i)
    h.data[i] = m.data[i] == 0.0 ? 0.95 : 0.89;
  h(gt.y, gt.x, gt.z) = 1.0;
  CHECK(sparse_contrastive(h, m, gt) == 0.0);
}

TEST_CASE("sparse_contrastive on a constant heatmap") {
  GridIndex gt{4, 3, 2};
  TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
  TensorD h({kDims.h, kDims.w, kC});
  h.fill(0.42);
  long n_out = 0;
  for (double v : m.data) n_out += v != 0.0;
  double expect = 0.1 * double(n_out) / double(h.numel());
  CHECK(sparse_contrastive(h, m, gt) == doctest::Approx(expect).epsilon(1e-12));
  // sum reduction differs exactly by the entry count
  CHECK(sparse_contrastive(h, m, gt, Reduction::sum) ==
        doctest::Approx(expect * double(h.numel())).epsilon(1e-12));
}

TEST_CASE("sparse_contrastive single active hinge") {
  GridIndex gt{4, 3, 2};
  TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
  TensorD h({kDims.h, kDims.w, kC});
  for (std::size_t i = 0; i < h.numel(); ++i)
    h.data[i] = m.data[i] == 0.0 ? 0.5 : 0.3;
  h(gt.y, gt.x, gt.z) = 0.6;
  double base = sparse_contrastive(h, m, gt);
  CHECK(base == 0.0);
  h(0, 0, 0) = 0.8;  // out of neighborhood, H(gt) + 0.2
  double with_violation = sparse_contrastive(h, m, gt);
  CHECK(with_violation ==
        doctest::Approx(0.3 / double(h.numel())).epsilon(1e-12));
}

TEST_CASE("sparse_contrastive is translation invariant, range_loss is not") {
  Rng rng(3);
  GridIndex gt{7, 2, 1};
  TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
  TensorD h = random_heatmap(rng);
  TensorD shifted = h;
  for (auto& v : shifted.data) v += 0.37;
  CHECK(sparse_contrastive(h, m, gt) ==
        doctest::Approx(sparse_contrastive(shifted, m, gt)).epsilon(1e-12));

  // a shift that pushes H(gt) past 1 changes the range term
  TensorD r({2, 2, 1});
  r.data = {0.05, 0.5, 0.4, 0.9};
  GridIndex rgt{1, 1, 0};
  double before = range_loss(r, rgt);  // |1-0.9| + |0.05| = 0.15
  for (auto& v : r.data) v += 0.37;
  double after = range_loss(r, rgt);  // |1-1.27| + |0.42| = 0.69
  CHECK(before == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(after == doctest::Approx(0.69).epsilon(1e-12));
}

TEST_CASE("raising one dominated entry raises total_loss by delta/N") {
  GridIndex gt{4, 3, 2};
  TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
  TensorD h({kDims.h, kDims.w, kC});
  for (std::size_t i = 0; i < h.numel(); ++i)
    h.data[i] = m.data[i] == 0.0 ? 0.4 : 0.2;
  h(gt.y, gt.x, gt.z) = 1.0;
  h(0, 0, 0) = 0.0;  // pins min(H) away from the modified entry
  double base = total_loss(h, m, gt);
  double delta = 0.25;
  h(5, 8, 0) = h(gt.y, gt.x, gt.z) - 0.1 + delta;
  double raised = total_loss(h, m, gt);
  CHECK(raised - base ==
        doctest::Approx(delta / double(h.numel())).epsilon(1e-9));
}

TEST_CASE("range_loss examples") {
  GridIndex gt{1, 1, 0};
  TensorD h({2, 2, 1});
  h.data = {0.3, 0.0, 0.5, 1.0};  // gt at (y=1,x=1) -> 1.0, min 0
  CHECK(range_loss(h, gt) == 0.0);
  h.data = {0.3, -0.1, 0.5, 0.8};
  CHECK(range_loss(h, gt) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("total_loss equals the sum of its parts, positive on constants") {
  Rng rng(5);
  GridIndex gt{2, 6, 3};
  TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
  TensorD h = random_heatmap(rng);
  CHECK(total_loss(h, m, gt) ==
        doctest::Approx(sparse_contrastive(h, m, gt) + range_loss(h, gt))
            .epsilon(1e-12));
  TensorD c({kDims.h, kDims.w, kC});
  c.fill(0.37);
  CHECK(total_loss(c, m, gt) >= 1.0);
}

TEST_CASE("gaussian assignment targets") {
  CHECK(gaussian_target(0, 0, 0, 3.0, 2.0) == 1.0);
  CHECK(gaussian_target(3, 0, 0, 3.0, 2.0) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(gaussian_target(0, 0, 2, 3.0, 2.0) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("binary assignment is minimized by the one-hot target") {
  GridIndex gt{2, 1, 1};
  TensorD h({4, 4, 2});
  h.zero();
  double n = double(h.numel());
  TensorD grad(h.shape);
  double loss = 0;
  for (int it = 0; it < 4000; ++it) {
    grad.zero();
    loss = assignment_loss(h, gt, AssignKind::binary, 2.0, 2.0, &grad);
    for (std::size_t i = 0; i < h.numel(); ++i)
      h.data[i] -= 10.0 * n * grad.data[i];
  }
  CHECK(loss < 1e-3);
  // sigmoid(H) approached one-hot
  CHECK(h(1, 2, 1) > 5.0);
  CHECK(h(0, 0, 0) < -5.0);
}

TEST_CASE("multi-peak heatmaps: allowed by the contrastive loss only") {
  GridIndex gt{4, 3, 2};
  TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
  TensorD h({kDims.h, kDims.w, kC});
  h.zero();
  h(gt.y, gt.x, gt.z) = 1.0;
  // two far-apart high secondary peaks dominated by the margin
  h(7, 9, 0) = 0.85;
  h(0, 0, 3) = 0.85;
  CHECK(sparse_contrastive(h, m, gt) == 0.0);
  CHECK(assignment_loss(h, gt, AssignKind::gaussian, 2.0, 2.0) > 0.0);
  CHECK(assignment_loss(h, gt, AssignKind::binary, 2.0, 2.0) > 0.0);
}

TEST_CASE("all losses pass central finite-difference checks") {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 5 && seed < 200; ++seed) {
    Rng rng(seed * 71 + 9);
    GridIndex gt{int(rng.uniform_int(kDims.w)), int(rng.uniform_int(kDims.h)),
                 int(rng.uniform_int(kC))};
    TensorD m = margin_matrix<double>(gt, kDims, kC, kSpec);
    TensorD h0 = random_heatmap(rng, -0.2, 1.2);
    if (!clear_of_kinks(h0, m, gt)) continue;
    ++checked;

    nn::ParamT<double> h;
    h.value = h0;
    h.grad = TensorD(h0.shape);
    std::vector<nn::ParamT<double>*> params{&h};

    auto check_loss = [&](auto&& fn) {
      auto fwd = [&]() { return fn(h.value, (TensorD*)nullptr); };
      auto fwd_bwd = [&]() { return fn(h.value, &h.grad); };
      return grad_check(fwd_bwd, fwd, params);
    };

    CHECK(check_loss([&](const TensorD& hh, TensorD* g) {
            return sparse_contrastive(hh, m, gt, Reduction::mean, g);
          }) < 1e-4);
    CHECK(check_loss([&](const TensorD& hh, TensorD* g) {
            return range_loss(hh, gt, g);
          }) < 1e-4);
    CHECK(check_loss([&](const TensorD& hh, TensorD* g) {
            return total_loss(hh, m, gt, Reduction::mean, g);
          }) < 1e-4);
    CHECK(check_loss([&](const TensorD& hh, TensorD* g) {
            return assignment_loss(hh, gt, AssignKind::binary, 2.0, 2.0, g);
          }) < 1e-4);
    CHECK(check_loss([&](const TensorD& hh, TensorD* g) {
            return assignment_loss(hh, gt, AssignKind::gaussian, 2.0, 2.0, g);
          }) < 1e-4);
  }
  CHECK(checked == 5);
}

TEST_CASE("shape mismatches are rejected") {
  GridIndex gt{0, 0, 0};
  TensorD h({4, 4, 2});
  TensorD m({4, 4, 3});
  CHECK_THROWS_AS(sparse_contrastive(h, m, gt), ShapeMismatch);
  TensorD grad({2, 2, 2});
  TensorD m2({4, 4, 2});
  CHECK_THROWS_AS(sparse_contrastive(h, m2, gt, Reduction::mean, &grad),
                  ShapeMismatch);
}
