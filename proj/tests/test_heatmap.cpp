#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "placekit/heatmap.hpp"
#include "placekit/rng.hpp"

using namespace placekit;

namespace {

ScaleGrid tiny_grid(int c) {
  ScaleGrid g;
  for (int i = 0; i < c; ++i) g.values.push_back(0.15 + 0.1 * i);
  return g;
}

Heatmap3D random_heatmap(int w, int h, int c, Rng& rng) {
  Heatmap3D hm(ImageDims{w, h}, tiny_grid(c));
  for (auto& v : hm.data) v = float(rng.uniform(-3.0, 5.0));
  return hm;
}

// Exhaustive reimplementation of the top-k rules: enumerate entries, apply
// the strict 3x3x3 neighbor test, the mean + 2*std threshold, the fallback
// fills, and the forced global-argmax top-1. Kept dumb and independent of
// the library path.
std::vector<GridIndex> brute_force_top_k(const Heatmap3D& hn, int k) {
  struct Entry {
    GridIndex idx;
    double score;
    bool peak;
  };
  int W = hn.dims.w, H = hn.dims.h, C = hn.channels();
  std::vector<Entry> entries;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int z = 0; z < C; ++z) {
        bool peak = true;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            for (int dz = -1; dz <= 1; ++dz) {
              if (dy == 0 && dx == 0 && dz == 0) continue;
              int ny = y + dy, nx = x + dx, nz = z + dz;
              if (ny < 0 || ny >= H || nx < 0 || nx >= W || nz < 0 || nz >= C)
                continue;
              if (hn.at(ny, nx, nz) >= hn.at(y, x, z)) peak = false;
            }
        entries.push_back({GridIndex{x, y, z}, double(hn.at(y, x, z)), peak});
      }
  double mean = 0;
  for (auto& e : entries) mean += e.score;
  mean /= double(entries.size());
  double var = 0;
  for (auto& e : entries) var += (e.score - mean) * (e.score - mean);
  var /= double(entries.size());
  double thr = mean + 2 * std::sqrt(var);

  auto order = [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.idx.y != b.idx.y) return a.idx.y < b.idx.y;
    if (a.idx.x != b.idx.x) return a.idx.x < b.idx.x;
    return a.idx.z < b.idx.z;
  };

  // global argmax in scan order
  Entry best = entries[0];
  for (auto& e : entries)
    if (e.score > best.score) best = e;

  std::vector<Entry> peaks_above, peaks_below, rest;
  for (auto& e : entries) {
    if (e.peak && e.score > thr)
      peaks_above.push_back(e);
    else if (e.peak)
      peaks_below.push_back(e);
  }
  std::sort(peaks_above.begin(), peaks_above.end(), order);
  std::sort(peaks_below.begin(), peaks_below.end(), order);

  std::vector<GridIndex> out;
  auto taken = [&](GridIndex i) {
    return std::find(out.begin(), out.end(), i) != out.end();
  };
  out.push_back(best.idx);
  for (auto& e : peaks_above) {
    if (int(out.size()) >= k) break;
    if (!taken(e.idx)) out.push_back(e.idx);
  }
  for (auto& e : peaks_below) {
    if (int(out.size()) >= k) break;
    if (!taken(e.idx)) out.push_back(e.idx);
  }
  if (int(out.size()) < k) {
    for (auto& e : entries)
      if (!taken(e.idx)) rest.push_back(e);
    std::sort(rest.begin(), rest.end(), order);
    for (auto& e : rest) {
      if (int(out.size()) >= k) break;
      out.push_back(e.idx);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("normalize maps to [0,1] and hits both endpoints") {
  Heatmap3D h(ImageDims{3, 1}, tiny_grid(1));
  h.data = {0.0f, 1.0f, 2.0f};
  Heatmap3D n = normalize(h);
  CHECK(n.data[0] == 0.0f);
  CHECK(n.data[1] == 0.5f);
  CHECK(n.data[2] == 1.0f);

  Heatmap3D c(ImageDims{3, 1}, tiny_grid(1));
  c.data = {0.7f, 0.7f, 0.7f};
  CHECK_THROWS_AS(normalize(c), DegenerateHeatmap);
}

TEST_CASE("normalize is invariant under positive affine transforms") {
  Rng rng(5);
  Heatmap3D h(ImageDims{8, 8}, tiny_grid(4));
  // entries on a power-of-two lattice so a*H + b is exact in float32
  for (auto& v : h.data) v = float(rng.uniform_int(1024)) / 1024.0f;
  h.data[0] = 0.0f;
  h.data[1] = 1.0f;
  Heatmap3D ha = h;
  for (auto& v : ha.data) v = 4.0f * v + 0.5f;
  Heatmap3D n1 = normalize(h), n2 = normalize(ha);
  for (std::size_t i = 0; i < n1.size(); ++i)
    CHECK(std::abs(double(n1.data[i]) - double(n2.data[i])) < 1e-12);

  // generic affine transforms agree to float precision
  Heatmap3D hb = h;
  for (auto& v : hb.data) v = 2.7f * v + 1.3f;
  Heatmap3D n3 = normalize(hb);
  for (std::size_t i = 0; i < n1.size(); ++i)
    CHECK(std::abs(double(n1.data[i]) - double(n3.data[i])) < 1e-6);
}

TEST_CASE("local_maxima finds isolated bumps") {
  Heatmap3D h(ImageDims{9, 9}, tiny_grid(3));
  auto bump = [&](int cx, int cy, int cz, float peak) {
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x)
        for (int z = 0; z < 3; ++z) {
          float d2 = float((x - cx) * (x - cx) + (y - cy) * (y - cy) +
                           4 * (z - cz) * (z - cz));
          h.at(y, x, z) = std::max(h.at(y, x, z), peak * std::exp(-d2 / 4.0f));
        }
  };
  bump(2, 2, 1, 1.0f);
  bump(7, 6, 1, 0.8f);
  std::vector<Peak> peaks = local_maxima(h);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].idx == GridIndex{2, 2, 1});
  CHECK(peaks[1].idx == GridIndex{7, 6, 1});
  CHECK(peaks[0].score > peaks[1].score);

  Heatmap3D flat(ImageDims{4, 4}, tiny_grid(2));
  flat.data.assign(flat.size(), 0.25f);
  CHECK(local_maxima(flat).empty());  // strict inequality: plateaus yield none
}

TEST_CASE("top_k_boxes: dominant entry and k=1 argmax") {
  Heatmap3D h(ImageDims{8, 8}, tiny_grid(4));
  Rng rng(23);
  for (auto& v : h.data) v = float(rng.uniform(0.0, 0.2));
  h.at(5, 3, 2) = 1.0f;
  Heatmap3D hn = normalize(h);

  auto top = top_k_boxes(hn, 1, 1.0);
  REQUIRE(top.size() == 1);
  CHECK(top[0].first.cx() == doctest::Approx(3.0));
  CHECK(top[0].first.cy() == doctest::Approx(5.0));
  CHECK(top[0].second == 1.0f);
}

TEST_CASE("top_k_boxes matches the brute-force oracle") {
  Rng rng(29);
  for (int trial = 0; trial < 60; ++trial) {
    int w = 4 + int(rng.uniform_int(12));
    int hh = 4 + int(rng.uniform_int(12));
    int c = 2 + int(rng.uniform_int(4));
    Heatmap3D hm = random_heatmap(w, hh, c, rng);
    Heatmap3D hn = normalize(hm);
    int k = 1 + int(rng.uniform_int(7));
    auto expected = brute_force_top_k(hn, k);
    auto got = top_k_boxes(hn, k, 1.0);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      PlacementBox want = box_from_index(expected[i], hn.grid, hn.dims, 1.0);
      CHECK(got[i].first.l == doctest::Approx(want.l));
      CHECK(got[i].first.t == doctest::Approx(want.t));
    }
  }
}

TEST_CASE("top_k_boxes returns k boxes with distinct indices") {
  Rng rng(31);
  Heatmap3D hm = random_heatmap(10, 10, 4, rng);
  Heatmap3D hn = normalize(hm);
  auto got = top_k_boxes(hn, 5, 1.0);
  REQUIRE(got.size() == 5);
  for (std::size_t i = 0; i < got.size(); ++i)
    for (std::size_t j = i + 1; j < got.size(); ++j)
      CHECK((got[i].first.l != got[j].first.l ||
             got[i].first.t != got[j].first.t ||
             got[i].first.w != got[j].first.w));
}

TEST_CASE("slice_fixed_scale normalizes over the slice only") {
  Heatmap3D h(ImageDims{2, 1}, tiny_grid(2));
  h.at(0, 0, 0) = 0.0f;
  h.at(0, 1, 0) = 2.0f;
  h.at(0, 0, 1) = 5.0f;  // other channel should not matter
  h.at(0, 1, 1) = 5.0f;
  Map2D m = slice_fixed_scale(h, 0);
  CHECK(m.at(0, 0) == 0.0f);
  CHECK(m.at(0, 1) == 1.0f);
  CHECK_THROWS_AS(slice_fixed_scale(h, 1), DegenerateHeatmap);

  // idempotent: normalizing a normalized slice changes nothing
  Heatmap3D h2(ImageDims{2, 1}, tiny_grid(1));
  h2.at(0, 0, 0) = m.at(0, 0);
  h2.at(0, 1, 0) = m.at(0, 1);
  Map2D m2 = slice_fixed_scale(h2, 0);
  CHECK(m2.at(0, 0) == m.at(0, 0));
  CHECK(m2.at(0, 1) == m.at(0, 1));
}

TEST_CASE("slice_fixed_location argmax and tie rule") {
  Heatmap3D h(ImageDims{2, 2}, tiny_grid(4));
  h.at(1, 0, 0) = 0.1f;
  h.at(1, 0, 1) = 0.9f;
  h.at(1, 0, 2) = 0.3f;
  h.at(1, 0, 3) = 0.2f;
  ScaleScores s = slice_fixed_location(h, 0, 1);
  CHECK(s.argmax == 1);
  CHECK(s.scores[1] == 0.9f);

  Heatmap3D flat(ImageDims{2, 2}, tiny_grid(4));
  flat.data.assign(flat.size(), 0.5f);
  CHECK(slice_fixed_location(flat, 1, 1).argmax == 0);

  // matches an exhaustive scan
  Rng rng(37);
  Heatmap3D r = random_heatmap(6, 5, 6, rng);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      ScaleScores ss = slice_fixed_location(r, x, y);
      int best = 0;
      for (int z = 1; z < 6; ++z)
        if (r.at(y, x, z) > r.at(y, x, best)) best = z;
      CHECK(ss.argmax == best);
    }
}

TEST_CASE("toph round-trips bit-exactly") {
  Rng rng(41);
  Heatmap3D h = random_heatmap(7, 5, 3, rng);
  auto dir = std::filesystem::temp_directory_path() / "placekit_toph_test";
  std::filesystem::create_directories(dir);
  write_toph(dir / "h.toph", h);
  Heatmap3D r = read_toph(dir / "h.toph", h.grid);
  CHECK(r.dims.w == h.dims.w);
  CHECK(r.dims.h == h.dims.h);
  CHECK(r.data == h.data);
  render_channels(h, dir, "h");
  CHECK(std::filesystem::exists(dir / "h_z00.pgm"));
  CHECK(std::filesystem::exists(dir / "h_z02.pgm"));
  std::filesystem::remove_all(dir);
}
