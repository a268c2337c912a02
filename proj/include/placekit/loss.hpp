#pragma once

#include <cmath>
#include <cstdlib>

#include "placekit/geometry.hpp"
#include "placekit/tensor.hpp"

// Training objectives over (h, w, c) heatmap tensors. All losses are
// differentiable through the substrate: each evaluation can accumulate
// dLoss/dH into a caller-provided gradient tensor.
namespace placekit {

enum class Reduction { mean, sum };

struct MarginSpec {
  int radius_x = 20;
  int radius_y = 20;
  int radius_z = 2;
  double margin = 0.1;

  // The 20-cell paper radius is tied to 224x224 heatmaps; scale it with
  // resolution (6 cells at 64x64).
  static MarginSpec scaled_default(ImageDims dims) {
    MarginSpec m;
    m.radius_x = int(std::lround(20.0 * dims.w / 224.0));
    m.radius_y = int(std::lround(20.0 * dims.h / 224.0));
    return m;
  }
};

struct GroundTruth {
  GridIndex idx;       // lattice point (x_gt, y_gt, z_gt)
  PlacementBox box;    // original continuous box
};

namespace detail {
template <typename T>
inline void check_heatmap_shape(const TensorT<T>& h) {
  if (h.ndim() != 3) throw ShapeMismatch("loss: heatmap must be (h, w, c)");
}
template <typename T>
inline std::size_t gt_offset(const TensorT<T>& h, GridIndex gt) {
  if (gt.y < 0 || gt.y >= h.dim(0) || gt.x < 0 || gt.x >= h.dim(1) ||
      gt.z < 0 || gt.z >= h.dim(2))
    throw IndexOutOfRange("loss: ground-truth index out of range");
  return (std::size_t(gt.y) * h.dim(1) + gt.x) * h.dim(2) + gt.z;
}
}  // namespace detail

// Zero inside the box neighborhood |x-x_gt|<=rx, |y-y_gt|<=ry, |z-z_gt|<=rz,
// the margin value elsewhere.
template <typename T>
TensorT<T> margin_matrix(GridIndex gt, ImageDims dims, int c,
                         const MarginSpec& spec) {
  TensorT<T> m({dims.h, dims.w, c});
  for (int y = 0; y < dims.h; ++y) {
    bool in_y = std::abs(y - gt.y) <= spec.radius_y;
    for (int x = 0; x < dims.w; ++x) {
      bool in_xy = in_y && std::abs(x - gt.x) <= spec.radius_x;
      T* row = &m(y, x, 0);
      for (int z = 0; z < c; ++z)
        row[z] = (in_xy && std::abs(z - gt.z) <= spec.radius_z)
                     ? T(0)
                     : T(spec.margin);
    }
  }
  return m;
}

// L_con: reduction over max(0, H(x,y,z) - H(gt) + M(x,y,z)). The hinge
// subgradient at the kink is 0.
template <typename T>
T sparse_contrastive(const TensorT<T>& h, const TensorT<T>& m, GridIndex gt,
                     Reduction reduction = Reduction::mean,
                     TensorT<T>* grad = nullptr) {
  detail::check_heatmap_shape(h);
  if (!h.same_shape(m))
    throw ShapeMismatch("sparse_contrastive: margin shape mismatch");
  if (grad && !grad->same_shape(h))
    throw ShapeMismatch("sparse_contrastive: grad shape mismatch");
  std::size_t gt_off = detail::gt_offset(h, gt);
  T hgt = h.data[gt_off];
  T scale = reduction == Reduction::mean ? T(1) / T(h.numel()) : T(1);
  T loss = 0;
  T gt_grad = 0;
  for (std::size_t i = 0; i < h.numel(); ++i) {
    T hinge = h.data[i] - hgt + m.data[i];
    if (hinge > T(0)) {
      loss += hinge;
      if (grad) {
        grad->data[i] += scale;
        gt_grad -= scale;
      }
    }
  }
  if (grad) grad->data[gt_off] += gt_grad;
  return loss * scale;
}

// L_range = |1 - H(gt)| + |min(H)|. The min subgradient goes to the first
// minimizer in scan order.
template <typename T>
T range_loss(const TensorT<T>& h, GridIndex gt, TensorT<T>* grad = nullptr) {
  detail::check_heatmap_shape(h);
  if (grad && !grad->same_shape(h))
    throw ShapeMismatch("range_loss: grad shape mismatch");
  std::size_t gt_off = detail::gt_offset(h, gt);
  std::size_t min_off = 0;
  for (std::size_t i = 1; i < h.numel(); ++i)
    if (h.data[i] < h.data[min_off]) min_off = i;
  T hgt = h.data[gt_off];
  T hmin = h.data[min_off];
  if (grad) {
    T one_minus = T(1) - hgt;
    if (one_minus > T(0))
      grad->data[gt_off] -= T(1);
    else if (one_minus < T(0))
      grad->data[gt_off] += T(1);
    if (hmin > T(0))
      grad->data[min_off] += T(1);
    else if (hmin < T(0))
      grad->data[min_off] -= T(1);
  }
  return std::abs(T(1) - hgt) + std::abs(hmin);
}

// L = L_con + L_range
template <typename T>
T total_loss(const TensorT<T>& h, const TensorT<T>& m, GridIndex gt,
             Reduction reduction = Reduction::mean,
             TensorT<T>* grad = nullptr) {
  return sparse_contrastive(h, m, gt, reduction, grad) +
         range_loss(h, gt, grad);
}

enum class AssignKind { binary, gaussian };

// G(x,y,z) = exp(-(dx^2+dy^2)/(2*sigma_xy^2) - dz^2/(2*sigma_z^2))
inline double gaussian_target(int dx, int dy, int dz, double sigma_xy,
                              double sigma_z) {
  return std::exp(-(double(dx) * dx + double(dy) * dy) /
                      (2 * sigma_xy * sigma_xy) -
                  double(dz) * dz / (2 * sigma_z * sigma_z));
}

// Baseline assignment losses (both pass H through a sigmoid):
//   binary   — mean binary cross-entropy against the one-hot target at gt
//   gaussian — mean squared error against G = exp(-(dx^2+dy^2)/(2s_xy^2)
//              - dz^2/(2s_z^2))
template <typename T>
T assignment_loss(const TensorT<T>& h, GridIndex gt, AssignKind kind,
                  double sigma_xy, double sigma_z,
                  TensorT<T>* grad = nullptr) {
  detail::check_heatmap_shape(h);
  if (grad && !grad->same_shape(h))
    throw ShapeMismatch("assignment_loss: grad shape mismatch");
  std::size_t gt_off = detail::gt_offset(h, gt);
  if (kind == AssignKind::gaussian && (sigma_xy <= 0 || sigma_z <= 0))
    throw Error("assignment_loss: gaussian sigmas must be positive");
  int hh = h.dim(0), ww = h.dim(1), c = h.dim(2);
  T inv_n = T(1) / T(h.numel());
  T loss = 0;
  std::size_t i = 0;
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < ww; ++x) {
      for (int z = 0; z < c; ++z, ++i) {
        T v = h.data[i];
        T s = T(1) / (T(1) + std::exp(-v));
        if (kind == AssignKind::binary) {
          T target = (i == gt_off) ? T(1) : T(0);
          // softplus form keeps large |v| stable
          T softplus_pos = v > T(0) ? v + std::log1p(std::exp(-v))
                                    : std::log1p(std::exp(v));
          T softplus_neg = softplus_pos - v;  // softplus(-v)
          loss += target * softplus_neg + (T(1) - target) * softplus_pos;
          if (grad) grad->data[i] += (s - target) * inv_n;
        } else {
          T target =
              T(gaussian_target(x - gt.x, y - gt.y, z - gt.z, sigma_xy, sigma_z));
          T diff = s - target;
          loss += diff * diff;
          if (grad) grad->data[i] += T(2) * diff * s * (T(1) - s) * inv_n;
        }
      }
    }
  }
  return loss * inv_n;
}

}  // namespace placekit
