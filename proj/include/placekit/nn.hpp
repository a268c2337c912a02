#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "placekit/errors.hpp"
#include "placekit/rng.hpp"
#include "placekit/tensor.hpp"

// Differentiable substrate: forward primitives with hand-written reverse-mode
// gradients. Everything is deterministic for a fixed seed; summation order is
// fixed. float is the training precision, double the gradient-check precision.
namespace placekit::nn {

template <typename T>
struct ParamT {
  std::string name;
  TensorT<T> value;
  TensorT<T> grad;

  void init_fan_in_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    value = TensorT<T>(std::move(shape));
    grad = TensorT<T>(value.shape);
    double limit = 1.0 / std::sqrt(double(fan_in));
    for (auto& v : value.data) v = T(rng.uniform(-limit, limit));
  }
  void init_const(std::vector<int> shape, T c) {
    value = TensorT<T>(std::move(shape));
    grad = TensorT<T>(value.shape);
    value.fill(c);
  }
};

template <typename T>
using ParamRefs = std::vector<ParamT<T>*>;

// ---------------------------------------------------------------------------
// matmul kernels (row-major)

// C(n,m) += A(n,k) * B(k,m)
template <typename T>
void matmul_acc(const T* a, const T* b, T* c, int n, int k, int m) {
  for (int i = 0; i < n; ++i) {
    const T* arow = a + std::size_t(i) * k;
    T* crow = c + std::size_t(i) * m;
    for (int kk = 0; kk < k; ++kk) {
      T av = arow[kk];
      const T* brow = b + std::size_t(kk) * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(k,m) += A(n,k)^T * B(n,m)
template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, int n, int k, int m) {
  for (int i = 0; i < n; ++i) {
    const T* arow = a + std::size_t(i) * k;
    const T* brow = b + std::size_t(i) * m;
    for (int kk = 0; kk < k; ++kk) {
      T av = arow[kk];
      T* crow = c + std::size_t(kk) * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(n,r) += A(n,m) * B(r,m)^T
template <typename T>
void matmul_nt_acc(const T* a, const T* b, T* c, int n, int m, int r) {
  for (int i = 0; i < n; ++i) {
    const T* arow = a + std::size_t(i) * m;
    T* crow = c + std::size_t(i) * r;
    for (int j = 0; j < r; ++j) {
      const T* brow = b + std::size_t(j) * m;
      T acc = 0;
      for (int kk = 0; kk < m; ++kk) acc += arow[kk] * brow[kk];
      crow[j] += acc;
    }
  }
}

// ---------------------------------------------------------------------------
// Linear map with bias: (n, in) -> (n, out)

template <typename T>
struct LinearT {
  int in = 0, out = 0;
  ParamT<T> w, b;  // w: (in, out)
  TensorT<T> x_;

  void init(int in_dim, int out_dim, const std::string& name, Rng& rng) {
    in = in_dim;
    out = out_dim;
    w.name = name + ".w";
    w.init_fan_in_uniform({in, out}, in, rng);
    b.name = name + ".b";
    b.init_const({out}, T(0));
  }

  void params(ParamRefs<T>& p) {
    p.push_back(&w);
    p.push_back(&b);
  }

  TensorT<T> forward(const TensorT<T>& x) {
    if (x.ndim() != 2 || x.dim(1) != in)
      throw DimMismatch("linear: input dim mismatch");
    x_ = x;
    int n = x.dim(0);
    TensorT<T> y({n, out});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out; ++j) y(i, j) = b.value(j);
    matmul_acc(x.data.data(), w.value.data.data(), y.data.data(), n, in, out);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    int n = x_.dim(0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out; ++j) b.grad(j) += gy(i, j);
    matmul_tn_acc(x_.data.data(), gy.data.data(), w.grad.data.data(), n, in,
                  out);
    TensorT<T> gx({n, in});
    matmul_nt_acc(gy.data.data(), w.value.data.data(), gx.data.data(), n, out,
                  in);
    return gx;
  }
};

// ---------------------------------------------------------------------------
// 2D convolution on (h, w, c) tensors. Supports the three variants the model
// needs: 3x3 stride 1 pad 1, 3x3 stride 2 pad 1, and 1x1 stride 1 pad 0.
// Weight layout: (k*k*in_c, out_c), rows ordered [ky][kx][ic].

template <typename T>
struct Conv2dT {
  int in_c = 0, out_c = 0, ksize = 3, stride = 1, pad = 1;
  ParamT<T> w, b;
  TensorT<T> x_;

  void init(int in_channels, int out_channels, int k, int s,
            const std::string& name, Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    ksize = k;
    stride = s;
    pad = (k == 3) ? 1 : 0;
    w.name = name + ".w";
    w.init_fan_in_uniform({k * k * in_c, out_c}, k * k * in_c, rng);
    b.name = name + ".b";
    b.init_const({out_c}, T(0));
  }

  void params(ParamRefs<T>& p) {
    p.push_back(&w);
    p.push_back(&b);
  }

  int out_extent(int e) const { return (e + 2 * pad - ksize) / stride + 1; }

  TensorT<T> forward(const TensorT<T>& x) {
    if (x.ndim() != 3 || x.dim(2) != in_c)
      throw DimMismatch("conv2d: input channel mismatch");
    x_ = x;
    int h = x.dim(0), wdt = x.dim(1);
    int oh = out_extent(h), ow = out_extent(wdt);
    TensorT<T> y({oh, ow, out_c});
    const T* wd = w.value.data.data();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T* acc = &y(oy, ox, 0);
        for (int j = 0; j < out_c; ++j) acc[j] = b.value(j);
        for (int ky = 0; ky < ksize; ++ky) {
          int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < ksize; ++kx) {
            int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= wdt) continue;
            const T* xin = &x(iy, ix, 0);
            const T* wrow = wd + (std::size_t(ky) * ksize + kx) * in_c * out_c;
            for (int ic = 0; ic < in_c; ++ic) {
              T a = xin[ic];
              const T* wr = wrow + std::size_t(ic) * out_c;
              for (int j = 0; j < out_c; ++j) acc[j] += a * wr[j];
            }
          }
        }
      }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    int h = x_.dim(0), wdt = x_.dim(1);
    int oh = gy.dim(0), ow = gy.dim(1);
    TensorT<T> gx({h, wdt, in_c});
    const T* wd = w.value.data.data();
    T* wg = w.grad.data.data();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T* g = &gy(oy, ox, 0);
        for (int j = 0; j < out_c; ++j) b.grad(j) += g[j];
        for (int ky = 0; ky < ksize; ++ky) {
          int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < ksize; ++kx) {
            int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= wdt) continue;
            const T* xin = &x_(iy, ix, 0);
            T* gxin = &gx(iy, ix, 0);
            std::size_t base = (std::size_t(ky) * ksize + kx) * in_c * out_c;
            for (int ic = 0; ic < in_c; ++ic) {
              T a = xin[ic];
              const T* wr = wd + base + std::size_t(ic) * out_c;
              T* wgr = wg + base + std::size_t(ic) * out_c;
              T acc = 0;
              for (int j = 0; j < out_c; ++j) {
                wgr[j] += a * g[j];
                acc += wr[j] * g[j];
              }
              gxin[ic] += acc;
            }
          }
        }
      }
    }
    return gx;
  }
};

// ---------------------------------------------------------------------------
// GELU (erf form)

template <typename T>
inline T gelu_value(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2)));
}

template <typename T>
inline T gelu_derivative(T x) {
  T cdf = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
  T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
  return cdf + x * pdf;
}

template <typename T>
struct GeluT {
  TensorT<T> x_;

  TensorT<T> forward(const TensorT<T>& x) {
    x_ = x;
    TensorT<T> y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i)
      y.data[i] = gelu_value(x.data[i]);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> gx(x_.shape);
    for (std::size_t i = 0; i < gx.numel(); ++i)
      gx.data[i] = gy.data[i] * gelu_derivative(x_.data[i]);
    return gx;
  }
};

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x spatial upsampling: (h, w, c) -> (2h, 2w, c)

template <typename T>
struct UpsampleNearest2xT {
  int h_ = 0, w_ = 0, c_ = 0;

  TensorT<T> forward(const TensorT<T>& x) {
    h_ = x.dim(0);
    w_ = x.dim(1);
    c_ = x.dim(2);
    TensorT<T> y({2 * h_, 2 * w_, c_});
    for (int y0 = 0; y0 < h_; ++y0)
      for (int x0 = 0; x0 < w_; ++x0) {
        const T* s = &x(y0, x0, 0);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            T* d = &y(2 * y0 + dy, 2 * x0 + dx, 0);
            for (int c = 0; c < c_; ++c) d[c] = s[c];
          }
      }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> gx({h_, w_, c_});
    for (int y0 = 0; y0 < h_; ++y0)
      for (int x0 = 0; x0 < w_; ++x0) {
        T* d = &gx(y0, x0, 0);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const T* s = &gy(2 * y0 + dy, 2 * x0 + dx, 0);
            for (int c = 0; c < c_; ++c) d[c] += s[c];
          }
      }
    return gx;
  }
};

// ---------------------------------------------------------------------------
// Layer normalization over the last axis, with affine parameters.

template <typename T>
struct LayerNormT {
  int d = 0;
  T eps = T(1e-5);
  ParamT<T> gamma, beta;
  TensorT<T> xhat_;
  std::vector<T> inv_std_;

  void init(int dim, const std::string& name, Rng&) {
    d = dim;
    gamma.name = name + ".gamma";
    gamma.init_const({d}, T(1));
    beta.name = name + ".beta";
    beta.init_const({d}, T(0));
  }

  void params(ParamRefs<T>& p) {
    p.push_back(&gamma);
    p.push_back(&beta);
  }

  TensorT<T> forward(const TensorT<T>& x) {
    if (x.dim(x.ndim() - 1) != d) throw DimMismatch("layernorm: dim mismatch");
    int n = int(x.numel() / std::size_t(d));
    xhat_ = TensorT<T>(x.shape);
    inv_std_.assign(std::size_t(n), T(0));
    TensorT<T> y(x.shape);
    for (int i = 0; i < n; ++i) {
      const T* row = x.data.data() + std::size_t(i) * d;
      T* xh = xhat_.data.data() + std::size_t(i) * d;
      T* yr = y.data.data() + std::size_t(i) * d;
      T mu = 0;
      for (int j = 0; j < d; ++j) mu += row[j];
      mu /= T(d);
      T var = 0;
      for (int j = 0; j < d; ++j) {
        T c = row[j] - mu;
        var += c * c;
      }
      var /= T(d);
      T inv = T(1) / std::sqrt(var + eps);
      inv_std_[std::size_t(i)] = inv;
      for (int j = 0; j < d; ++j) {
        xh[j] = (row[j] - mu) * inv;
        yr[j] = gamma.value(j) * xh[j] + beta.value(j);
      }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    int n = int(gy.numel() / std::size_t(d));
    TensorT<T> gx(gy.shape);
    for (int i = 0; i < n; ++i) {
      const T* g = gy.data.data() + std::size_t(i) * d;
      const T* xh = xhat_.data.data() + std::size_t(i) * d;
      T* gxr = gx.data.data() + std::size_t(i) * d;
      T inv = inv_std_[std::size_t(i)];
      T sum_g = 0, sum_gx = 0;
      for (int j = 0; j < d; ++j) {
        T dxhat = g[j] * gamma.value(j);
        sum_g += dxhat;
        sum_gx += dxhat * xh[j];
        gamma.grad(j) += g[j] * xh[j];
        beta.grad(j) += g[j];
      }
      for (int j = 0; j < d; ++j) {
        T dxhat = g[j] * gamma.value(j);
        gxr[j] = inv * (dxhat - (sum_g + xh[j] * sum_gx) / T(d));
      }
    }
    return gx;
  }
};

// ---------------------------------------------------------------------------
// Softmax along an arbitrary axis.

template <typename T>
TensorT<T> softmax(const TensorT<T>& x, int axis) {
  if (axis < 0 || axis >= x.ndim()) throw BadDim("softmax: axis out of range");
  std::size_t inner = 1, outer = 1;
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= std::size_t(x.dim(i));
  for (int i = 0; i < axis; ++i) outer *= std::size_t(x.dim(i));
  std::size_t len = std::size_t(x.dim(axis));
  TensorT<T> y(x.shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      std::size_t base = o * len * inner + in;
      T mx = x.data[base];
      for (std::size_t l = 1; l < len; ++l)
        mx = std::max(mx, x.data[base + l * inner]);
      T sum = 0;
      for (std::size_t l = 0; l < len; ++l) {
        T e = std::exp(x.data[base + l * inner] - mx);
        y.data[base + l * inner] = e;
        sum += e;
      }
      for (std::size_t l = 0; l < len; ++l) y.data[base + l * inner] /= sum;
    }
  }
  return y;
}

// gx from the softmax output y and upstream gy (same axis).
template <typename T>
TensorT<T> softmax_backward(const TensorT<T>& y, const TensorT<T>& gy,
                            int axis) {
  std::size_t inner = 1, outer = 1;
  for (int i = axis + 1; i < y.ndim(); ++i) inner *= std::size_t(y.dim(i));
  for (int i = 0; i < axis; ++i) outer *= std::size_t(y.dim(i));
  std::size_t len = std::size_t(y.dim(axis));
  TensorT<T> gx(y.shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      std::size_t base = o * len * inner + in;
      T dot = 0;
      for (std::size_t l = 0; l < len; ++l)
        dot += y.data[base + l * inner] * gy.data[base + l * inner];
      for (std::size_t l = 0; l < len; ++l)
        gx.data[base + l * inner] =
            y.data[base + l * inner] * (gy.data[base + l * inner] - dot);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Elementwise and shape primitives.

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("add: shape mismatch");
  TensorT<T> y(a.shape);
  for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] = a.data[i] + b.data[i];
  return y;
}

// d(a+b)/da = gy, d(a+b)/db = gy (no helper needed).

template <typename T>
TensorT<T> multiply(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("multiply: shape mismatch");
  TensorT<T> y(a.shape);
  for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] = a.data[i] * b.data[i];
  return y;
}

template <typename T>
void multiply_backward(const TensorT<T>& a, const TensorT<T>& b,
                       const TensorT<T>& gy, TensorT<T>& ga, TensorT<T>& gb) {
  for (std::size_t i = 0; i < gy.numel(); ++i) {
    ga.data[i] += gy.data[i] * b.data[i];
    gb.data[i] += gy.data[i] * a.data[i];
  }
}

// (h, w, c) -> (c)
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  TensorT<T> y({c});
  for (int i = 0; i < h * w; ++i)
    for (int j = 0; j < c; ++j) y(j) += x.data[std::size_t(i) * c + j];
  for (int j = 0; j < c; ++j) y(j) /= T(h * w);
  return y;
}

template <typename T>
TensorT<T> global_avg_pool_backward(const TensorT<T>& gy, int h, int w) {
  int c = gy.dim(0);
  TensorT<T> gx({h, w, c});
  T scale = T(1) / T(h * w);
  for (int i = 0; i < h * w; ++i)
    for (int j = 0; j < c; ++j)
      gx.data[std::size_t(i) * c + j] = gy(j) * scale;
  return gx;
}

template <typename T>
TensorT<T> concat_lastdim(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.ndim() != b.ndim()) throw ShapeMismatch("concat: rank mismatch");
  for (int i = 0; i + 1 < a.ndim(); ++i)
    if (a.dim(i) != b.dim(i)) throw ShapeMismatch("concat: shape mismatch");
  int da = a.dim(a.ndim() - 1), db = b.dim(b.ndim() - 1);
  std::vector<int> shape = a.shape;
  shape.back() = da + db;
  TensorT<T> y(shape);
  std::size_t rows = a.numel() / std::size_t(da);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int j = 0; j < da; ++j)
      y.data[r * (da + db) + std::size_t(j)] = a.data[r * da + std::size_t(j)];
    for (int j = 0; j < db; ++j)
      y.data[r * (da + db) + da + std::size_t(j)] =
          b.data[r * db + std::size_t(j)];
  }
  return y;
}

template <typename T>
void concat_lastdim_backward(const TensorT<T>& gy, TensorT<T>& ga,
                             TensorT<T>& gb) {
  int da = ga.dim(ga.ndim() - 1), db = gb.dim(gb.ndim() - 1);
  std::size_t rows = ga.numel() / std::size_t(da);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int j = 0; j < da; ++j)
      ga.data[r * da + std::size_t(j)] += gy.data[r * (da + db) + std::size_t(j)];
    for (int j = 0; j < db; ++j)
      gb.data[r * db + std::size_t(j)] +=
          gy.data[r * (da + db) + da + std::size_t(j)];
  }
}

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& x) {
  if (x.ndim() != 2) throw ShapeMismatch("transpose2d: rank must be 2");
  TensorT<T> y({x.dim(1), x.dim(0)});
  for (int i = 0; i < x.dim(0); ++i)
    for (int j = 0; j < x.dim(1); ++j) y(j, i) = x(i, j);
  return y;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention over (n, d) token matrices.

enum class AttnScale { inv_sqrt_d, inv_d };

template <typename T>
struct MultiHeadAttentionT {
  int d = 0, heads = 1, dh = 0;
  T scale = T(1);
  bool identity_attention = false;  // test hook: disables token mixing
  // No key bias: it shifts every logit in a row equally and cancels in the
  // softmax, leaving a dead parameter.
  ParamT<T> wq, bq, wk, wv, bv, wo, bo;
  TensorT<T> x_, q_, k_, v_, probs_, attnout_;

  void init(int dim, int n_heads, AttnScale mode, const std::string& name,
            Rng& rng) {
    if (dim % n_heads != 0)
      throw DimMismatch("attention: d must be divisible by n_heads");
    d = dim;
    heads = n_heads;
    dh = d / heads;
    scale = mode == AttnScale::inv_sqrt_d ? T(1) / std::sqrt(T(dh))
                                          : T(1) / T(dh);
    auto mk = [&](ParamT<T>& w, ParamT<T>* b, const std::string& n) {
      w.name = name + "." + n + ".w";
      w.init_fan_in_uniform({d, d}, d, rng);
      if (b) {
        b->name = name + "." + n + ".b";
        b->init_const({d}, T(0));
      }
    };
    mk(wq, &bq, "q");
    mk(wk, nullptr, "k");
    mk(wv, &bv, "v");
    mk(wo, &bo, "o");
  }

  void params(ParamRefs<T>& p) {
    for (auto* q : {&wq, &bq, &wk, &wv, &bv, &wo, &bo}) p.push_back(q);
  }

  TensorT<T> project(const TensorT<T>& x, const ParamT<T>& w,
                     const ParamT<T>* b) const {
    int n = x.dim(0);
    TensorT<T> y({n, d});
    if (b)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) y(i, j) = b->value(j);
    matmul_acc(x.data.data(), w.value.data.data(), y.data.data(), n, d, d);
    return y;
  }

  TensorT<T> forward(const TensorT<T>& x) {
    if (x.ndim() != 2 || x.dim(1) != d)
      throw DimMismatch("attention: token dim mismatch");
    x_ = x;
    int n = x.dim(0);
    q_ = project(x, wq, &bq);
    k_ = project(x, wk, nullptr);
    v_ = project(x, wv, &bv);
    probs_ = TensorT<T>({heads, n, n});
    attnout_ = TensorT<T>({n, d});
    std::vector<T> logits(std::size_t(n) * n);
    for (int hd = 0; hd < heads; ++hd) {
      int off = hd * dh;
      if (identity_attention) {
        for (int i = 0; i < n; ++i) probs_(hd, i, i) = T(1);
      } else {
        std::fill(logits.begin(), logits.end(), T(0));
        // logits(i,j) = scale * q_i . k_j over this head's slice
        for (int i = 0; i < n; ++i) {
          const T* qi = &q_(i, off);
          for (int j = 0; j < n; ++j) {
            const T* kj = &k_(j, off);
            T acc = 0;
            for (int e = 0; e < dh; ++e) acc += qi[e] * kj[e];
            logits[std::size_t(i) * n + j] = acc * scale;
          }
        }
        for (int i = 0; i < n; ++i) {
          const T* lrow = logits.data() + std::size_t(i) * n;
          T* prow = &probs_(hd, i, 0);
          T mx = lrow[0];
          for (int j = 1; j < n; ++j) mx = std::max(mx, lrow[j]);
          T sum = 0;
          for (int j = 0; j < n; ++j) {
            prow[j] = std::exp(lrow[j] - mx);
            sum += prow[j];
          }
          for (int j = 0; j < n; ++j) prow[j] /= sum;
        }
      }
      // attnout head slice = probs * V_head
      for (int i = 0; i < n; ++i) {
        const T* prow = &probs_(hd, i, 0);
        T* orow = &attnout_(i, off);
        for (int j = 0; j < n; ++j) {
          T p = prow[j];
          const T* vrow = &v_(j, off);
          for (int e = 0; e < dh; ++e) orow[e] += p * vrow[e];
        }
      }
    }
    TensorT<T> y({n, d});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) y(i, j) = bo.value(j);
    matmul_acc(attnout_.data.data(), wo.value.data.data(), y.data.data(), n, d,
               d);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    int n = x_.dim(0);
    // output projection
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) bo.grad(j) += gy(i, j);
    matmul_tn_acc(attnout_.data.data(), gy.data.data(), wo.grad.data.data(), n,
                  d, d);
    TensorT<T> gattn({n, d});
    matmul_nt_acc(gy.data.data(), wo.value.data.data(), gattn.data.data(), n,
                  d, d);

    TensorT<T> gq({n, d}), gk({n, d}), gv({n, d});
    std::vector<T> dprobs(std::size_t(n) * n), dlogits(std::size_t(n) * n);
    for (int hd = 0; hd < heads; ++hd) {
      int off = hd * dh;
      // dV = P^T * gout ; dP = gout * V^T
      for (int i = 0; i < n; ++i) {
        const T* prow = &probs_(hd, i, 0);
        const T* grow = &gattn(i, off);
        T* dprow = dprobs.data() + std::size_t(i) * n;
        for (int j = 0; j < n; ++j) {
          const T* vrow = &v_(j, off);
          T* gvrow = &gv(j, off);
          T p = prow[j];
          T acc = 0;
          for (int e = 0; e < dh; ++e) {
            gvrow[e] += p * grow[e];
            acc += grow[e] * vrow[e];
          }
          dprow[j] = acc;
        }
      }
      if (identity_attention) continue;  // probs were constant
      // softmax backward per row
      for (int i = 0; i < n; ++i) {
        const T* prow = &probs_(hd, i, 0);
        const T* dprow = dprobs.data() + std::size_t(i) * n;
        T* dlrow = dlogits.data() + std::size_t(i) * n;
        T dot = 0;
        for (int j = 0; j < n; ++j) dot += prow[j] * dprow[j];
        for (int j = 0; j < n; ++j) dlrow[j] = prow[j] * (dprow[j] - dot);
      }
      // dQ = scale * dlogits * K ; dK = scale * dlogits^T * Q
      for (int i = 0; i < n; ++i) {
        const T* dlrow = dlogits.data() + std::size_t(i) * n;
        T* gqrow = &gq(i, off);
        const T* qrow = &q_(i, off);
        for (int j = 0; j < n; ++j) {
          T dl = dlrow[j] * scale;
          const T* krow = &k_(j, off);
          T* gkrow = &gk(j, off);
          for (int e = 0; e < dh; ++e) {
            gqrow[e] += dl * krow[e];
            gkrow[e] += dl * qrow[e];
          }
        }
      }
    }
    // back through the three input projections
    TensorT<T> gx({n, d});
    auto back_proj = [&](const TensorT<T>& gproj, ParamT<T>& w, ParamT<T>* b) {
      if (b)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < d; ++j) b->grad(j) += gproj(i, j);
      matmul_tn_acc(x_.data.data(), gproj.data.data(), w.grad.data.data(), n,
                    d, d);
      matmul_nt_acc(gproj.data.data(), w.value.data.data(), gx.data.data(), n,
                    d, d);
    };
    back_proj(gq, wq, &bq);
    back_proj(gk, wk, nullptr);
    back_proj(gv, wv, &bv);
    return gx;
  }
};

// ---------------------------------------------------------------------------
// Transformer block: pre-norm attention and 2-layer GELU feed-forward,
// both with residual connections.

template <typename T>
struct FeedForwardT {
  LinearT<T> fc1, fc2;
  GeluT<T> act;

  void init(int d, int d_ff, const std::string& name, Rng& rng) {
    fc1.init(d, d_ff, name + ".fc1", rng);
    fc2.init(d_ff, d, name + ".fc2", rng);
  }
  void params(ParamRefs<T>& p) {
    fc1.params(p);
    fc2.params(p);
  }
  TensorT<T> forward(const TensorT<T>& x) {
    return fc2.forward(act.forward(fc1.forward(x)));
  }
  TensorT<T> backward(const TensorT<T>& gy) {
    return fc1.backward(act.backward(fc2.backward(gy)));
  }
};

template <typename T>
struct TransformerLayerT {
  LayerNormT<T> ln1, ln2;
  MultiHeadAttentionT<T> attn;
  FeedForwardT<T> ffn;

  void init(int d, int d_ff, int n_heads, AttnScale mode,
            const std::string& name, Rng& rng) {
    ln1.init(d, name + ".ln1", rng);
    ln2.init(d, name + ".ln2", rng);
    attn.init(d, n_heads, mode, name + ".attn", rng);
    ffn.init(d, d_ff, name + ".ffn", rng);
  }
  void params(ParamRefs<T>& p) {
    ln1.params(p);
    attn.params(p);
    ln2.params(p);
    ffn.params(p);
  }

  TensorT<T> forward(const TensorT<T>& x) {
    TensorT<T> x1 = add(x, attn.forward(ln1.forward(x)));
    return add(x1, ffn.forward(ln2.forward(x1)));
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> gx1 = add(gy, ln2.backward(ffn.backward(gy)));
    return add(gx1, ln1.backward(attn.backward(gx1)));
  }
};

// ---------------------------------------------------------------------------
// 2D sinusoidal positional embedding: (h*w, d), parameter-free. The first
// d/2 channels encode x, the last d/2 encode y, sin/cos interleaved at
// geometrically spaced frequencies. Token order is row-major (y, then x).

template <typename T>
TensorT<T> pos_embed_2d(int h, int w, int d) {
  if (d <= 0 || d % 4 != 0)
    throw BadDim("pos_embed_2d: d must be a positive multiple of 4");
  int quarter = d / 4;
  TensorT<T> pe({h * w, d});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T* row = &pe(y * w + x, 0);
      for (int j = 0; j < quarter; ++j) {
        double omega = std::pow(10000.0, -4.0 * j / double(d));
        row[2 * j] = T(std::sin(x * omega));
        row[2 * j + 1] = T(std::cos(x * omega));
        row[d / 2 + 2 * j] = T(std::sin(y * omega));
        row[d / 2 + 2 * j + 1] = T(std::cos(y * omega));
      }
    }
  }
  return pe;
}

}  // namespace placekit::nn
