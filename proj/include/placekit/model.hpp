#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "placekit/heatmap.hpp"
#include "placekit/image.hpp"
#include "placekit/nn.hpp"

namespace placekit {

enum class Variant { full, local_concat, global_only };
enum class AttnScaleMode { inv_sqrt_d, inv_d };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ModelConfig {
  int input_size = 64;   // square input resolution
  int k = 3;             // downsampling exponent (paper uses 4 at 224)
  int d_enc = 64;        // encoder output width
  int d_t = 128;         // transformer width
  int d_ff = 256;        // transformer feed-forward width
  int n_layers = 2;
  int n_heads = 4;
  int c = 16;            // scale channels
  Variant variant = Variant::full;
  AttnScaleMode attn_scale = AttnScaleMode::inv_sqrt_d;
  bool use_pos_embed = true;

  int grid_side() const { return input_size >> k; }

  void validate() const {
    if (input_size < 8 || (input_size % (1 << k)) != 0)
      throw BadDim("model: input_size must be divisible by 2^k");
    if (d_t % n_heads != 0)
      throw BadDim("model: d_t must be divisible by n_heads");
    if (d_t % 4 != 0) throw BadDim("model: d_t must be divisible by 4");
    if (k < 1 || c < 1 || d_enc < 1 || n_layers < 0 || n_heads < 1)
      throw BadDim("model: bad hyperparameter");
  }
};

// The dense placement network: background encoder keeps local features, the
// object encoder keeps one global feature, a transformer correlates them,
// and a convolutional upsampling decoder emits the (h, w, c) heatmap.
// The local_concat / global_only variants and the box-regression head are
// the ablation baselines.
template <typename T>
class PlacementNetT {
 public:
  struct EncStage {
    nn::Conv2dT<T> conv;
    nn::GeluT<T> act;
  };
  struct DecBlock {
    nn::Conv2dT<T> conv;
    nn::GeluT<T> act;
    nn::UpsampleNearest2xT<T> up;
  };

  PlacementNetT(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng::derive(seed, 0x6d6f64656cull);
    int g = cfg_.grid_side();

    auto build_encoder = [&](std::vector<EncStage>& stages,
                             const std::string& name) {
      int in_c = 3;
      for (int i = 0; i < cfg_.k; ++i) {
        int out_c = std::max(1, cfg_.d_enc >> (cfg_.k - 1 - i));
        EncStage s;
        s.conv.init(in_c, out_c, 3, 2, name + "." + std::to_string(i), rng);
        stages.push_back(std::move(s));
        in_c = out_c;
      }
    };
    build_encoder(bg_enc_, "bg_enc");
    build_encoder(obj_enc_, "obj_enc");

    proj_bg_.init(cfg_.d_enc, cfg_.d_t, 1, 1, "proj_bg", rng);
    proj_obj_.init(cfg_.d_enc, cfg_.d_t, "proj_obj", rng);
    nn::AttnScale mode = cfg_.attn_scale == AttnScaleMode::inv_sqrt_d
                             ? nn::AttnScale::inv_sqrt_d
                             : nn::AttnScale::inv_d;
    layers_.resize(std::size_t(cfg_.n_layers));
    for (int i = 0; i < cfg_.n_layers; ++i)
      layers_[std::size_t(i)].init(cfg_.d_t, cfg_.d_ff, cfg_.n_heads, mode,
                                   "block." + std::to_string(i), rng);
    fuse_local_.init(2 * cfg_.d_enc, cfg_.d_t, 1, 1, "fuse_local", rng);
    fuse_global_.init(2 * cfg_.d_enc, cfg_.d_t, "fuse_global", rng);

    int in_c = cfg_.d_t;
    for (int j = 0; j < cfg_.k; ++j) {
      int out_c = std::max(1, cfg_.d_t >> (j + 1));
      DecBlock b;
      b.conv.init(in_c, out_c, 3, 1, "dec." + std::to_string(j), rng);
      dec_.push_back(std::move(b));
      in_c = out_c;
    }
    dec_out_.init(in_c, cfg_.c, 3, 1, "dec_out", rng);

    reg_fc1_.init(2 * cfg_.d_enc, cfg_.d_t, "reg.fc1", rng);
    reg_fc2_.init(cfg_.d_t, 4, "reg.fc2", rng);

    if (cfg_.d_t % 4 == 0) pos_ = nn::pos_embed_2d<T>(g, g, cfg_.d_t);

    collect_params();
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParamRefs<T>& parameters() { return params_; }
  std::int64_t forward_count() const { return forward_count_; }

  // ---- encoders -----------------------------------------------------------

  TensorT<T> encode_background(const TensorT<T>& img) {
    if (img.ndim() != 3 || img.dim(0) != cfg_.input_size ||
        img.dim(1) != cfg_.input_size || img.dim(2) != 3)
      throw BadInputSize("encode_background: unexpected image size");
    TensorT<T> x = img;
    for (auto& s : bg_enc_) x = s.act.forward(s.conv.forward(x));
    return x;  // (g, g, d_enc)
  }

  TensorT<T> backward_background(const TensorT<T>& gfeat) {
    TensorT<T> g = gfeat;
    for (auto it = bg_enc_.rbegin(); it != bg_enc_.rend(); ++it)
      g = it->conv.backward(it->act.backward(g));
    return g;
  }

  // Tensor-level object encoder (expects a preprocessed square image).
  TensorT<T> encode_object_tensor(const TensorT<T>& img) {
    if (img.ndim() != 3 || img.dim(0) != cfg_.input_size ||
        img.dim(1) != cfg_.input_size || img.dim(2) != 3)
      throw BadInputSize("encode_object: unexpected image size");
    TensorT<T> x = img;
    for (auto& s : obj_enc_) x = s.act.forward(s.conv.forward(x));
    obj_feat_hw_ = x.dim(0);
    return nn::global_avg_pool(x);  // (d_enc)
  }

  TensorT<T> backward_object(const TensorT<T>& gvec) {
    TensorT<T> g =
        nn::global_avg_pool_backward(gvec, obj_feat_hw_, obj_feat_hw_);
    for (auto it = obj_enc_.rbegin(); it != obj_enc_.rend(); ++it)
      g = it->conv.backward(it->act.backward(g));
    return g;
  }

  // White-pad to square, then resize to the model input size.
  static ImageRGB preprocess_object(const ImageRGB& obj, int input_size) {
    if (obj.w < 1 || obj.h < 1) throw EmptyImage("object image is empty");
    return resize_nearest(pad_to_square_white(obj), input_size, input_size);
  }

  TensorT<T> encode_object(const ImageRGB& obj) {
    return encode_object_tensor(
        image_to_tensor<T>(preprocess_object(obj, cfg_.input_size)));
  }

  // ---- correlation --------------------------------------------------------

  // bg grid (g,g,d_enc) + object vector (d_enc) -> patch tokens (g*g, d_t).
  TensorT<T> correlate(const TensorT<T>& bgfeat, const TensorT<T>& objvec) {
    int g = cfg_.grid_side();
    if (bgfeat.dim(0) != g || bgfeat.dim(1) != g || bgfeat.dim(2) != cfg_.d_enc)
      throw DimMismatch("correlate: background feature shape mismatch");
    if (objvec.dim(0) != cfg_.d_enc)
      throw DimMismatch("correlate: object feature shape mismatch");
    int n = g * g;
    TensorT<T> tok3 = proj_bg_.forward(bgfeat);         // (g,g,d_t)
    TensorT<T> tokens = tok3.reshaped({n, cfg_.d_t});
    if (cfg_.use_pos_embed) tokens = nn::add(tokens, pos_);
    TensorT<T> objrow = objvec.reshaped({1, cfg_.d_enc});
    TensorT<T> obj_tok = proj_obj_.forward(objrow);     // (1, d_t)
    TensorT<T> seq({n + 1, cfg_.d_t});
    for (int j = 0; j < cfg_.d_t; ++j) seq(0, j) = obj_tok(0, j);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < cfg_.d_t; ++j) seq(i + 1, j) = tokens(i, j);
    for (auto& l : layers_) seq = l.forward(seq);
    TensorT<T> patch({n, cfg_.d_t});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < cfg_.d_t; ++j) patch(i, j) = seq(i + 1, j);
    return patch;
  }

  // Returns (g_bgfeat, g_objvec) through the correlation module.
  std::pair<TensorT<T>, TensorT<T>> backward_correlate(
      const TensorT<T>& gpatch) {
    int g = cfg_.grid_side();
    int n = g * g;
    TensorT<T> gseq({n + 1, cfg_.d_t});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < cfg_.d_t; ++j) gseq(i + 1, j) = gpatch(i, j);
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      gseq = it->backward(gseq);
    TensorT<T> gobj_tok({1, cfg_.d_t});
    for (int j = 0; j < cfg_.d_t; ++j) gobj_tok(0, j) = gseq(0, j);
    TensorT<T> gtokens({n, cfg_.d_t});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < cfg_.d_t; ++j) gtokens(i, j) = gseq(i + 1, j);
    TensorT<T> gobjvec = proj_obj_.backward(gobj_tok).reshaped({cfg_.d_enc});
    TensorT<T> gbg = proj_bg_.backward(gtokens.reshaped({g, g, cfg_.d_t}));
    return {std::move(gbg), std::move(gobjvec)};
  }

  // ---- decoder ------------------------------------------------------------

  TensorT<T> decode(const TensorT<T>& grid) {
    int g = cfg_.grid_side();
    if (grid.dim(0) != g || grid.dim(1) != g || grid.dim(2) != cfg_.d_t)
      throw DimMismatch("decode: grid shape mismatch");
    TensorT<T> x = grid;
    for (auto& b : dec_) x = b.up.forward(b.act.forward(b.conv.forward(x)));
    return dec_out_.forward(x);  // (S, S, c), linear output
  }

  TensorT<T> backward_decode(const TensorT<T>& gheat) {
    TensorT<T> g = dec_out_.backward(gheat);
    for (auto it = dec_.rbegin(); it != dec_.rend(); ++it)
      g = it->conv.backward(it->act.backward(it->up.backward(g)));
    return g;
  }

  // ---- full forward/backward ----------------------------------------------

  TensorT<T> forward(const TensorT<T>& bg_img, const TensorT<T>& obj_img) {
    ++forward_count_;
    int g = cfg_.grid_side();
    TensorT<T> bgfeat = encode_background(bg_img);
    TensorT<T> objvec = encode_object_tensor(obj_img);
    TensorT<T> grid;
    switch (cfg_.variant) {
      case Variant::full: {
        TensorT<T> patch = correlate(bgfeat, objvec);
        grid = patch.reshaped({g, g, cfg_.d_t});
        break;
      }
      case Variant::local_concat: {
        // Object vector broadcast onto every cell, fused by a 1x1 conv.
        TensorT<T> cat({g, g, 2 * cfg_.d_enc});
        for (int y = 0; y < g; ++y)
          for (int x = 0; x < g; ++x) {
            T* row = &cat(y, x, 0);
            const T* b = &bgfeat(y, x, 0);
            for (int j = 0; j < cfg_.d_enc; ++j) row[j] = b[j];
            for (int j = 0; j < cfg_.d_enc; ++j)
              row[cfg_.d_enc + j] = objvec(j);
          }
        grid = fuse_local_.forward(cat);
        break;
      }
      case Variant::global_only: {
        bg_feat_hw_ = bgfeat.dim(0);
        TensorT<T> bgvec = nn::global_avg_pool(bgfeat);
        TensorT<T> cat = nn::concat_lastdim(bgvec.reshaped({1, cfg_.d_enc}),
                                            objvec.reshaped({1, cfg_.d_enc}));
        TensorT<T> fused = fuse_global_.forward(cat);  // (1, d_t)
        grid = TensorT<T>({g, g, cfg_.d_t});
        for (int i = 0; i < g * g; ++i)
          for (int j = 0; j < cfg_.d_t; ++j)
            grid.data[std::size_t(i) * cfg_.d_t + j] = fused(0, j);
        break;
      }
    }
    return decode(grid);
  }

  void backward(const TensorT<T>& grad_heatmap) {
    int g = cfg_.grid_side();
    TensorT<T> ggrid = backward_decode(grad_heatmap);
    TensorT<T> gbgfeat, gobjvec;
    switch (cfg_.variant) {
      case Variant::full: {
        auto [gb, go] = backward_correlate(ggrid.reshaped({g * g, cfg_.d_t}));
        gbgfeat = std::move(gb);
        gobjvec = std::move(go);
        break;
      }
      case Variant::local_concat: {
        TensorT<T> gcat = fuse_local_.backward(ggrid);
        gbgfeat = TensorT<T>({g, g, cfg_.d_enc});
        gobjvec = TensorT<T>({cfg_.d_enc});
        for (int y = 0; y < g; ++y)
          for (int x = 0; x < g; ++x) {
            const T* row = &gcat(y, x, 0);
            T* b = &gbgfeat(y, x, 0);
            for (int j = 0; j < cfg_.d_enc; ++j) b[j] += row[j];
            for (int j = 0; j < cfg_.d_enc; ++j)
              gobjvec(j) += row[cfg_.d_enc + j];
          }
        break;
      }
      case Variant::global_only: {
        TensorT<T> gfused({1, cfg_.d_t});
        for (int i = 0; i < g * g; ++i)
          for (int j = 0; j < cfg_.d_t; ++j)
            gfused(0, j) += ggrid.data[std::size_t(i) * cfg_.d_t + j];
        TensorT<T> gcat = fuse_global_.backward(gfused);
        TensorT<T> gbgvec({cfg_.d_enc}), gov({cfg_.d_enc});
        for (int j = 0; j < cfg_.d_enc; ++j) {
          gbgvec(j) = gcat(0, j);
          gov(j) = gcat(0, cfg_.d_enc + j);
        }
        gbgfeat = nn::global_avg_pool_backward(gbgvec, bg_feat_hw_,
                                               bg_feat_hw_);
        gobjvec = std::move(gov);
        break;
      }
    }
    backward_background(gbgfeat);
    backward_object(gobjvec);
  }

  // ---- regression baseline -------------------------------------------------

  // Raw 4 outputs before the sigmoid; interpreted as
  // (center_x/w, center_y/h, scale, reserved) after sigmoid.
  TensorT<T> regression_raw(const TensorT<T>& bg_img,
                            const TensorT<T>& obj_img) {
    TensorT<T> bgfeat = encode_background(bg_img);
    bg_feat_hw_ = bgfeat.dim(0);
    TensorT<T> bgvec = nn::global_avg_pool(bgfeat);
    TensorT<T> objvec = encode_object_tensor(obj_img);
    TensorT<T> cat = nn::concat_lastdim(bgvec.reshaped({1, cfg_.d_enc}),
                                        objvec.reshaped({1, cfg_.d_enc}));
    return reg_fc2_.forward(reg_act_.forward(reg_fc1_.forward(cat)));
  }

  void regression_backward(const TensorT<T>& grad_raw) {
    TensorT<T> gcat =
        reg_fc1_.backward(reg_act_.backward(reg_fc2_.backward(grad_raw)));
    TensorT<T> gbgvec({cfg_.d_enc}), gobjvec({cfg_.d_enc});
    for (int j = 0; j < cfg_.d_enc; ++j) {
      gbgvec(j) = gcat(0, j);
      gobjvec(j) = gcat(0, cfg_.d_enc + j);
    }
    backward_background(
        nn::global_avg_pool_backward(gbgvec, bg_feat_hw_, bg_feat_hw_));
    backward_object(gobjvec);
  }

  PlacementBox regression_box(const TensorT<T>& bg_img,
                              const TensorT<T>& obj_img, double aspect,
                              ImageDims dims) {
    TensorT<T> raw = regression_raw(bg_img, obj_img);
    auto sig = [](T v) { return 1.0 / (1.0 + std::exp(-double(v))); };
    double cx = sig(raw(0, 0)) * dims.w;
    double cy = sig(raw(0, 1)) * dims.h;
    double s = sig(raw(0, 2));
    return box_from_center_scale(cx, cy, s, aspect, dims);
  }

  // ---- attention inspection -------------------------------------------------

  // Softmax row of the object-token query against the background patch keys
  // from the most recent full-variant forward; the object token's own slot
  // is dropped and the row renormalized.
  Map2D attention_map(int layer, int head) const {
    if (layer < 0 || layer >= cfg_.n_layers)
      throw IndexOutOfRange("attention_map: layer out of range");
    if (head < 0 || head >= cfg_.n_heads)
      throw IndexOutOfRange("attention_map: head out of range");
    const auto& probs = layers_[std::size_t(layer)].attn.probs_;
    if (probs.numel() == 0)
      throw Error("attention_map: run a full-variant forward first");
    int g = cfg_.grid_side();
    int n = g * g;
    Map2D m;
    m.w = g;
    m.h = g;
    m.data.resize(std::size_t(n));
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += double(probs(head, 0, i + 1));
    if (sum <= 0) throw Error("attention_map: degenerate attention row");
    for (int i = 0; i < n; ++i)
      m.data[std::size_t(i)] = float(double(probs(head, 0, i + 1)) / sum);
    return m;
  }

  Map2D attention_map(const TensorT<T>& bg_img, const TensorT<T>& obj_img,
                      int layer, int head) {
    if (cfg_.variant != Variant::full)
      throw Error("attention_map: model has no transformer");
    forward(bg_img, obj_img);
    return attention_map(layer, head);
  }

  std::vector<EncStage> bg_enc_, obj_enc_;
  nn::Conv2dT<T> proj_bg_;
  nn::LinearT<T> proj_obj_;
  std::vector<nn::TransformerLayerT<T>> layers_;
  nn::Conv2dT<T> fuse_local_;
  nn::LinearT<T> fuse_global_;
  std::vector<DecBlock> dec_;
  nn::Conv2dT<T> dec_out_;
  nn::LinearT<T> reg_fc1_, reg_fc2_;
  nn::GeluT<T> reg_act_;
  TensorT<T> pos_;

 private:
  void collect_params() {
    params_.clear();
    for (auto& s : bg_enc_) s.conv.params(params_);
    for (auto& s : obj_enc_) s.conv.params(params_);
    proj_bg_.params(params_);
    proj_obj_.params(params_);
    for (auto& l : layers_) l.params(params_);
    fuse_local_.params(params_);
    fuse_global_.params(params_);
    for (auto& b : dec_) b.conv.params(params_);
    dec_out_.params(params_);
    reg_fc1_.params(params_);
    reg_fc2_.params(params_);
  }

  ModelConfig cfg_;
  nn::ParamRefs<T> params_;
  std::int64_t forward_count_ = 0;
  int obj_feat_hw_ = 0;
  int bg_feat_hw_ = 0;
};

using PlacementNet = PlacementNetT<float>;

// Heatmap wrapper around a float forward pass.
inline Heatmap3D heatmap_from_tensor(const Tensor& t, const ScaleGrid& grid) {
  Heatmap3D h(ImageDims{t.dim(1), t.dim(0)}, grid);
  h.data = t.data;
  return h;
}

}  // namespace placekit
