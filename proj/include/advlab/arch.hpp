#pragma once

// Architecture zoo: ConvNeXt (4-stage), ViT (pre-LN, class token) and
// isotropic ConvNeXt (single-resolution conv blocks on a 16x16-patch grid),
// each buildable with either a patch stem (one big-stride convolution) or a
// convolutional stem (a short stack of small strided convolutions).
//
// A Model is a named flat parameter store plus a forward() that assembles the
// autodiff graph per call.  Parameter names are the serialization keys, so
// they stay stable across stem variants: trunk names are identical between
// "x" and "x+convstem" presets by construction.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"

namespace advlab::arch {

inline constexpr double kNormEps = 1e-6;

struct StemLayer {
  std::int64_t kernel = 0;
  std::int64_t stride = 0;
  std::int64_t out_channels = 0;
  bool has_norm = false;
  bool has_act = false;
};

struct StemSpec {
  enum class Kind { Patch, Conv };
  Kind kind = Kind::Patch;
  std::vector<StemLayer> layers;
  std::int64_t final_pointwise = 0;  // 0 = no trailing 1x1 projection

  std::int64_t total_stride() const {
    std::int64_t s = 1;
    for (const auto& l : layers) s *= l.stride;
    return s;
  }
  std::int64_t out_channels() const {
    if (final_pointwise > 0) return final_pointwise;
    return layers.empty() ? 0 : layers.back().out_channels;
  }
};

struct ModelSpec {
  std::string family;  // convnext | vit | isotropic-convnext
  std::vector<std::int64_t> stage_depths;
  std::vector<std::int64_t> stage_widths;
  std::int64_t heads = 0;
  StemSpec stem;
  std::int64_t num_classes = 1000;
  std::int64_t input_resolution = 224;
  double layer_scale_init = 0.0;  // 0 disables the per-block channel scale
  bool class_token = false;
  bool pos_embed = false;
  bool pos_embed_cls = false;  // table carries a class-token row
  std::int64_t first_downsample_stride = 2;  // convnext only; 1 after low-res adaptation

  void validate() const;
  bool is_convnext() const { return family == "convnext"; }
  bool is_vit() const { return family == "vit"; }
  bool is_isotropic() const { return family == "isotropic-convnext"; }
};

// registry: convnext-t/s/b, vit-s/m/b, isotropic-convnext-s, each with a
// "+convstem" sibling, plus runnable micro presets
ModelSpec preset_spec(const std::string& name);
std::vector<std::string> preset_names();

std::string spec_to_text(const ModelSpec& spec);
ModelSpec spec_from_text(const std::string& text);

// conv output extent under this library's padding rule: patchifying convs
// (kernel == stride) and 1x1s get no padding, everything else kernel/2
inline std::int64_t conv_pad(std::int64_t kernel, std::int64_t stride) {
  return kernel == stride || kernel == 1 ? 0 : kernel / 2;
}
inline std::int64_t conv_out_extent(std::int64_t n, std::int64_t kernel,
                                    std::int64_t stride) {
  return (n + 2 * conv_pad(kernel, stride) - kernel) / stride + 1;
}

// spatial extent after the stem for a given input resolution
std::int64_t stem_output_extent(const StemSpec& stem, std::int64_t resolution);
// tokens entering the transformer trunk (grid^2 + optional class token)
std::int64_t token_count(const ModelSpec& spec, std::int64_t resolution);

// single source of truth for the parameter store layout: yields every
// (name, shape) pair in definition order; Model allocation and the symbolic
// cost analyzer both walk this, so their counts can never diverge
template <typename F>
void visit_params(const ModelSpec& spec, F&& fn) {
  auto conv_block = [&](const std::string& p, std::int64_t C) {
    fn(p + ".dw.weight", Shape{C, 1, 7, 7});
    fn(p + ".dw.bias", Shape{C});
    fn(p + ".norm.gamma", Shape{C});
    fn(p + ".norm.beta", Shape{C});
    fn(p + ".pw1.weight", Shape{4 * C, C});
    fn(p + ".pw1.bias", Shape{4 * C});
    fn(p + ".pw2.weight", Shape{C, 4 * C});
    fn(p + ".pw2.bias", Shape{C});
    if (spec.layer_scale_init > 0.0) fn(p + ".ls", Shape{C});
  };

  std::int64_t in_ch = 3;
  for (std::size_t i = 0; i < spec.stem.layers.size(); ++i) {
    const auto& l = spec.stem.layers[i];
    std::string p = "stem.conv" + std::to_string(i);
    fn(p + ".weight", Shape{l.out_channels, in_ch, l.kernel, l.kernel});
    fn(p + ".bias", Shape{l.out_channels});
    if (l.has_norm) {
      std::string np = "stem.norm" + std::to_string(i);
      fn(np + ".gamma", Shape{l.out_channels});
      fn(np + ".beta", Shape{l.out_channels});
    }
    in_ch = l.out_channels;
  }
  if (spec.stem.final_pointwise > 0) {
    fn("stem.pointwise.weight", Shape{spec.stem.final_pointwise, in_ch, 1, 1});
    fn("stem.pointwise.bias", Shape{spec.stem.final_pointwise});
  }

  if (spec.is_convnext()) {
    for (std::size_t s = 0; s < spec.stage_depths.size(); ++s) {
      const std::int64_t w = spec.stage_widths[s];
      if (s > 0) {
        const std::int64_t prev = spec.stage_widths[s - 1];
        std::string d = "down" + std::to_string(s);
        fn(d + ".norm.gamma", Shape{prev});
        fn(d + ".norm.beta", Shape{prev});
        fn(d + ".conv.weight", Shape{w, prev, 2, 2});
        fn(d + ".conv.bias", Shape{w});
      }
      for (std::int64_t b = 0; b < spec.stage_depths[s]; ++b)
        conv_block("stage" + std::to_string(s) + ".block" + std::to_string(b), w);
    }
    const std::int64_t W = spec.stage_widths.back();
    fn("final.norm.gamma", Shape{W});
    fn("final.norm.beta", Shape{W});
    fn("head.weight", Shape{spec.num_classes, W});
    fn("head.bias", Shape{spec.num_classes});
  } else if (spec.is_vit()) {
    const std::int64_t D = spec.stage_widths[0];
    if (spec.class_token) fn("cls_token", Shape{D});
    if (spec.pos_embed) {
      std::int64_t g = stem_output_extent(spec.stem, spec.input_resolution);
      std::int64_t rows = g * g + (spec.pos_embed_cls ? 1 : 0);
      fn("pos_embed", Shape{rows, D});
    }
    for (std::int64_t b = 0; b < spec.stage_depths[0]; ++b) {
      std::string p = "block" + std::to_string(b);
      fn(p + ".norm1.gamma", Shape{D});
      fn(p + ".norm1.beta", Shape{D});
      for (const char* w : {"wq", "wk", "wv", "wo"})
        fn(p + ".attn." + std::string(w), Shape{D, D});
      for (const char* w : {"bq", "bk", "bv", "bo"})
        fn(p + ".attn." + std::string(w), Shape{D});
      if (spec.layer_scale_init > 0.0) fn(p + ".ls1", Shape{D});
      fn(p + ".norm2.gamma", Shape{D});
      fn(p + ".norm2.beta", Shape{D});
      fn(p + ".mlp.fc1.weight", Shape{4 * D, D});
      fn(p + ".mlp.fc1.bias", Shape{4 * D});
      fn(p + ".mlp.fc2.weight", Shape{D, 4 * D});
      fn(p + ".mlp.fc2.bias", Shape{D});
      if (spec.layer_scale_init > 0.0) fn(p + ".ls2", Shape{D});
    }
    fn("final.norm.gamma", Shape{D});
    fn("final.norm.beta", Shape{D});
    fn("head.weight", Shape{spec.num_classes, D});
    fn("head.bias", Shape{spec.num_classes});
  } else {
    const std::int64_t D = spec.stage_widths[0];
    for (std::int64_t b = 0; b < spec.stage_depths[0]; ++b)
      conv_block("block" + std::to_string(b), D);
    fn("final.norm.gamma", Shape{D});
    fn("final.norm.beta", Shape{D});
    fn("head.weight", Shape{spec.num_classes, D});
    fn("head.bias", Shape{spec.num_classes});
  }
}

template <typename S>
struct Param {
  std::string name;
  Tensor<S> tensor;
};

template <typename S>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    allocate();
  }

  const ModelSpec& spec() const { return spec_; }
  ModelSpec& mutable_spec() { return spec_; }

  std::vector<Param<S>>& params() { return params_; }
  const std::vector<Param<S>>& params() const { return params_; }

  bool has_param(const std::string& name) const { return index_.count(name) > 0; }

  Tensor<S>& param(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw TensorError("model has no parameter named '" + name + "'");
    return params_[it->second].tensor;
  }
  const Tensor<S>& param(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw TensorError("model has no parameter named '" + name + "'");
    return params_[it->second].tensor;
  }

  void set_param(const std::string& name, Tensor<S> t) { param(name) = std::move(t); }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

  void set_requires_grad(bool b) {
    for (auto& p : params_) p.tensor.set_requires_grad(b);
  }
  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  // truncated normal (std 0.02, clipped at 2 sigma) for weight-like tensors,
  // ones for norm gains, zeros for biases/shifts, the configured constant for
  // the per-block channel scales; each tensor gets its own seed stream keyed
  // by name, so initialization is order-independent and reproducible
  void init_params(std::uint64_t seed) {
    for (auto& p : params_) {
      Rng rng(derive_seed(seed, p.name));
      auto& v = p.tensor.mutable_data();
      if (ends_with(p.name, ".ls") || ends_with(p.name, ".ls1") ||
          ends_with(p.name, ".ls2")) {
        for (auto& x : v) x = static_cast<S>(spec_.layer_scale_init);
      } else if (ends_with(p.name, ".gamma")) {
        for (auto& x : v) x = S(1);
      } else if (ends_with(p.name, ".bias") || ends_with(p.name, ".beta")) {
        for (auto& x : v) x = S(0);
      } else {
        for (auto& x : v) x = static_cast<S>(rng.truncated_normal(0.02));
      }
    }
  }

  Tensor<S> forward(const Tensor<S>& images) const {
    const auto& is = images.shape();
    if (is.size() != 4 || is[1] != 3)
      throw TensorError("forward: expected [N,3,H,W] input, got " + shape_str(is));
    if (is[2] != is[3])
      throw TensorError("forward: square input required, got " + shape_str(is));
    const std::int64_t res = is[2];
    if (spec_.is_convnext()) return forward_convnext(images, res);
    if (spec_.is_vit()) return forward_vit(images, res);
    return forward_isotropic(images, res);
  }

 private:
  ModelSpec spec_;
  std::vector<Param<S>> params_;
  std::unordered_map<std::string, std::size_t> index_;

  static bool ends_with(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
  }

  void add_param(const std::string& name, Shape shape) {
    index_[name] = params_.size();
    params_.push_back({name, Tensor<S>::zeros(std::move(shape))});
  }

  void allocate() {
    visit_params(spec_, [this](const std::string& name, Shape shape) {
      add_param(name, std::move(shape));
    });
  }

  // ---- forward pieces ----

  Tensor<S> norm_nchw(const Tensor<S>& x, const std::string& prefix) const {
    auto h = permute(x, {0, 2, 3, 1});
    h = layer_norm(h, param(prefix + ".gamma"), param(prefix + ".beta"), kNormEps);
    return permute(h, {0, 3, 1, 2});
  }

  Tensor<S> run_stem(const Tensor<S>& x) const {
    Tensor<S> cur = x;
    for (std::size_t i = 0; i < spec_.stem.layers.size(); ++i) {
      const auto& l = spec_.stem.layers[i];
      std::string p = "stem.conv" + std::to_string(i);
      cur = conv2d(cur, param(p + ".weight"), &param(p + ".bias"), l.stride,
                   conv_pad(l.kernel, l.stride));
      if (l.has_norm)
        cur = norm_nchw(cur, "stem.norm" + std::to_string(i));
      if (l.has_act) cur = gelu(cur);
    }
    if (spec_.stem.final_pointwise > 0)
      cur = conv2d(cur, param("stem.pointwise.weight"),
                   &param("stem.pointwise.bias"), 1, 0);
    return cur;
  }

  // 7x7 depthwise -> LN -> 1x1 expand 4x -> GELU -> 1x1 reduce -> channel
  // scale -> residual; pointwise convs run as linears in channels-last layout
  Tensor<S> conv_block(const Tensor<S>& x, const std::string& p) const {
    auto y = depthwise_conv2d(x, param(p + ".dw.weight"), &param(p + ".dw.bias"),
                              1, 3);
    y = permute(y, {0, 2, 3, 1});
    y = layer_norm(y, param(p + ".norm.gamma"), param(p + ".norm.beta"), kNormEps);
    y = linear(y, param(p + ".pw1.weight"), &param(p + ".pw1.bias"));
    y = gelu(y);
    y = linear(y, param(p + ".pw2.weight"), &param(p + ".pw2.bias"));
    if (spec_.layer_scale_init > 0.0) y = scale_lastdim(y, param(p + ".ls"));
    y = permute(y, {0, 3, 1, 2});
    return add(x, y);
  }

  Tensor<S> forward_convnext(const Tensor<S>& images, std::int64_t res) const {
    std::int64_t total = spec_.stem.total_stride() * spec_.first_downsample_stride * 4;
    if (res % total != 0)
      throw TensorError("forward: resolution " + std::to_string(res) +
                        " not divisible by total stride " + std::to_string(total));
    auto cur = run_stem(images);
    for (std::size_t s = 0; s < spec_.stage_depths.size(); ++s) {
      if (s > 0) {
        std::string d = "down" + std::to_string(s);
        std::int64_t stride = s == 1 ? spec_.first_downsample_stride : 2;
        cur = norm_nchw(cur, d + ".norm");
        cur = conv2d(cur, param(d + ".conv.weight"), &param(d + ".conv.bias"),
                     stride, 0);
      }
      for (std::int64_t b = 0; b < spec_.stage_depths[s]; ++b)
        cur = conv_block(cur, "stage" + std::to_string(s) + ".block" +
                                  std::to_string(b));
    }
    auto pooled = global_avg_pool_hw(permute(cur, {0, 2, 3, 1}));
    auto normed = layer_norm(pooled, param("final.norm.gamma"),
                             param("final.norm.beta"), kNormEps);
    return linear(normed, param("head.weight"), &param("head.bias"));
  }

  Tensor<S> forward_vit(const Tensor<S>& images, std::int64_t res) const {
    if (res % spec_.stem.total_stride() != 0)
      throw TensorError("forward: resolution " + std::to_string(res) +
                        " not divisible by stem stride " +
                        std::to_string(spec_.stem.total_stride()));
    auto grid = run_stem(images);  // [N, D, G, G]
    const auto& gs = grid.shape();
    const std::int64_t N = gs[0], D = gs[1], G = gs[2];
    auto tokens = reshape(permute(grid, {0, 2, 3, 1}), {N, G * G, D});
    if (spec_.pos_embed) {
      const auto& pe = param("pos_embed");
      std::int64_t want = G * G + (spec_.pos_embed_cls ? 1 : 0);
      if (pe.shape()[0] != want)
        throw TensorError(
            "forward: positional table has " + std::to_string(pe.shape()[0]) +
            " rows but this resolution needs " + std::to_string(want) +
            "; run interpolate_pos_embed first");
      if (!spec_.pos_embed_cls) tokens = add_rows(tokens, pe);
      if (spec_.class_token) tokens = prepend_token(tokens, param("cls_token"));
      if (spec_.pos_embed_cls) tokens = add_rows(tokens, pe);
    } else if (spec_.class_token) {
      tokens = prepend_token(tokens, param("cls_token"));
    }

    const std::int64_t depth = spec_.stage_depths[0];
    for (std::int64_t b = 0; b < depth; ++b) {
      std::string p = "block" + std::to_string(b);
      auto h = layer_norm(tokens, param(p + ".norm1.gamma"),
                          param(p + ".norm1.beta"), kNormEps);
      AttentionWeights<S> w{param(p + ".attn.wq"), param(p + ".attn.wk"),
                            param(p + ".attn.wv"), param(p + ".attn.wo"),
                            param(p + ".attn.bq"), param(p + ".attn.bk"),
                            param(p + ".attn.bv"), param(p + ".attn.bo")};
      h = multihead_attention(h, w, spec_.heads);
      if (spec_.layer_scale_init > 0.0) h = scale_lastdim(h, param(p + ".ls1"));
      tokens = add(tokens, h);
      auto m = layer_norm(tokens, param(p + ".norm2.gamma"),
                          param(p + ".norm2.beta"), kNormEps);
      m = linear(m, param(p + ".mlp.fc1.weight"), &param(p + ".mlp.fc1.bias"));
      m = gelu(m);
      m = linear(m, param(p + ".mlp.fc2.weight"), &param(p + ".mlp.fc2.bias"));
      if (spec_.layer_scale_init > 0.0) m = scale_lastdim(m, param(p + ".ls2"));
      tokens = add(tokens, m);
    }
    tokens = layer_norm(tokens, param("final.norm.gamma"),
                        param("final.norm.beta"), kNormEps);
    Tensor<S> summary;
    if (spec_.class_token) {
      summary = select_token(tokens, 0);
    } else {
      const auto& ts = tokens.shape();
      summary = global_avg_pool_hw(reshape(tokens, {ts[0], ts[1], 1, ts[2]}));
    }
    return linear(summary, param("head.weight"), &param("head.bias"));
  }

  Tensor<S> forward_isotropic(const Tensor<S>& images, std::int64_t res) const {
    if (res % spec_.stem.total_stride() != 0)
      throw TensorError("forward: resolution " + std::to_string(res) +
                        " not divisible by stem stride " +
                        std::to_string(spec_.stem.total_stride()));
    auto cur = run_stem(images);
    for (std::int64_t b = 0; b < spec_.stage_depths[0]; ++b)
      cur = conv_block(cur, "block" + std::to_string(b));
    auto pooled = global_avg_pool_hw(permute(cur, {0, 2, 3, 1}));
    auto normed = layer_norm(pooled, param("final.norm.gamma"),
                             param("final.norm.beta"), kNormEps);
    return linear(normed, param("head.weight"), &param("head.bias"));
  }
};

template <typename S>
Model<S> build(const ModelSpec& spec, std::uint64_t seed) {
  Model<S> m(spec);
  m.init_params(seed);
  return m;
}

// swap in a freshly initialized classifier; trunk untouched
template <typename S>
void replace_head(Model<S>& model, std::int64_t num_classes, std::uint64_t seed) {
  if (num_classes < 2)
    throw TensorError("replace_head: need at least 2 classes");
  const std::int64_t width = model.param("head.weight").shape()[1];
  model.mutable_spec().num_classes = num_classes;
  Rng wr(derive_seed(seed, "head.weight"));
  std::vector<S> w(static_cast<std::size_t>(num_classes * width));
  for (auto& v : w) v = static_cast<S>(wr.truncated_normal(0.02));
  model.set_param("head.weight", Tensor<S>::leaf({num_classes, width}, std::move(w)));
  model.set_param("head.bias", Tensor<S>::zeros({num_classes}));
}

// resample the positional grid to a new token-grid extent via per-channel
// bicubic interpolation; the class-token row (when present) is copied verbatim
template <typename S>
void interpolate_pos_embed(Model<S>& model, std::int64_t new_grid) {
  if (!model.spec().pos_embed)
    throw TensorError("interpolate_pos_embed: model has no positional table");
  if (new_grid < 2) throw TensorError("interpolate_pos_embed: grid must be >= 2");
  const auto& pe = model.param("pos_embed");
  const bool has_cls_row = model.spec().pos_embed_cls;
  const std::int64_t rows = pe.shape()[0], D = pe.shape()[1];
  const std::int64_t grid_rows = rows - (has_cls_row ? 1 : 0);
  const auto g = static_cast<std::int64_t>(std::llround(std::sqrt(
      static_cast<double>(grid_rows))));
  if (g * g != grid_rows)
    throw TensorError("interpolate_pos_embed: table rows " +
                      std::to_string(grid_rows) + " are not a square grid");
  const std::int64_t cls_off = has_cls_row ? 1 : 0;
  // rows are raster order [g, g, D]; resample each channel plane
  std::vector<S> plane(static_cast<std::size_t>(g * g));
  std::vector<S> out(static_cast<std::size_t>((new_grid * new_grid + cls_off) * D));
  const auto& src = pe.data();
  for (std::int64_t d = 0; d < D; ++d) {
    for (std::int64_t i = 0; i < g * g; ++i) plane[i] = src[(i + cls_off) * D + d];
    auto res = bicubic_resize_raw(plane.data(), 1, g, g, new_grid, new_grid);
    for (std::int64_t i = 0; i < new_grid * new_grid; ++i)
      out[(i + cls_off) * D + d] = res[i];
  }
  if (has_cls_row)
    for (std::int64_t d = 0; d < D; ++d) out[d] = src[d];
  model.set_param("pos_embed", Tensor<S>::leaf({new_grid * new_grid + cls_off, D},
                                               std::move(out)));
}

// low-resolution adaptation: every stride-2 stem convolution and the first
// downsampling block run at stride 1, cutting total downsampling by 8x;
// weight shapes are untouched
template <typename S>
void adapt_low_res(Model<S>& model) {
  auto& spec = model.mutable_spec();
  if (!spec.is_convnext() || spec.stem.kind != StemSpec::Kind::Conv)
    throw TensorError(
        "adapt_low_res: only convnext models with a convolutional stem adapt");
  for (auto& l : spec.stem.layers)
    if (l.stride == 2) l.stride = 1;
  spec.first_downsample_stride = 1;
}

}  // namespace advlab::arch
