#include "advlab/arch.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace advlab::arch {

void ModelSpec::validate() const {
  if (!is_convnext() && !is_vit() && !is_isotropic())
    throw TensorError("spec: unknown family '" + family + "'");
  if (stage_depths.size() != stage_widths.size())
    throw TensorError("spec: " + std::to_string(stage_depths.size()) +
                      " stage depths vs " + std::to_string(stage_widths.size()) +
                      " widths");
  if (is_convnext() && stage_depths.size() != 4)
    throw TensorError("spec: convnext needs 4 stages, got " +
                      std::to_string(stage_depths.size()));
  if (!is_convnext() && stage_depths.size() != 1)
    throw TensorError("spec: isotropic families need exactly 1 stage");
  for (auto d : stage_depths)
    if (d < 1) throw TensorError("spec: stage depth must be >= 1");
  for (auto w : stage_widths)
    if (w < 1) throw TensorError("spec: stage width must be >= 1");
  if (is_vit()) {
    if (heads < 1) throw TensorError("spec: vit needs heads >= 1");
    if (stage_widths[0] % heads != 0)
      throw TensorError("spec: width " + std::to_string(stage_widths[0]) +
                        " not divisible by heads " + std::to_string(heads));
  }
  if (stem.layers.empty()) throw TensorError("spec: stem has no layers");
  for (const auto& l : stem.layers)
    if (l.kernel < 1 || l.stride < 1 || l.out_channels < 1)
      throw TensorError("spec: stem layer with non-positive kernel/stride/channels");
  if (stem.out_channels() != stage_widths[0])
    throw TensorError("spec: stem produces " + std::to_string(stem.out_channels()) +
                      " channels but trunk expects " +
                      std::to_string(stage_widths[0]));
  if (num_classes < 2) throw TensorError("spec: need at least 2 classes");
  if (input_resolution < stem.total_stride())
    throw TensorError("spec: resolution below stem stride");
  if (input_resolution % stem.total_stride() != 0)
    throw TensorError("spec: resolution " + std::to_string(input_resolution) +
                      " not divisible by stem stride " +
                      std::to_string(stem.total_stride()));
}

std::int64_t stem_output_extent(const StemSpec& stem, std::int64_t resolution) {
  std::int64_t n = resolution;
  for (const auto& l : stem.layers) n = conv_out_extent(n, l.kernel, l.stride);
  return n;  // trailing 1x1 projection keeps the extent
}

std::int64_t token_count(const ModelSpec& spec, std::int64_t resolution) {
  std::int64_t g = stem_output_extent(spec.stem, resolution);
  return g * g + (spec.class_token ? 1 : 0);
}

namespace {

StemSpec patch_stem(std::int64_t patch, std::int64_t width, bool norm_after) {
  StemSpec s;
  s.kind = StemSpec::Kind::Patch;
  s.layers = {{patch, patch, width, norm_after, false}};
  return s;
}

// two 3x3 stride-2 convs, each LN + GELU (four for transformer stems), per
// the channel plans the size table pins down
StemSpec conv_stem(std::vector<std::int64_t> channels,
                   std::vector<std::int64_t> strides,
                   std::int64_t final_pointwise) {
  StemSpec s;
  s.kind = StemSpec::Kind::Conv;
  for (std::size_t i = 0; i < channels.size(); ++i)
    s.layers.push_back({3, strides[i], channels[i], true, true});
  s.final_pointwise = final_pointwise;
  return s;
}

ModelSpec convnext(std::vector<std::int64_t> depths, std::vector<std::int64_t> widths,
                   StemSpec stem, std::int64_t res, std::int64_t classes) {
  ModelSpec m;
  m.family = "convnext";
  m.stage_depths = std::move(depths);
  m.stage_widths = std::move(widths);
  m.stem = std::move(stem);
  m.input_resolution = res;
  m.num_classes = classes;
  m.layer_scale_init = 1e-6;
  return m;
}

ModelSpec vit(std::int64_t depth, std::int64_t width, std::int64_t heads,
              StemSpec stem, std::int64_t res, std::int64_t classes,
              double layer_scale, bool pos_cls_row) {
  ModelSpec m;
  m.family = "vit";
  m.stage_depths = {depth};
  m.stage_widths = {width};
  m.heads = heads;
  m.stem = std::move(stem);
  m.input_resolution = res;
  m.num_classes = classes;
  m.layer_scale_init = layer_scale;
  m.class_token = true;
  m.pos_embed = true;
  m.pos_embed_cls = pos_cls_row;
  return m;
}

ModelSpec isotropic(std::int64_t depth, std::int64_t width, StemSpec stem,
                    std::int64_t res, std::int64_t classes) {
  ModelSpec m;
  m.family = "isotropic-convnext";
  m.stage_depths = {depth};
  m.stage_widths = {width};
  m.stem = std::move(stem);
  m.input_resolution = res;
  m.num_classes = classes;
  m.layer_scale_init = 0.0;
  return m;
}

std::map<std::string, ModelSpec> make_registry() {
  std::map<std::string, ModelSpec> r;

  // ConvNeXt: patch stem is a 4x4/4 conv + LN; conv stem is 3x3/2 stacks
  r["convnext-t"] = convnext({3, 3, 9, 3}, {96, 192, 384, 768},
                             patch_stem(4, 96, true), 224, 1000);
  r["convnext-t+convstem"] = convnext({3, 3, 9, 3}, {96, 192, 384, 768},
                                      conv_stem({48, 96}, {2, 2}, 0), 224, 1000);
  r["convnext-s"] = convnext({3, 3, 27, 3}, {96, 192, 384, 768},
                             patch_stem(4, 96, true), 224, 1000);
  r["convnext-s+convstem"] = convnext({3, 3, 27, 3}, {96, 192, 384, 768},
                                      conv_stem({48, 96}, {2, 2}, 0), 224, 1000);
  r["convnext-b"] = convnext({3, 3, 27, 3}, {128, 256, 512, 1024},
                             patch_stem(4, 128, true), 224, 1000);
  // N, 1.5N stride 2 then 2N stride 1, N = 64
  r["convnext-b+convstem"] =
      convnext({3, 3, 27, 3}, {128, 256, 512, 1024},
               conv_stem({64, 96, 128}, {2, 2, 1}, 0), 224, 1000);

  // ViT: S and B follow the classic convention (positional table carries a
  // class row, no channel scales); M follows the modern recipe (grid-only
  // table, channel scales at 1e-4)
  r["vit-s"] = vit(12, 384, 6, patch_stem(16, 384, false), 224, 1000, 0.0, true);
  r["vit-s+convstem"] =
      vit(12, 384, 6, conv_stem({48, 96, 192, 384}, {2, 2, 2, 2}, 384), 224, 1000,
          0.0, true);
  r["vit-m"] = vit(12, 512, 8, patch_stem(16, 512, false), 224, 1000, 1e-4, false);
  r["vit-m+convstem"] =
      vit(12, 512, 8, conv_stem({48, 96, 192, 384}, {2, 2, 2, 2}, 512), 224, 1000,
          1e-4, false);
  r["vit-b"] = vit(12, 768, 12, patch_stem(16, 768, false), 224, 1000, 0.0, true);
  r["vit-b+convstem"] =
      vit(12, 768, 12, conv_stem({48, 96, 192, 384}, {2, 2, 2, 2}, 768), 224, 1000,
          0.0, true);

  r["isotropic-convnext-s"] =
      isotropic(18, 384, patch_stem(16, 384, false), 224, 1000);
  r["isotropic-convnext-s+convstem"] =
      isotropic(18, 384, conv_stem({48, 96, 192, 384}, {2, 2, 2, 2}, 384), 224,
                1000);

  // micro presets: same structure, runnable in seconds at 32x32
  r["micro-convnext"] = convnext({1, 1, 2, 1}, {16, 32, 64, 128},
                                 patch_stem(4, 16, true), 32, 10);
  r["micro-convnext+convstem"] = convnext({1, 1, 2, 1}, {16, 32, 64, 128},
                                          conv_stem({8, 16}, {2, 2}, 0), 32, 10);
  r["micro-vit"] = vit(2, 64, 2, patch_stem(8, 64, false), 32, 10, 0.0, true);
  r["micro-vit+convstem"] =
      vit(2, 64, 2, conv_stem({16, 32, 64}, {2, 2, 2}, 64), 32, 10, 0.0, true);

  for (auto& [name, spec] : r) spec.validate();
  return r;
}

const std::map<std::string, ModelSpec>& registry() {
  static const std::map<std::string, ModelSpec> r = make_registry();
  return r;
}

}  // namespace

ModelSpec preset_spec(const std::string& name) {
  const auto& r = registry();
  auto it = r.find(name);
  if (it == r.end()) {
    std::string names;
    for (const auto& [n, _] : r) names += (names.empty() ? "" : ", ") + n;
    throw TensorError("unknown preset '" + name + "'; available: " + names);
  }
  return it->second;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [n, _] : registry()) out.push_back(n);
  return out;
}

// ---------------------------------------------------------------------------
// flat key=value serialization
// ---------------------------------------------------------------------------

namespace {

std::string join_i64(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::int64_t> split_i64(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stoll(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad integer '" + item + "'");
  }
  return out;
}

}  // namespace

std::string spec_to_text(const ModelSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "family=" << spec.family << "\n";
  os << "stage_depths=" << join_i64(spec.stage_depths) << "\n";
  os << "stage_widths=" << join_i64(spec.stage_widths) << "\n";
  os << "heads=" << spec.heads << "\n";
  os << "num_classes=" << spec.num_classes << "\n";
  os << "input_resolution=" << spec.input_resolution << "\n";
  os << "layer_scale_init=" << spec.layer_scale_init << "\n";
  os << "class_token=" << (spec.class_token ? 1 : 0) << "\n";
  os << "pos_embed=" << (spec.pos_embed ? 1 : 0) << "\n";
  os << "pos_embed_cls=" << (spec.pos_embed_cls ? 1 : 0) << "\n";
  os << "first_downsample_stride=" << spec.first_downsample_stride << "\n";
  os << "stem.kind=" << (spec.stem.kind == StemSpec::Kind::Patch ? "patch" : "conv")
     << "\n";
  os << "stem.final_pointwise=" << spec.stem.final_pointwise << "\n";
  for (const auto& l : spec.stem.layers)
    os << "stem.layer=" << l.kernel << "," << l.stride << "," << l.out_channels
       << "," << (l.has_norm ? 1 : 0) << "," << (l.has_act ? 1 : 0) << "\n";
  return os.str();
}

ModelSpec spec_from_text(const std::string& text) {
  ModelSpec spec;
  spec.layer_scale_init = 0.0;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw TensorError("spec text line " + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "family") spec.family = val;
      else if (key == "stage_depths") spec.stage_depths = split_i64(val);
      else if (key == "stage_widths") spec.stage_widths = split_i64(val);
      else if (key == "heads") spec.heads = std::stoll(val);
      else if (key == "num_classes") spec.num_classes = std::stoll(val);
      else if (key == "input_resolution") spec.input_resolution = std::stoll(val);
      else if (key == "layer_scale_init") spec.layer_scale_init = std::stod(val);
      else if (key == "class_token") spec.class_token = std::stoll(val) != 0;
      else if (key == "pos_embed") spec.pos_embed = std::stoll(val) != 0;
      else if (key == "pos_embed_cls") spec.pos_embed_cls = std::stoll(val) != 0;
      else if (key == "first_downsample_stride")
        spec.first_downsample_stride = std::stoll(val);
      else if (key == "stem.kind") {
        if (val != "patch" && val != "conv")
          throw std::invalid_argument("stem.kind must be patch or conv");
        spec.stem.kind = val == "patch" ? StemSpec::Kind::Patch
                                        : StemSpec::Kind::Conv;
      }
      else if (key == "stem.final_pointwise")
        spec.stem.final_pointwise = std::stoll(val);
      else if (key == "stem.layer") {
        auto f = split_i64(val);
        if (f.size() != 5)
          throw std::invalid_argument("stem.layer wants 5 fields");
        spec.stem.layers.push_back({f[0], f[1], f[2], f[3] != 0, f[4] != 0});
      } else {
        throw std::invalid_argument("unknown key");
      }
    } catch (const std::exception& e) {
      throw TensorError("spec text line " + std::to_string(lineno) + " ('" + key +
                        "'): " + e.what());
    }
  }
  spec.validate();
  return spec;
}

}  // namespace advlab::arch
