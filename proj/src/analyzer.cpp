#include "advlab/analyzer.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace advlab::analyzer {

using arch::ModelSpec;
using arch::conv_out_extent;
using arch::conv_pad;

std::int64_t count_params(const ModelSpec& spec) {
  std::int64_t total = 0;
  arch::visit_params(spec, [&](const std::string&, const Shape& s) {
    total += numel(s);
  });
  return total;
}

namespace {

// parameter scalars under a name prefix; one visit_params walk per report is
// plenty cheap, so no caching
std::int64_t params_under(const ModelSpec& spec, const std::string& prefix) {
  std::int64_t total = 0;
  arch::visit_params(spec, [&](const std::string& n, const Shape& s) {
    if (n.rfind(prefix, 0) == 0) total += numel(s);
  });
  return total;
}

std::int64_t conv_macs(std::int64_t k, std::int64_t cin, std::int64_t cout,
                       std::int64_t out_extent, std::int64_t groups = 1) {
  return k * k * (cin / groups) * cout * out_extent * out_extent;
}

void stem_rows(const ModelSpec& spec, std::int64_t res, CostReport& rep) {
  std::int64_t n = res, cin = 3;
  for (std::size_t i = 0; i < spec.stem.layers.size(); ++i) {
    const auto& l = spec.stem.layers[i];
    n = conv_out_extent(n, l.kernel, l.stride);
    std::string conv = "stem.conv" + std::to_string(i);
    rep.rows.push_back({conv, {l.out_channels, n, n},
                        params_under(spec, conv + "."),
                        conv_macs(l.kernel, cin, l.out_channels, n)});
    if (l.has_norm) {
      std::string norm = "stem.norm" + std::to_string(i);
      rep.rows.push_back(
          {norm, {l.out_channels, n, n}, params_under(spec, norm + "."), 0});
    }
    cin = l.out_channels;
  }
  if (spec.stem.final_pointwise > 0)
    rep.rows.push_back({"stem.pointwise",
                        {spec.stem.final_pointwise, n, n},
                        params_under(spec, "stem.pointwise."),
                        conv_macs(1, cin, spec.stem.final_pointwise, n)});
}

// 7x7 depthwise + two 1x1s (as linears), norms free
CostRow conv_block_row(const ModelSpec& spec, const std::string& name,
                       std::int64_t C, std::int64_t extent) {
  std::int64_t macs = conv_macs(7, C, C, extent, C) +
                      2 * conv_macs(1, C, 4 * C, extent);
  return {name, {C, extent, extent}, params_under(spec, name + "."), macs};
}

void tail_rows(const ModelSpec& spec, std::int64_t width,
               std::vector<std::int64_t> summary_shape, CostReport& rep) {
  rep.rows.push_back({"final.norm", summary_shape,
                      params_under(spec, "final.norm."), 0});
  rep.rows.push_back({"head",
                      {spec.num_classes},
                      params_under(spec, "head."),
                      width * spec.num_classes});
}

void convnext_rows(const ModelSpec& spec, std::int64_t res, CostReport& rep) {
  std::int64_t total =
      spec.stem.total_stride() * spec.first_downsample_stride * 4;
  if (res % total != 0)
    throw TensorError("analyze: resolution " + std::to_string(res) +
                      " not divisible by total stride " + std::to_string(total));
  stem_rows(spec, res, rep);
  std::int64_t n = arch::stem_output_extent(spec.stem, res);
  for (std::size_t s = 0; s < spec.stage_depths.size(); ++s) {
    if (s > 0) {
      std::int64_t stride = s == 1 ? spec.first_downsample_stride : 2;
      std::int64_t prev = spec.stage_widths[s - 1], w = spec.stage_widths[s];
      n = conv_out_extent(n, 2, stride);
      std::string d = "down" + std::to_string(s);
      rep.rows.push_back(
          {d, {w, n, n}, params_under(spec, d + "."), conv_macs(2, prev, w, n)});
    }
    for (std::int64_t b = 0; b < spec.stage_depths[s]; ++b) {
      std::string name =
          "stage" + std::to_string(s) + ".block" + std::to_string(b);
      rep.rows.push_back(conv_block_row(spec, name, spec.stage_widths[s], n));
    }
  }
  tail_rows(spec, spec.stage_widths.back(), {spec.stage_widths.back()}, rep);
}

void vit_rows(const ModelSpec& spec, std::int64_t res, CostReport& rep) {
  if (res % spec.stem.total_stride() != 0)
    throw TensorError("analyze: resolution " + std::to_string(res) +
                      " not divisible by stem stride " +
                      std::to_string(spec.stem.total_stride()));
  stem_rows(spec, res, rep);
  const std::int64_t D = spec.stage_widths[0];
  const std::int64_t L = arch::token_count(spec, res);
  if (spec.class_token)
    rep.rows.push_back({"cls_token", {1, D}, params_under(spec, "cls_token"), 0});
  if (spec.pos_embed)
    rep.rows.push_back(
        {"pos_embed", {L, D}, params_under(spec, "pos_embed"), 0});
  for (std::int64_t b = 0; b < spec.stage_depths[0]; ++b) {
    std::string p = "block" + std::to_string(b);
    // q/k/v/out projections + the two token-mixing matmuls + 4x MLP
    std::int64_t attn = 4 * L * D * D + 2 * L * L * D;
    std::int64_t mlp = 8 * L * D * D;
    rep.rows.push_back({p, {L, D}, params_under(spec, p + "."), attn + mlp});
  }
  tail_rows(spec, D, {L, D}, rep);
}

void isotropic_rows(const ModelSpec& spec, std::int64_t res, CostReport& rep) {
  if (res % spec.stem.total_stride() != 0)
    throw TensorError("analyze: resolution " + std::to_string(res) +
                      " not divisible by stem stride " +
                      std::to_string(spec.stem.total_stride()));
  stem_rows(spec, res, rep);
  std::int64_t n = arch::stem_output_extent(spec.stem, res);
  for (std::int64_t b = 0; b < spec.stage_depths[0]; ++b)
    rep.rows.push_back(conv_block_row(spec, "block" + std::to_string(b),
                                      spec.stage_widths[0], n));
  tail_rows(spec, spec.stage_widths[0], {spec.stage_widths[0]}, rep);
}

}  // namespace

CostReport analyze(const ModelSpec& spec, std::int64_t resolution,
                   std::string name) {
  spec.validate();
  CostReport rep;
  rep.model = std::move(name);
  rep.resolution = resolution;
  if (spec.is_convnext())
    convnext_rows(spec, resolution, rep);
  else if (spec.is_vit())
    vit_rows(spec, resolution, rep);
  else
    isotropic_rows(spec, resolution, rep);
  for (const auto& r : rep.rows) {
    rep.total_params += r.params;
    rep.total_macs += r.macs;
  }
  return rep;
}

std::int64_t count_macs(const ModelSpec& spec, std::int64_t resolution) {
  return analyze(spec, resolution).total_macs;
}

std::vector<CostReport> cost_table(const std::vector<std::string>& presets,
                                   std::int64_t resolution) {
  std::vector<CostReport> out;
  for (const auto& name : presets)
    out.push_back(analyze(arch::preset_spec(name), resolution, name));
  return out;
}

std::vector<std::string> fullsize_presets() {
  std::vector<std::string> out;
  for (const char* base : {"convnext-t", "convnext-s", "convnext-b", "vit-s",
                           "vit-m", "vit-b", "isotropic-convnext-s"}) {
    out.push_back(base);
    out.push_back(std::string(base) + "+convstem");
  }
  return out;
}

namespace {

// pair each "x+convstem" row with the "x" row earlier in the list
const CostReport* base_of(const std::vector<CostReport>& reports,
                          const CostReport& rep) {
  const std::string suffix = "+convstem";
  if (rep.model.size() <= suffix.size() ||
      rep.model.compare(rep.model.size() - suffix.size(), suffix.size(),
                        suffix) != 0)
    return nullptr;
  std::string base = rep.model.substr(0, rep.model.size() - suffix.size());
  for (const auto& r : reports)
    if (r.model == base) return &r;
  return nullptr;
}

std::string pct(std::int64_t now, std::int64_t base) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%",
                100.0 * (static_cast<double>(now) - static_cast<double>(base)) /
                    static_cast<double>(base));
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_csv(const std::vector<CostReport>& reports) {
  std::ostringstream os;
  os << "name,params,macs,params_delta_pct,macs_delta_pct\n";
  for (const auto& r : reports) {
    const CostReport* base = base_of(reports, r);
    os << r.model << "," << r.total_params << "," << r.total_macs << ",";
    if (base) os << pct(r.total_params, base->total_params);
    os << ",";
    if (base) os << pct(r.total_macs, base->total_macs);
    os << "\n";
  }
  return os.str();
}

std::string render_text(const std::vector<CostReport>& reports) {
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"model", "params (M)", "macs (G)", "dparams", "dmacs"});
  for (const auto& r : reports) {
    const CostReport* base = base_of(reports, r);
    cells.push_back({r.model, fixed(r.total_params / 1e6),
                     fixed(r.total_macs / 1e9),
                     base ? pct(r.total_params, base->total_params) : "",
                     base ? pct(r.total_macs, base->total_macs) : ""});
  }
  std::array<std::size_t, 5> width{};
  for (const auto& row : cells)
    for (std::size_t c = 0; c < 5; ++c)
      width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 5; ++c) {
      if (c) os << "  ";
      os << row[c] << std::string(width[c] - row[c].size(), ' ');
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace advlab::analyzer
