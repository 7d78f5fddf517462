#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "advlab/analyzer.hpp"
#include "advlab/rng.hpp"

using namespace advlab;
using namespace advlab::analyzer;

namespace {

// frozen structural counts, re-derived by an independent calculation from the
// layer formulas (conv k^2*cin*cout+cout, LN 2c, block tables)
const std::map<std::string, std::int64_t> kParams = {
    {"convnext-t", 28589128},
    {"convnext-t+convstem", 28627432},
    {"convnext-s", 50223688},
    {"convnext-s+convstem", 50261992},
    {"convnext-b", 88591464},
    {"convnext-b+convstem", 88753416},
    {"vit-s", 22050664},
    {"vit-s+convstem", 22777576},
    {"vit-m", 38849512},
    {"vit-m+convstem", 39527272},
    {"vit-b", 86567656},
    {"vit-b+convstem", 87147112},
    {"isotropic-convnext-s", 22308712},
    {"isotropic-convnext-s+convstem", 23035624},
};

const std::map<std::string, std::int64_t> kMacs224 = {
    {"convnext-t", 4455531264},
    {"convnext-t+convstem", 4587393792},
    {"convnext-s", 8683712256},
    {"convnext-s+convstem", 8815574784},
    {"convnext-b", 15354729472},
    {"convnext-b+convstem", 15877362688},
    {"vit-s", 4598882304},
    {"vit-s+convstem", 4976406528},
    {"vit-m", 7990968320},
    {"vit-m+convstem", 8358858752},
    {"vit-b", 17563828224},
    {"vit-b+convstem", 17912451072},
    {"isotropic-convnext-s", 4286367744},
    {"isotropic-convnext-s+convstem", 4663891968},
};

// published cost-table values this codebase is expected to land within 2% of
const std::map<std::string, double> kPublishedGmacs = {
    {"convnext-t", 4.47},     {"convnext-t+convstem", 4.60},
    {"convnext-s", 8.70},     {"convnext-s+convstem", 8.79},
    {"convnext-b", 15.38},    {"convnext-b+convstem", 15.97},
    {"vit-s", 4.61},          {"vit-s+convstem", 4.99},
    {"vit-m", 8.01},          {"vit-m+convstem", 8.38},
    {"vit-b", 17.58},         {"vit-b+convstem", 17.93},
    {"isotropic-convnext-s", 4.29},
    {"isotropic-convnext-s+convstem", 4.67},
};

// published parameter counts that exact structural counting reproduces at the
// table's printed precision; the three remaining rows of that table disagree
// with their own tiny/base siblings and are checked only in the acceptance run
const std::map<std::string, double> kPublishedMparams = {
    {"convnext-t", 28.59},  {"convnext-t+convstem", 28.63},
    {"convnext-b", 88.59},  {"convnext-b+convstem", 88.75},
    {"vit-s", 22.05},       {"vit-s+convstem", 22.78},
    {"vit-m", 38.85},       {"vit-m+convstem", 39.53},
    {"vit-b", 86.57},       {"isotropic-convnext-s", 22.31},
    {"isotropic-convnext-s+convstem", 23.04},
};

arch::ModelSpec random_micro_spec(Rng& rng) {
  arch::ModelSpec s;
  s.input_resolution = 32;
  s.num_classes = 2 + static_cast<std::int64_t>(rng.below(9));
  switch (rng.below(3)) {
    case 0: {
      s.family = "convnext";
      std::int64_t w = rng.bernoulli(0.5) ? 8 : 16;
      s.stage_widths = {w, 2 * w, 4 * w, 8 * w};
      s.stage_depths.clear();
      for (int i = 0; i < 4; ++i)
        s.stage_depths.push_back(1 + static_cast<std::int64_t>(rng.below(2)));
      s.layer_scale_init = rng.bernoulli(0.5) ? 1e-6 : 0.0;
      if (rng.bernoulli(0.5)) {
        s.stem.kind = arch::StemSpec::Kind::Patch;
        s.stem.layers = {{4, 4, w, true, false}};
      } else {
        s.stem.kind = arch::StemSpec::Kind::Conv;
        s.stem.layers = {{3, 2, w / 2, true, true}, {3, 2, w, true, true}};
      }
      break;
    }
    case 1: {
      s.family = "vit";
      s.heads = 1 + static_cast<std::int64_t>(rng.below(2));
      std::int64_t w = s.heads * (8 + 8 * static_cast<std::int64_t>(rng.below(3)));
      s.stage_depths = {1 + static_cast<std::int64_t>(rng.below(3))};
      s.stage_widths = {w};
      s.class_token = rng.bernoulli(0.7);
      s.pos_embed = rng.bernoulli(0.7);
      s.pos_embed_cls = s.class_token && s.pos_embed && rng.bernoulli(0.5);
      s.layer_scale_init = rng.bernoulli(0.5) ? 1e-4 : 0.0;
      if (rng.bernoulli(0.5)) {
        s.stem.kind = arch::StemSpec::Kind::Patch;
        s.stem.layers = {{8, 8, w, false, false}};
      } else {
        s.stem.kind = arch::StemSpec::Kind::Conv;
        s.stem.layers = {{3, 2, 8, true, true},
                         {3, 2, 16, true, true},
                         {3, 2, 16, true, true}};
        s.stem.final_pointwise = w;
      }
      break;
    }
    default: {
      s.family = "isotropic-convnext";
      std::int64_t w = rng.bernoulli(0.5) ? 16 : 32;
      s.stage_depths = {1 + static_cast<std::int64_t>(rng.below(3))};
      s.stage_widths = {w};
      s.layer_scale_init = rng.bernoulli(0.5) ? 1e-6 : 0.0;
      s.stem.kind = arch::StemSpec::Kind::Patch;
      s.stem.layers = {{8, 8, w, false, false}};
      break;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("frozen structural parameter counts for every full preset") {
  for (const auto& [name, want] : kParams)
    CHECK(count_params(arch::preset_spec(name)) == want);
}

TEST_CASE("frozen multiply-accumulate counts for every full preset") {
  for (const auto& [name, want] : kMacs224)
    CHECK(count_macs(arch::preset_spec(name), 224) == want);
}

TEST_CASE("published cost table is matched within its stated tolerances") {
  for (const auto& [name, g] : kPublishedGmacs) {
    double ours = static_cast<double>(count_macs(arch::preset_spec(name), 224)) / 1e9;
    CHECK(std::abs(ours - g) / g < 0.02);
  }
  for (const auto& [name, m] : kPublishedMparams) {
    double ours = static_cast<double>(count_params(arch::preset_spec(name))) / 1e6;
    // half a unit in the last printed decimal place
    CHECK(std::abs(ours - m) <= 0.005 + 1e-12);
  }
}

TEST_CASE("symbolic counts equal allocated-model counts") {
  for (const char* name : {"micro-convnext", "micro-convnext+convstem",
                           "micro-vit", "micro-vit+convstem", "convnext-t",
                           "vit-s"}) {
    auto spec = arch::preset_spec(name);
    arch::Model<float> m(spec);
    CHECK(count_params(spec) == m.param_count());
  }
  Rng rng(2024);
  for (int t = 0; t < 50; ++t) {
    auto spec = random_micro_spec(rng);
    CAPTURE(t);
    arch::Model<float> m(spec);
    CHECK(count_params(spec) == m.param_count());
  }
}

TEST_CASE("report rows sum to the totals and params ignore resolution") {
  for (const char* name : {"micro-convnext+convstem", "micro-vit", "vit-s"}) {
    auto spec = arch::preset_spec(name);
    auto rep = analyze(spec, spec.input_resolution, name);
    std::int64_t p = 0, m = 0;
    for (const auto& r : rep.rows) {
      p += r.params;
      m += r.macs;
    }
    CHECK(p == rep.total_params);
    CHECK(m == rep.total_macs);
    CHECK(rep.total_params == count_params(spec));
  }
  // params never depend on the analysis resolution
  auto spec = arch::preset_spec("convnext-t");
  CHECK(analyze(spec, 224).total_params == analyze(spec, 448).total_params);
}

TEST_CASE("single conv and head rows match hand arithmetic") {
  auto rep = analyze(arch::preset_spec("vit-s+convstem"), 224);
  REQUIRE(rep.rows[0].name == "stem.conv0");
  CHECK(rep.rows[0].macs == 3 * 3 * 3 * 48 * 112 * 112);  // = 16,257,024
  CHECK(rep.rows[0].out_shape == std::vector<std::int64_t>{48, 112, 112});

  auto vs = analyze(arch::preset_spec("vit-s"), 224);
  const auto& head = vs.rows.back();
  REQUIRE(head.name == "head");
  CHECK(head.params == 384 * 1000 + 1000);  // = 385,000
  CHECK(head.macs == 384 * 1000);
}

TEST_CASE("doubling resolution quadruples conv work exactly") {
  for (const char* name : {"convnext-t", "isotropic-convnext-s",
                           "micro-convnext+convstem"}) {
    auto spec = arch::preset_spec(name);
    std::int64_t res = spec.input_resolution;
    auto lo = analyze(spec, res), hi = analyze(spec, 2 * res);
    std::int64_t head = lo.rows.back().macs;
    REQUIRE(hi.rows.back().macs == head);
    CHECK(hi.total_macs - head == 4 * (lo.total_macs - head));
  }
  // attention work grows faster than quadratic, so no such identity for vit
  auto vs = arch::preset_spec("vit-s");
  CHECK(count_macs(vs, 448) > 4 * count_macs(vs, 224));
}

TEST_CASE("incompatible resolutions are rejected") {
  CHECK_THROWS_WITH_AS(count_macs(arch::preset_spec("vit-s"), 225),
                       doctest::Contains("not divisible"), TensorError);
  CHECK_THROWS_WITH_AS(count_macs(arch::preset_spec("convnext-t"), 220),
                       doctest::Contains("not divisible"), TensorError);
}

TEST_CASE("low-resolution adaptation shows up in the propagated shapes") {
  auto spec = arch::preset_spec("micro-convnext+convstem");
  auto m = arch::build<float>(spec, 1);
  arch::adapt_low_res(m);
  CHECK(count_params(m.spec()) == count_params(spec));
  auto rep = analyze(m.spec(), 32);
  // final stage runs at 1/4 of the input resolution after adaptation
  bool saw_last_stage = false;
  for (const auto& r : rep.rows)
    if (r.name.rfind("stage3.", 0) == 0) {
      CHECK(r.out_shape == std::vector<std::int64_t>{128, 8, 8});
      saw_last_stage = true;
    }
  CHECK(saw_last_stage);
  CHECK(rep.total_macs > analyze(spec, 32).total_macs);  // less downsampling
}

TEST_CASE("rendered tables carry paired stem deltas") {
  CHECK(render_csv({}) == "name,params,macs,params_delta_pct,macs_delta_pct\n");
  CHECK(render_text({}).substr(0, 5) == "model");

  auto reports = cost_table({"convnext-t", "convnext-t+convstem", "vit-s",
                             "vit-s+convstem"},
                            224);
  auto csv = render_csv(reports);
  CHECK(csv.find("convnext-t+convstem,28627432,4587393792,+0.1%,+3.0%") !=
        std::string::npos);
  CHECK(csv.find("convnext-t,28589128,4455531264,,\n") != std::string::npos);

  double dm = 100.0 *
              (static_cast<double>(reports[3].total_macs) -
               static_cast<double>(reports[2].total_macs)) /
              static_cast<double>(reports[2].total_macs);
  CHECK(dm > 7.5);
  CHECK(dm < 8.7);

  auto text = render_text(reports);
  CHECK(text.find("28.59") != std::string::npos);
  CHECK(text.find("4.46") != std::string::npos);
  CHECK(text.find("+8.2%") != std::string::npos);

  CHECK(fullsize_presets().size() == 14);
  for (const auto& n : fullsize_presets()) CHECK(kParams.count(n) == 1);
}
