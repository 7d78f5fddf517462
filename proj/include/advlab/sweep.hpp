#pragma once

// Test-time resolution protocol: the canonical resize-then-crop input
// pipeline, linear radius scaling for the l2 threat, and a sweep that
// re-evaluates one checkpoint across a ladder of input resolutions,
// interpolating positional tables where the architecture needs it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "advlab/attack.hpp"
#include "advlab/checkpoint.hpp"
#include "advlab/data.hpp"
#include "advlab/tensor.hpp"
#include "advlab/threat.hpp"

namespace advlab::sweep {

// Evaluation preprocessing: bicubic-resize the shorter side to
// round(target / shorter_frac) keeping aspect, then cut a centered
// target x target crop.  shorter_frac = 1 on a square target-sized input is
// a bit-exact no-op; so is any call whose intermediate size matches the
// input, which makes the composition with itself exact in those cases.
template <typename S>
Tensor<S> resize_pipeline(const Tensor<S>& images, std::int64_t target,
                          double shorter_frac) {
  const auto& is = images.shape();
  if (is.size() != 4)
    throw TensorError("resize_pipeline: expected [N, C, H, W], got " +
                      shape_str(is));
  if (target < 4)
    throw TensorError("resize_pipeline: target size must be >= 4");
  if (!(shorter_frac > 0.0) || shorter_frac > 1.0)
    throw TensorError("resize_pipeline: shorter-side fraction must lie in (0, 1]");
  const std::int64_t N = is[0], C = is[1], H = is[2], W = is[3];
  const auto inter_short = static_cast<std::int64_t>(
      std::llround(static_cast<double>(target) / shorter_frac));
  const double scale =
      static_cast<double>(inter_short) / static_cast<double>(std::min(H, W));
  std::int64_t ih, iw;
  if (H <= W) {
    ih = inter_short;
    iw = std::llround(static_cast<double>(W) * scale);
  } else {
    iw = inter_short;
    ih = std::llround(static_cast<double>(H) * scale);
  }
  const std::int64_t top = (ih - target) / 2, left = (iw - target) / 2;
  std::vector<S> out(static_cast<std::size_t>(N * C * target * target));
  std::vector<S> resized;
  for (std::int64_t n = 0; n < N; ++n) {
    const S* src = images.data().data() + n * C * H * W;
    std::int64_t sh = H, sw = W;
    if (ih != H || iw != W) {
      resized = bicubic_resize_raw(src, C, H, W, ih, iw);
      src = resized.data();
      sh = ih;
      sw = iw;
    }
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t i = 0; i < target; ++i) {
        const S* row = src + (c * sh + top + i) * sw + left;
        std::copy(row, row + target,
                  out.begin() + ((n * C + c) * target + i) * target);
      }
  }
  return Tensor<S>::leaf({N, C, target, target}, std::move(out));
}

// the l-infinity radius stays fixed across resolutions by design; the l2
// radius grows linearly with the side length when the caller opts in
inline double scale_epsilon_l2(double base_eps, std::int64_t base_res,
                               std::int64_t d) {
  if (base_res < 1 || d < 1)
    throw TensorError("scale_epsilon_l2: resolutions must be >= 1");
  if (base_eps < 0.0)
    throw TensorError("scale_epsilon_l2: radius must be >= 0");
  return base_eps * (static_cast<double>(d) / static_cast<double>(base_res));
}

struct SweepRow {
  std::int64_t resolution = 0;
  threat::ThreatModel tm;      // radius as actually evaluated at this row
  bool skipped = false;        // resolution incompatible with the stem stride
  std::string note;            // reason when skipped
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  std::int64_t macs = 0;       // per-example multiply-accumulates
  attack::EvalReport detail;   // per-example outcomes for downstream audits
};

struct SweepReport {
  std::vector<SweepRow> rows;              // ascending resolution
  std::int64_t best_clean_resolution = 0;  // 0 when every row is skipped
  std::int64_t best_robust_resolution = 0;
};

// Rebuilds the checkpointed model once per requested resolution, resamples
// the positional table when the token grid changes, resizes the dataset
// through resize_pipeline and attacks it.  Rows run in parallel; the report
// is assembled in ascending resolution order regardless of thread timing.
SweepReport resolution_sweep(const ckpt::Checkpoint& c,
                             const data::Dataset& ds,
                             std::vector<std::int64_t> resolutions,
                             const threat::ThreatModel& tm,
                             attack::Protocol protocol, std::uint64_t seed,
                             bool scale_l2 = false, bool use_ema = false,
                             double shorter_frac = 0.875, int quick_iters = 10,
                             int dlr_targets = 3);

std::string sweep_csv_header();
std::string sweep_csv(const SweepReport& rep);  // header plus one row per line

}  // namespace advlab::sweep
