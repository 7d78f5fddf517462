#include "advlab/sweep.hpp"

#include <cstdio>
#include <exception>
#include <thread>
#include <utility>

#include "advlab/analyzer.hpp"
#include "advlab/arch.hpp"
#include "advlab/rng.hpp"

namespace advlab::sweep {
namespace {

// one sweep row is a pure function of (checkpoint, dataset, resolution, ...),
// so rows can run on any thread without ordering effects
SweepRow evaluate_row(const ckpt::Checkpoint& c, const data::Dataset& ds,
                      std::int64_t r, const threat::ThreatModel& tm,
                      attack::Protocol protocol, std::uint64_t seed,
                      bool scale_l2, bool use_ema, double shorter_frac,
                      int quick_iters, int dlr_targets) {
  SweepRow row;
  row.resolution = r;
  row.tm = tm;
  if (tm.p == threat::Norm::L2 && scale_l2)
    row.tm.epsilon = scale_epsilon_l2(tm.epsilon, c.spec.input_resolution, r);
  if (r < 4) {
    row.skipped = true;
    row.note = "resolution " + std::to_string(r) +
               " is below the 4-pixel resize minimum";
    return row;
  }
  const std::int64_t stride = c.spec.stem.total_stride();
  std::int64_t divisor = stride;
  if (c.spec.is_convnext())
    divisor = stride * c.spec.first_downsample_stride * 4;
  if (divisor < 1 || r % divisor != 0) {
    row.skipped = true;
    row.note = "resolution " + std::to_string(r) +
               " is not divisible by the model stride " + std::to_string(divisor);
    return row;
  }
  if (c.spec.pos_embed && r / stride < 2) {
    row.skipped = true;
    row.note = "token grid at resolution " + std::to_string(r) +
               " is too small to interpolate";
    return row;
  }

  auto model = arch::build<float>(c.spec, 0);
  ckpt::restore(c, model, use_ema);
  if (c.spec.pos_embed && r != c.spec.input_resolution)
    arch::interpolate_pos_embed(model, r / stride);

  auto inputs = resize_pipeline(ds.images, r, shorter_frac);
  attack::ForwardFn<float> f = [&model](const Tensor<float>& x) {
    return model.forward(x);
  };
  row.detail = attack::evaluate_robust_accuracy(
      f, inputs, ds.labels, row.tm, protocol,
      derive_seed(seed, "res" + std::to_string(r)), quick_iters, dlr_targets);
  row.clean_acc = row.detail.clean_acc;
  row.robust_acc = row.detail.robust_acc;
  row.macs = analyzer::count_macs(c.spec, r);
  return row;
}

}  // namespace

SweepReport resolution_sweep(const ckpt::Checkpoint& c,
                             const data::Dataset& ds,
                             std::vector<std::int64_t> resolutions,
                             const threat::ThreatModel& tm,
                             attack::Protocol protocol, std::uint64_t seed,
                             bool scale_l2, bool use_ema, double shorter_frac,
                             int quick_iters, int dlr_targets) {
  std::sort(resolutions.begin(), resolutions.end());
  resolutions.erase(std::unique(resolutions.begin(), resolutions.end()),
                    resolutions.end());
  SweepReport rep;
  rep.rows.resize(resolutions.size());
  if (resolutions.empty()) return rep;

  const auto workers = std::max<std::size_t>(
      1, std::min<std::size_t>(resolutions.size(),
                               std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < resolutions.size(); i += workers)
          rep.rows[i] = evaluate_row(c, ds, resolutions[i], tm, protocol, seed,
                                     scale_l2, use_ema, shorter_frac,
                                     quick_iters, dlr_targets);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // argmax per metric over surviving rows; ties go to the lowest resolution
  double best_clean = -1.0, best_robust = -1.0;
  for (const auto& row : rep.rows) {
    if (row.skipped) continue;
    if (row.clean_acc > best_clean) {
      best_clean = row.clean_acc;
      rep.best_clean_resolution = row.resolution;
    }
    if (row.robust_acc > best_robust) {
      best_robust = row.robust_acc;
      rep.best_robust_resolution = row.resolution;
    }
  }
  return rep;
}

std::string sweep_csv_header() {
  return "resolution,norm,epsilon,clean_acc,robust_acc,macs,skipped\n";
}

std::string sweep_csv(const SweepReport& rep) {
  std::string out = sweep_csv_header();
  char buf[192];
  for (const auto& row : rep.rows) {
    std::snprintf(buf, sizeof buf, "%lld,%s,%.10g,%.10g,%.10g,%lld,%d\n",
                  static_cast<long long>(row.resolution),
                  threat::norm_name(row.tm.p), row.tm.epsilon, row.clean_acc,
                  row.robust_acc, static_cast<long long>(row.macs),
                  row.skipped ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace advlab::sweep
