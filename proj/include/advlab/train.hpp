#pragma once

// Adversarial training: AdamW with a warmup+cosine schedule, label smoothing,
// mixup/cutmix, a fourteen-op RandAugment, random erasing, an EMA shadow, and
// the min-max loop itself.  Augmentation works on raw NCHW pixel buffers and
// draws every random number from an explicit Rng, so a seed fixes the whole
// run.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "advlab/arch.hpp"
#include "advlab/checkpoint.hpp"
#include "advlab/data.hpp"
#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"
#include "advlab/threat.hpp"

namespace advlab::train {

// ---------------------------------------------------------------------------
// learning-rate schedule: linear 0 -> peak over the warmup, then a half
// cosine from peak down to zero
// ---------------------------------------------------------------------------

inline double cosine_warmup_lr(std::int64_t step, std::int64_t total_steps,
                               std::int64_t warmup_steps, double peak) {
  if (step < 0 || step > total_steps || warmup_steps < 0 ||
      warmup_steps >= total_steps)
    throw TensorError("cosine_warmup_lr: need 0 <= step <= total and warmup < total");
  if (warmup_steps > 0 && step <= warmup_steps)
    return peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
  double t = static_cast<double>(step - warmup_steps) /
             static_cast<double>(total_steps - warmup_steps);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

// ---------------------------------------------------------------------------
// AdamW: decoupled decay p <- p(1 - lr*wd), then bias-corrected Adam
// ---------------------------------------------------------------------------

template <typename S>
class AdamW {
 public:
  explicit AdamW(double weight_decay = 5e-2, double beta1 = 0.9,
                 double beta2 = 0.95, double eps = 1e-8)
      : wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

  // ordered (param, grad) pairs; a null grad means a zero gradient, in which
  // case a fresh-state step is exactly the decay factor
  void step(
      const std::vector<std::pair<std::vector<S>*, const std::vector<S>*>>& pg,
      double lr) {
    if (m_.empty()) {
      m_.resize(pg.size());
      v_.resize(pg.size());
      for (std::size_t i = 0; i < pg.size(); ++i) {
        m_[i].assign(pg[i].first->size(), S(0));
        v_[i].assign(pg[i].first->size(), S(0));
      }
    }
    if (pg.size() != m_.size())
      throw TensorError("adamw: parameter list changed size");
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < pg.size(); ++i) {
      auto& p = *pg[i].first;
      const std::vector<S>* g = pg[i].second;
      if (p.size() != m_[i].size())
        throw TensorError("adamw: parameter shape changed between steps");
      if (g && g->size() != p.size())
        throw TensorError("adamw: gradient shape mismatch");
      for (std::size_t j = 0; j < p.size(); ++j) {
        double gj = g ? static_cast<double>((*g)[j]) : 0.0;
        double pj = static_cast<double>(p[j]) * (1.0 - lr * wd_);
        double mj = b1_ * static_cast<double>(m_[i][j]) + (1.0 - b1_) * gj;
        double vj = b2_ * static_cast<double>(v_[i][j]) + (1.0 - b2_) * gj * gj;
        m_[i][j] = static_cast<S>(mj);
        v_[i][j] = static_cast<S>(vj);
        p[j] = static_cast<S>(pj - lr * (mj / bc1) / (std::sqrt(vj / bc2) + eps_));
      }
    }
  }

  void step(arch::Model<S>& model, double lr) {
    std::vector<std::pair<std::vector<S>*, const std::vector<S>*>> pg;
    for (auto& pr : model.params())
      pg.emplace_back(&pr.tensor.mutable_data(),
                      pr.tensor.has_grad() ? &pr.tensor.grad() : nullptr);
    step(pg, lr);
  }

  std::int64_t steps() const { return t_; }

 private:
  double wd_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<S>> m_, v_;
};

// ---------------------------------------------------------------------------
// targets
// ---------------------------------------------------------------------------

// true class 1 - s + s/K, everything else s/K; rows sum to 1
template <typename S>
Tensor<S> label_smooth(const std::vector<std::int64_t>& y, double s,
                       std::int64_t K) {
  if (!(s >= 0.0 && s < 1.0))
    throw TensorError("label_smooth: smoothing must be in [0, 1)");
  if (K < 1) throw TensorError("label_smooth: need at least one class");
  const auto N = static_cast<std::int64_t>(y.size());
  const double off = s / static_cast<double>(K);
  const double on = 1.0 - s + off;
  std::vector<S> v(static_cast<std::size_t>(N * K), static_cast<S>(off));
  for (std::int64_t i = 0; i < N; ++i) {
    if (y[i] < 0 || y[i] >= K)
      throw TensorError("label_smooth: label out of range");
    v[i * K + y[i]] = static_cast<S>(on);
  }
  return Tensor<S>::leaf({N, K}, std::move(v));
}

// ---------------------------------------------------------------------------
// per-image ops (raw CHW buffers); every op clips back into [0,1]
// ---------------------------------------------------------------------------

namespace img {

template <typename S>
void clip01(std::vector<S>& v) {
  for (auto& x : v) x = std::min(S(1), std::max(S(0), x));
}

template <typename S>
S sample_replicate(const std::vector<S>& im, std::int64_t h, std::int64_t w,
                   std::int64_t ch, double yy, double xx) {
  yy = std::min(static_cast<double>(h - 1), std::max(0.0, yy));
  xx = std::min(static_cast<double>(w - 1), std::max(0.0, xx));
  auto y0 = static_cast<std::int64_t>(yy);
  auto x0 = static_cast<std::int64_t>(xx);
  std::int64_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  double fy = yy - static_cast<double>(y0), fx = xx - static_cast<double>(x0);
  const S* p = im.data() + ch * h * w;
  double top = (1.0 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1];
  double bot = (1.0 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1];
  return static_cast<S>((1.0 - fy) * top + fy * bot);
}

// src = M (dst - center) + center + t, bilinear with replicated border
template <typename S>
void warp_affine(std::vector<S>& im, std::int64_t c, std::int64_t h,
                 std::int64_t w, double m00, double m01, double m10, double m11,
                 double tx, double ty) {
  const double cx = 0.5 * static_cast<double>(w - 1);
  const double cy = 0.5 * static_cast<double>(h - 1);
  std::vector<S> out(im.size());
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t yy = 0; yy < h; ++yy)
      for (std::int64_t xx = 0; xx < w; ++xx) {
        double dx = static_cast<double>(xx) - cx;
        double dy = static_cast<double>(yy) - cy;
        double sx = m00 * dx + m01 * dy + cx + tx;
        double sy = m10 * dx + m11 * dy + cy + ty;
        out[(ch * h + yy) * w + xx] = sample_replicate(im, h, w, ch, sy, sx);
      }
  im = std::move(out);
}

template <typename S>
void hflip(std::vector<S>& im, std::int64_t c, std::int64_t h, std::int64_t w) {
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t yy = 0; yy < h; ++yy) {
      S* row = im.data() + (ch * h + yy) * w;
      std::reverse(row, row + w);
    }
}

template <typename S>
std::vector<double> luma(const std::vector<S>& im, std::int64_t c,
                         std::int64_t h, std::int64_t w) {
  std::vector<double> g(static_cast<std::size_t>(h * w));
  if (c == 3) {
    for (std::int64_t j = 0; j < h * w; ++j)
      g[j] = 0.299 * im[j] + 0.587 * im[h * w + j] + 0.114 * im[2 * h * w + j];
  } else {
    for (std::int64_t j = 0; j < h * w; ++j) {
      double s = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) s += im[ch * h * w + j];
      g[j] = s / static_cast<double>(c);
    }
  }
  return g;
}

template <typename S>
void brightness(std::vector<S>& im, double f) {
  for (auto& v : im) v = static_cast<S>(f * v);
  clip01(im);
}

template <typename S>
void contrast(std::vector<S>& im, std::int64_t c, std::int64_t h,
              std::int64_t w, double f) {
  auto g = luma(im, c, h, w);
  double mu = 0.0;
  for (double v : g) mu += v;
  mu /= static_cast<double>(g.size());
  for (auto& v : im) v = static_cast<S>(mu + f * (v - mu));
  clip01(im);
}

template <typename S>
void color(std::vector<S>& im, std::int64_t c, std::int64_t h, std::int64_t w,
           double f) {
  auto g = luma(im, c, h, w);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t j = 0; j < h * w; ++j) {
      auto& v = im[ch * h * w + j];
      v = static_cast<S>(g[j] + f * (v - g[j]));
    }
  clip01(im);
}

template <typename S>
void sharpness(std::vector<S>& im, std::int64_t c, std::int64_t h,
               std::int64_t w, double f) {
  // blend against a 3x3 smoothing (center weight 5, neighbors 1)
  std::vector<S> blur(im.size());
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t yy = 0; yy < h; ++yy)
      for (std::int64_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (std::int64_t dy = -1; dy <= 1; ++dy)
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            std::int64_t sy = std::min(h - 1, std::max<std::int64_t>(0, yy + dy));
            std::int64_t sx = std::min(w - 1, std::max<std::int64_t>(0, xx + dx));
            acc += (dy == 0 && dx == 0 ? 5.0 : 1.0) * im[(ch * h + sy) * w + sx];
          }
        blur[(ch * h + yy) * w + xx] = static_cast<S>(acc / 13.0);
      }
  for (std::size_t j = 0; j < im.size(); ++j)
    im[j] = static_cast<S>(blur[j] + f * (im[j] - blur[j]));
  clip01(im);
}

template <typename S>
void autocontrast(std::vector<S>& im, std::int64_t c, std::int64_t h,
                  std::int64_t w, double blend) {
  for (std::int64_t ch = 0; ch < c; ++ch) {
    S* p = im.data() + ch * h * w;
    S lo = p[0], hi = p[0];
    for (std::int64_t j = 0; j < h * w; ++j) {
      lo = std::min(lo, p[j]);
      hi = std::max(hi, p[j]);
    }
    if (!(hi > lo)) continue;
    double scale = 1.0 / static_cast<double>(hi - lo);
    for (std::int64_t j = 0; j < h * w; ++j) {
      double st = (p[j] - lo) * scale;
      p[j] = static_cast<S>(p[j] + blend * (st - p[j]));
    }
  }
  clip01(im);
}

template <typename S>
void equalize(std::vector<S>& im, std::int64_t c, std::int64_t h,
              std::int64_t w, double blend) {
  for (std::int64_t ch = 0; ch < c; ++ch) {
    S* p = im.data() + ch * h * w;
    int hist[256] = {0};
    for (std::int64_t j = 0; j < h * w; ++j) {
      int q = static_cast<int>(std::lround(static_cast<double>(p[j]) * 255.0));
      ++hist[std::min(255, std::max(0, q))];
    }
    int cdf[256], run = 0, cdf_min = -1;
    for (int q = 0; q < 256; ++q) {
      run += hist[q];
      cdf[q] = run;
      if (cdf_min < 0 && hist[q] > 0) cdf_min = cdf[q];
    }
    const int total = static_cast<int>(h * w);
    if (cdf_min < 0 || cdf_min == total) continue;  // empty or constant plane
    for (std::int64_t j = 0; j < h * w; ++j) {
      int q = static_cast<int>(std::lround(static_cast<double>(p[j]) * 255.0));
      q = std::min(255, std::max(0, q));
      double eq = static_cast<double>(cdf[q] - cdf_min) /
                  static_cast<double>(total - cdf_min);
      p[j] = static_cast<S>(p[j] + blend * (eq - p[j]));
    }
  }
  clip01(im);
}

template <typename S>
void posterize(std::vector<S>& im, int bits) {
  if (bits <= 0 || bits >= 8) return;
  const int mask = ~((1 << (8 - bits)) - 1) & 0xff;
  for (auto& v : im) {
    int q = static_cast<int>(static_cast<double>(v) * 255.0);
    q = std::min(255, std::max(0, q)) & mask;
    v = static_cast<S>(q / 255.0);
  }
}

template <typename S>
void solarize(std::vector<S>& im, double threshold) {
  for (auto& v : im)
    if (static_cast<double>(v) > threshold) v = static_cast<S>(1.0 - v);
}

}  // namespace img

// ---------------------------------------------------------------------------
// augmentation pipeline
// ---------------------------------------------------------------------------

struct AugmentationConfig {
  int randaugment_layers = 2;
  int randaugment_magnitude = 9;
  double randaugment_prob = 0.5;
  double mix_alpha = 0.8;      // beta parameter for both mixup and cutmix
  double erase_prob = 0.25;
  double mix_mode_prob = 0.5;  // probability of mixup (vs cutmix) per batch
};

inline void validate(const AugmentationConfig& a) {
  for (double p : {a.randaugment_prob, a.erase_prob, a.mix_mode_prob})
    if (!(p >= 0.0 && p <= 1.0))
      throw TensorError("augmentation: probabilities must be in [0,1]");
  if (a.randaugment_magnitude < 0 || a.randaugment_magnitude > 30)
    throw TensorError("augmentation: magnitude must be in 0..30");
  if (a.randaugment_layers < 0 || !(a.mix_alpha > 0.0))
    throw TensorError("augmentation: layers >= 0 and mix_alpha > 0 required");
}

// fourteen-op policy; strength scales with magnitude/30, and ops whose
// strength degenerates to the identity are skipped outright so magnitude 0
// is a bit-exact no-op
template <typename S>
void rand_augment(std::vector<S>& im, std::int64_t c, std::int64_t h,
                  std::int64_t w, int layers, int magnitude, double prob,
                  Rng& rng) {
  if (magnitude < 0 || magnitude > 30)
    throw TensorError("rand_augment: magnitude must be in 0..30");
  const double strength = static_cast<double>(magnitude) / 30.0;
  const double deg = std::numbers::pi / 180.0;
  for (int layer = 0; layer < layers; ++layer) {
    auto op = static_cast<int>(rng.below(14));
    if (!rng.bernoulli(prob)) continue;
    double sgn = rng.bernoulli(0.5) ? 1.0 : -1.0;
    switch (op) {
      case 0:  // identity
        break;
      case 1:
        if (strength > 0.0) img::autocontrast(im, c, h, w, strength);
        break;
      case 2:
        if (strength > 0.0) img::equalize(im, c, h, w, strength);
        break;
      case 3:
        if (strength > 0.0) {
          double a = sgn * 30.0 * strength * deg;
          img::warp_affine(im, c, h, w, std::cos(a), std::sin(a), -std::sin(a),
                           std::cos(a), 0.0, 0.0);
          img::clip01(im);
        }
        break;
      case 4:
        img::posterize(im, 8 - static_cast<int>(std::lround(8.0 * strength)));
        break;
      case 5:
        img::solarize(im, 1.0 - strength);
        break;
      case 6:
        if (strength > 0.0) img::color(im, c, h, w, 1.0 + sgn * 0.9 * strength);
        break;
      case 7:
        if (strength > 0.0)
          img::contrast(im, c, h, w, 1.0 + sgn * 0.9 * strength);
        break;
      case 8:
        if (strength > 0.0) img::brightness(im, 1.0 + sgn * 0.9 * strength);
        break;
      case 9:
        if (strength > 0.0)
          img::sharpness(im, c, h, w, 1.0 + sgn * 0.9 * strength);
        break;
      case 10:
        if (strength > 0.0) {
          img::warp_affine(im, c, h, w, 1.0, sgn * 0.3 * strength, 0.0, 1.0,
                           0.0, 0.0);
          img::clip01(im);
        }
        break;
      case 11:
        if (strength > 0.0) {
          img::warp_affine(im, c, h, w, 1.0, 0.0, sgn * 0.3 * strength, 1.0,
                           0.0, 0.0);
          img::clip01(im);
        }
        break;
      case 12:
        if (strength > 0.0) {
          img::warp_affine(im, c, h, w, 1.0, 0.0, 0.0, 1.0,
                           sgn * 0.33 * strength * static_cast<double>(w), 0.0);
          img::clip01(im);
        }
        break;
      default:
        if (strength > 0.0) {
          img::warp_affine(im, c, h, w, 1.0, 0.0, 0.0, 1.0, 0.0,
                           sgn * 0.33 * strength * static_cast<double>(h));
          img::clip01(im);
        }
        break;
    }
  }
}

// with probability prob, replace a rectangle covering 2-33% of the image
// (aspect in [0.3, 1/0.3]) with per-pixel uniform noise
template <typename S>
void random_erase(std::vector<S>& im, std::int64_t c, std::int64_t h,
                  std::int64_t w, double prob, Rng& rng) {
  if (!rng.bernoulli(prob)) return;
  const double area = static_cast<double>(h * w);
  std::int64_t rh = 0, rw = 0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    double frac = rng.uniform(0.02, 0.33);
    double aspect = std::exp(rng.uniform(std::log(0.3), std::log(1.0 / 0.3)));
    rh = static_cast<std::int64_t>(std::lround(std::sqrt(frac * area * aspect)));
    rw = static_cast<std::int64_t>(std::lround(std::sqrt(frac * area / aspect)));
    if (rh < 1 || rw < 1 || rh > h || rw > w) continue;
    double got = static_cast<double>(rh * rw) / area;
    if (got >= 0.02 && got <= 0.33) break;
    rh = 0;
  }
  if (rh < 1) return;  // degenerate geometry, skip rather than distort
  auto top = static_cast<std::int64_t>(rng.below(h - rh + 1));
  auto left = static_cast<std::int64_t>(rng.below(w - rw + 1));
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t yy = top; yy < top + rh; ++yy)
      for (std::int64_t xx = left; xx < left + rw; ++xx)
        im[(ch * h + yy) * w + xx] = static_cast<S>(rng.uniform());
}

// pad-4 random crop + flip at desk scale; random resized crop + flip above
template <typename S>
void basic_augment(std::vector<S>& im, std::int64_t c, std::int64_t h,
                   std::int64_t w, Rng& rng) {
  if (h <= 64 && w <= 64) {
    const std::int64_t pad = 4;
    auto oy = static_cast<std::int64_t>(rng.below(2 * pad + 1)) - pad;
    auto ox = static_cast<std::int64_t>(rng.below(2 * pad + 1)) - pad;
    if (oy != 0 || ox != 0) {
      std::vector<S> out(im.size(), S(0));
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t yy = 0; yy < h; ++yy)
          for (std::int64_t xx = 0; xx < w; ++xx) {
            std::int64_t sy = yy + oy, sx = xx + ox;
            if (sy >= 0 && sy < h && sx >= 0 && sx < w)
              out[(ch * h + yy) * w + xx] = im[(ch * h + sy) * w + sx];
          }
      im = std::move(out);
    }
  } else {
    for (int attempt = 0; attempt < 10; ++attempt) {
      double scale = rng.uniform(0.25, 1.0);
      double aspect = std::exp(rng.uniform(std::log(0.75), std::log(4.0 / 3.0)));
      auto ch_ = static_cast<std::int64_t>(
          std::lround(std::sqrt(scale * double(h * w) / aspect)));
      auto cw_ = static_cast<std::int64_t>(
          std::lround(std::sqrt(scale * double(h * w) * aspect)));
      if (ch_ < 1 || cw_ < 1 || ch_ > h || cw_ > w) continue;
      auto top = static_cast<std::int64_t>(rng.below(h - ch_ + 1));
      auto left = static_cast<std::int64_t>(rng.below(w - cw_ + 1));
      std::vector<S> out(im.size());
      for (std::int64_t chn = 0; chn < c; ++chn)
        for (std::int64_t yy = 0; yy < h; ++yy)
          for (std::int64_t xx = 0; xx < w; ++xx) {
            double sy = top + (static_cast<double>(yy) + 0.5) *
                                  static_cast<double>(ch_) /
                                  static_cast<double>(h) -
                        0.5;
            double sx = left + (static_cast<double>(xx) + 0.5) *
                                   static_cast<double>(cw_) /
                                   static_cast<double>(w) -
                        0.5;
            out[(chn * h + yy) * w + xx] =
                img::sample_replicate(im, h, w, chn, sy, sx);
          }
      im = std::move(out);
      break;
    }
  }
  if (rng.bernoulli(0.5)) img::hflip(im, c, h, w);
}

template <typename S>
void color_jitter(std::vector<S>& im, std::int64_t c, std::int64_t h,
                  std::int64_t w, Rng& rng) {
  img::brightness(im, rng.uniform(0.6, 1.4));
  img::contrast(im, c, h, w, rng.uniform(0.6, 1.4));
  img::color(im, c, h, w, rng.uniform(0.6, 1.4));
}

// ---------------------------------------------------------------------------
// batch mixing; targets are [N,K] rows mixed with the same weights
// ---------------------------------------------------------------------------

// lambda ~ Beta(alpha, alpha), partner via a batch permutation; returns lambda
template <typename S>
double mixup(std::vector<S>& x, std::int64_t n, std::int64_t d,
             std::vector<S>& targets, std::int64_t k, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw TensorError("mixup: alpha must be > 0");
  double lam = rng.beta(alpha, alpha);
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  if (lam == 1.0) return lam;
  std::vector<S> xs(x), ts(targets);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t p = perm[i];
    for (std::int64_t j = 0; j < d; ++j)
      x[i * d + j] = static_cast<S>(lam * xs[i * d + j] +
                                    (1.0 - lam) * xs[p * d + j]);
    for (std::int64_t j = 0; j < k; ++j)
      targets[i * k + j] = static_cast<S>(lam * ts[i * k + j] +
                                          (1.0 - lam) * ts[p * k + j]);
  }
  return lam;
}

// paste a partner rectangle; the label weight is the exact kept-pixel
// fraction 1 - rh*rw/(h*w); returns that weight
template <typename S>
double cutmix(std::vector<S>& x, std::int64_t n, std::int64_t c, std::int64_t h,
              std::int64_t w, std::vector<S>& targets, std::int64_t k,
              double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw TensorError("cutmix: alpha must be > 0");
  double lam = rng.beta(alpha, alpha);
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  double cut = std::sqrt(1.0 - lam);
  auto rh = std::min<std::int64_t>(
      h, static_cast<std::int64_t>(std::lround(cut * double(h))));
  auto rw = std::min<std::int64_t>(
      w, static_cast<std::int64_t>(std::lround(cut * double(w))));
  if (rh < 1 || rw < 1) return 1.0;
  auto top = static_cast<std::int64_t>(rng.below(h - rh + 1));
  auto left = static_cast<std::int64_t>(rng.below(w - rw + 1));
  const double keep = 1.0 - static_cast<double>(rh * rw) / double(h * w);
  const std::int64_t d = c * h * w;
  std::vector<S> xs(x), ts(targets);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t p = perm[i];
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t yy = top; yy < top + rh; ++yy)
        for (std::int64_t xx = left; xx < left + rw; ++xx)
          x[i * d + (ch * h + yy) * w + xx] = xs[p * d + (ch * h + yy) * w + xx];
    for (std::int64_t j = 0; j < k; ++j)
      targets[i * k + j] = static_cast<S>(keep * ts[i * k + j] +
                                          (1.0 - keep) * ts[p * k + j]);
  }
  return keep;
}

// ---------------------------------------------------------------------------
// EMA shadow
// ---------------------------------------------------------------------------

template <typename S>
struct EmaState {
  double decay = 0.999;
  std::vector<std::vector<S>> shadow;
};

template <typename S>
EmaState<S> ema_init(const arch::Model<S>& model, double decay) {
  if (!(decay >= 0.0 && decay < 1.0))
    throw TensorError("ema: decay must be in [0, 1)");
  EmaState<S> e;
  e.decay = decay;
  for (const auto& p : model.params()) e.shadow.push_back(p.tensor.data());
  return e;
}

template <typename S>
void ema_update(EmaState<S>& e,
                const std::vector<const std::vector<S>*>& params) {
  if (e.shadow.size() != params.size())
    throw TensorError("ema_update: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (e.shadow[i].size() != params[i]->size())
      throw TensorError("ema_update: shape mismatch at tensor " +
                        std::to_string(i));
    for (std::size_t j = 0; j < e.shadow[i].size(); ++j)
      e.shadow[i][j] = static_cast<S>(e.decay * e.shadow[i][j] +
                                      (1.0 - e.decay) * (*params[i])[j]);
  }
}

template <typename S>
void ema_update(EmaState<S>& e, const arch::Model<S>& model) {
  std::vector<const std::vector<S>*> ps;
  for (const auto& p : model.params()) ps.push_back(&p.tensor.data());
  ema_update(e, ps);
}

// ---------------------------------------------------------------------------
// training configuration and loop
// ---------------------------------------------------------------------------

enum class Augmentation { Basic, ThreeAug, Heavy };

const char* augmentation_name(Augmentation a);
Augmentation parse_augmentation(const std::string& name);

struct TrainConfig {
  int epochs = 50;
  int warmup_peak_epoch = 10;  // clamped below epochs when the run is shorter
  double peak_lr = 1e-3;
  double weight_decay = 5e-2;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int batch_size = 128;
  double label_smoothing = 0.1;
  double ema_decay = 0.999;
  int attack_steps = 2;  // 0 = standard training
  // few-step training can die at the uniform saddle when the full radius hits
  // an unconverged model; ramping the radius linearly over the first N epochs
  // avoids that (0 = full radius from the start)
  int attack_warmup_epochs = 0;
  threat::ThreatModel tm{threat::Norm::Linf, 4.0 / 255.0};
  Augmentation augmentation = Augmentation::Heavy;
  std::string warm_start;  // checkpoint path; empty = keep the given init
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

// flat key=value lines, '#' comments; unknown keys are errors
TrainConfig config_from_text(const std::string& text);
std::string config_to_text(const TrainConfig& cfg);

// fine-tuning recipes for the named transfer datasets; the two desk-scale
// variants keep neutral a/b names because their source lists the same
// dataset twice with different values
TrainConfig transfer_preset(const std::string& name);

struct TrainRun {
  std::vector<ckpt::Checkpoint> checkpoints;  // one per completed epoch
  std::string log_csv;  // epoch,lr,train_loss,attack_feasibility_rate,...
  bool halted = false;
  std::string halt_reason;
};

// the min-max loop: augment, smooth/mix targets, attack the augmented batch
// with attack_steps of momentum ascent under cfg.tm, step AdamW on the loss
// at x+delta, update the EMA shadow; one checkpoint and one log row per epoch
TrainRun adv_train(arch::Model<float>& model, const data::Dataset& ds,
                   const TrainConfig& cfg);

// radius fine-tuning defaults: 25 epochs, peak 1e-4 reached at epoch 5
TrainConfig finetune_defaults(TrainConfig cfg, const threat::ThreatModel& new_tm);
TrainRun finetune_radius(arch::Model<float>& model, const data::Dataset& ds,
                         const TrainConfig& cfg,
                         const threat::ThreatModel& new_tm);

}  // namespace advlab::train
