#pragma once

// Threat-model geometry: perturbation sets of the form
//   { delta : ||delta||_p <= eps  and  x + delta in [0,1]^d }
// for p in {inf, 2, 1}, plus the attack-facing helpers built on them
// (projection, random initialization, steepest ascent directions).
//
// The l-inf set is a per-coordinate interval, so its projection is an exact
// clamp.  For p in {2, 1} the ball/box intersection has no closed form;
// naive "project onto ball, then clamp" is not the metric projection (the
// clamp can free up budget the ball step already spent), so project() runs
// Dykstra's alternating scheme with correction terms, which converges to the
// exact projection for convex sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"

namespace advlab::threat {

enum class Norm { Linf, L2, L1 };

struct ThreatModel {
  Norm p = Norm::Linf;
  double epsilon = 0.0;
};

// "linf:4/255", "l2:2.0", "l1:75"
ThreatModel parse_threat(const std::string& text);
std::string format_threat(const ThreatModel& tm);
const char* norm_name(Norm p);

enum class InitMode { Zero, Random };

// ---------------------------------------------------------------------------
// plain ball projections
// ---------------------------------------------------------------------------

template <typename S>
void project_l2_ball(std::vector<S>& v, double eps) {
  double n2 = 0.0;
  for (S x : v) n2 += static_cast<double>(x) * static_cast<double>(x);
  n2 = std::sqrt(n2);
  if (n2 <= eps || n2 == 0.0) return;
  const double s = eps / n2;
  for (auto& x : v) x = static_cast<S>(static_cast<double>(x) * s);
}

// Duchi et al. sort-based simplex scheme: soft-threshold at the level that
// lands the l1 norm exactly on eps
template <typename S>
void project_l1_ball(std::vector<S>& v, double eps) {
  double n1 = 0.0;
  for (S x : v) n1 += std::abs(static_cast<double>(x));
  if (n1 <= eps) return;
  std::vector<double> u(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) u[i] = std::abs(static_cast<double>(v[i]));
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    double t = (cum - eps) / static_cast<double>(j + 1);
    if (u[j] > t) theta = t;
  }
  for (auto& x : v) {
    double a = std::abs(static_cast<double>(x)) - theta;
    x = a > 0.0 ? static_cast<S>(x < S(0) ? -a : a) : S(0);
  }
}

// ---------------------------------------------------------------------------
// projection onto ball-and-box intersection
// ---------------------------------------------------------------------------

// delta <- argmin ||d - delta|| over the threat set around x; exact for
// p=inf, Dykstra (<= 100 rounds, 1e-10 increment stop) otherwise
template <typename S>
void project(std::vector<S>& delta, const std::vector<S>& x, const ThreatModel& tm) {
  if (delta.size() != x.size())
    throw TensorError("project: delta size " + std::to_string(delta.size()) +
                      " vs input size " + std::to_string(x.size()));
  const double eps = tm.epsilon;
  if (tm.p == Norm::Linf) {
    for (std::size_t i = 0; i < delta.size(); ++i) {
      double lo = std::max(-eps, -static_cast<double>(x[i]));
      double hi = std::min(eps, 1.0 - static_cast<double>(x[i]));
      delta[i] = static_cast<S>(std::clamp(static_cast<double>(delta[i]), lo, hi));
    }
    return;
  }

  // Dykstra: ball step with correction p, box step with correction q.  The
  // two per-round outputs converge to the same limit (the exact projection),
  // so their gap is the convergence measure; the plain iterate can stall on
  // polyhedral faces while corrections grow, which a step-size test misreads
  // as convergence.
  const std::size_t n = delta.size();
  std::vector<double> cur(n), p_corr(n, 0.0), q_corr(n, 0.0), ball(n);
  for (std::size_t i = 0; i < n; ++i) cur[i] = static_cast<double>(delta[i]);
  for (int round = 0; round < 1000; ++round) {
    for (std::size_t i = 0; i < n; ++i) ball[i] = cur[i] + p_corr[i];
    if (tm.p == Norm::L2)
      project_l2_ball(ball, eps);
    else
      project_l1_ball(ball, eps);
    for (std::size_t i = 0; i < n; ++i) p_corr[i] = cur[i] + p_corr[i] - ball[i];
    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double t = ball[i] + q_corr[i];
      double lo = -static_cast<double>(x[i]);
      double hi = 1.0 - static_cast<double>(x[i]);
      double clamped = std::clamp(t, lo, hi);
      q_corr[i] = t - clamped;
      gap = std::max(gap, std::abs(clamped - ball[i]));
      cur[i] = clamped;
    }
    if (gap <= 1e-11 * std::max(1.0, eps)) break;
  }
  for (std::size_t i = 0; i < n; ++i) delta[i] = static_cast<S>(cur[i]);
}

// ---------------------------------------------------------------------------
// attack start points and ascent directions
// ---------------------------------------------------------------------------

// Zero starts at the clean input.  Random draws uniformly from the ball
// (per-coordinate for inf, polar + radius ~ eps*u^(1/d) for 2, a sparse
// signed spike pattern on ~1% of coordinates for 1) and then projects into
// the feasible set.
template <typename S>
std::vector<S> init_delta(Rng& rng, const ThreatModel& tm, const std::vector<S>& x,
                          InitMode mode) {
  std::vector<S> d(x.size(), S(0));
  if (mode == InitMode::Zero || tm.epsilon == 0.0 || x.empty()) {
    project(d, x, tm);
    return d;
  }
  const std::size_t n = x.size();
  switch (tm.p) {
    case Norm::Linf:
      for (auto& v : d) v = static_cast<S>(rng.uniform(-tm.epsilon, tm.epsilon));
      break;
    case Norm::L2: {
      std::vector<double> g(n);
      double norm = 0.0;
      for (auto& v : g) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        double r = tm.epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<S>(g[i] / norm * r);
      }
      break;
    }
    case Norm::L1: {
      const std::size_t k = std::max<std::size_t>(1, n / 100);
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      rng.shuffle(idx);
      for (std::size_t j = 0; j < k; ++j)
        d[idx[j]] = static_cast<S>((rng.bernoulli(0.5) ? 1.0 : -1.0) * tm.epsilon /
                                   static_cast<double>(k));
      break;
    }
  }
  project(d, x, tm);
  return d;
}

// unit-norm ascent direction maximizing <grad, s> over ||s||_p <= 1:
//   inf -> sign pattern, 2 -> normalized gradient, 1 -> 1/k mass on the
//   k = ceil(0.1 d) largest-magnitude coordinates (ties to lower index)
template <typename S>
std::vector<S> steepest_direction(const std::vector<S>& grad, const ThreatModel& tm) {
  std::vector<S> s(grad.size(), S(0));
  switch (tm.p) {
    case Norm::Linf:
      for (std::size_t i = 0; i < grad.size(); ++i)
        s[i] = grad[i] > S(0) ? S(1) : (grad[i] < S(0) ? S(-1) : S(0));
      break;
    case Norm::L2: {
      double n2 = 0.0;
      for (S g : grad) n2 += static_cast<double>(g) * static_cast<double>(g);
      n2 = std::sqrt(n2);
      if (n2 > 0.0)
        for (std::size_t i = 0; i < grad.size(); ++i)
          s[i] = static_cast<S>(static_cast<double>(grad[i]) / n2);
      break;
    }
    case Norm::L1: {
      const std::size_t n = grad.size();
      const std::size_t k = static_cast<std::size_t>(
          std::ceil(0.1 * static_cast<double>(n)));
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        double ma = std::abs(static_cast<double>(grad[a]));
        double mb = std::abs(static_cast<double>(grad[b]));
        if (ma != mb) return ma > mb;
        return a < b;
      });
      for (std::size_t j = 0; j < std::max<std::size_t>(k, 1) && j < n; ++j) {
        S g = grad[idx[j]];
        s[idx[j]] = g > S(0) ? static_cast<S>(1.0 / static_cast<double>(k))
                             : (g < S(0) ? static_cast<S>(-1.0 / static_cast<double>(k))
                                         : S(0));
      }
      break;
    }
  }
  return s;
}

}  // namespace advlab::threat
