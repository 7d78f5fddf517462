#pragma once

// Gradient attacks under an lp threat model: plain projected ascent (PGD) and
// the adaptive momentum variant (APGD) with automatic step halving and
// best-so-far restarts, plus the two attack losses (cross-entropy and the
// scale-invariant targeted logit-ratio loss) and the robust-accuracy
// evaluation protocol built from them.
//
// Attacks maximize the loss.  Every candidate iterate is projected, so any
// returned perturbation is feasible by construction; the result carries an
// explicit per-example feasibility certificate anyway.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"
#include "advlab/threat.hpp"

namespace advlab::attack {

template <typename S>
using ForwardFn = std::function<Tensor<S>(const Tensor<S>&)>;

enum class AttackKind { Pgd, Apgd };
enum class AttackLoss { Ce, DlrTargeted };
enum class Protocol { Quick, Standard };

struct AttackConfig {
  AttackKind kind = AttackKind::Apgd;
  AttackLoss loss = AttackLoss::Ce;
  int iters = 10;
  int target_classes = 3;   // logit-ratio stages in the standard protocol
  double step_size = 0.0;   // pgd only; apgd manages its own step
  std::uint64_t seed = 0;
  threat::ThreatModel tm;
  threat::InitMode init = threat::InitMode::Random;
};

inline void validate(const AttackConfig& cfg) {
  if (cfg.iters < 1) throw TensorError("attack: iters must be >= 1");
  if (cfg.kind == AttackKind::Pgd && !(cfg.step_size > 0.0))
    throw TensorError("attack: pgd needs step_size > 0");
  if (cfg.target_classes < 1)
    throw TensorError("attack: target_classes must be >= 1");
}

// iteration indices (1-based step counts) where APGD reconsiders its step
// size: fractions start 0, 0.22 and advance by max(prev_gap - 0.03, 0.06)
std::vector<int> apgd_checkpoints(int iters);

template <typename S>
struct AttackResult {
  Tensor<S> delta;                    // best-loss perturbation, shape of x
  std::vector<double> best_loss;      // per example, max over all iterates
  std::vector<char> success;          // argmax(f(x+delta)) != y
  std::vector<char> feasible;         // norm + box certificate
  int iters_used = 0;
  // best_loss snapshots, one per loss evaluation (entry 0 = the init point);
  // non-decreasing along each example's column by construction
  std::vector<std::vector<double>> best_trace;
};

// ---------------------------------------------------------------------------
// targeted logit-ratio loss: -(z_y - z_t) / (z_[1] - (z_[3] + z_[4]) / 2)
// with z_[k] the k-th largest logit; scale-invariant, needs K >= 4
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> dlr_targeted(const Tensor<S>& logits,
                       const std::vector<std::int64_t>& y,
                       const std::vector<std::int64_t>& t) {
  const auto& zs = logits.shape();
  if (zs.size() != 2)
    throw TensorError("dlr_targeted: logits must be [N,K], got " +
                      shape_str(zs));
  const std::int64_t N = zs[0], K = zs[1];
  if (K < 4)
    throw TensorError("dlr_targeted: needs at least 4 classes, got " +
                      std::to_string(K));
  if (static_cast<std::int64_t>(y.size()) != N ||
      static_cast<std::int64_t>(t.size()) != N)
    throw TensorError("dlr_targeted: label count mismatch");
  for (std::int64_t i = 0; i < N; ++i) {
    if (y[i] < 0 || y[i] >= K || t[i] < 0 || t[i] >= K)
      throw TensorError("dlr_targeted: label out of range");
    if (y[i] == t[i])
      throw TensorError("dlr_targeted: target equals true label at example " +
                        std::to_string(i));
  }

  auto n = detail::make_node<S>("dlr_targeted", Shape{N}, {logits.node()});
  const auto& z = logits.data();
  // saved per example: sorted indices pi1, pi3, pi4 and 1/den
  std::vector<std::int64_t> pi(static_cast<std::size_t>(3 * N));
  std::vector<S> inv_den(static_cast<std::size_t>(N));
  std::vector<std::int64_t> order(static_cast<std::size_t>(K));
  for (std::int64_t i = 0; i < N; ++i) {
    const S* row = z.data() + i * K;
    for (std::int64_t k = 0; k < K; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
      return row[a] > row[b] || (row[a] == row[b] && a < b);
    });
    pi[3 * i] = order[0];
    pi[3 * i + 1] = order[2];
    pi[3 * i + 2] = order[3];
    S den = row[order[0]] - (row[order[2]] + row[order[3]]) / S(2);
    inv_den[i] = S(1) / den;  // den == 0 => inf, caught by the finite check
    n->value[i] = -(row[y[i]] - row[t[i]]) * inv_den[i];
  }
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [N, K, y, t, pi = std::move(pi),
                      inv_den = std::move(inv_den)](Node<S>& self) {
      auto& g = self.parents[0]->ensure_grad();
      const auto& z = self.parents[0]->value;
      for (std::int64_t i = 0; i < N; ++i) {
        S gy = self.grad[i];
        if (gy == S(0)) continue;
        S* gr = g.data() + i * K;
        const S* row = z.data() + i * K;
        S id = inv_den[i];
        S num = row[y[i]] - row[t[i]];
        gr[y[i]] += gy * (-id);
        gr[t[i]] += gy * id;
        // d(-num/den)/dden = num/den^2; den touches pi1 (+1), pi3/pi4 (-1/2)
        S dden = gy * num * id * id;
        gr[pi[3 * i]] += dden;
        gr[pi[3 * i + 1]] += dden * S(-0.5);
        gr[pi[3 * i + 2]] += dden * S(-0.5);
      }
    };
  return Tensor<S>(n);
}

// ---------------------------------------------------------------------------
// shared attack plumbing
// ---------------------------------------------------------------------------

namespace detail_attack {

template <typename S>
std::vector<std::int64_t> argmax_rows(const std::vector<S>& v, std::int64_t N,
                                      std::int64_t K) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) {
    const S* row = v.data() + i * K;
    out[i] = std::max_element(row, row + K) - row;
  }
  return out;
}

template <typename S>
Tensor<S> one_hot(const std::vector<std::int64_t>& y, std::int64_t K) {
  const auto N = static_cast<std::int64_t>(y.size());
  std::vector<S> v(static_cast<std::size_t>(N * K), S(0));
  for (std::int64_t i = 0; i < N; ++i) v[i * K + y[i]] = S(1);
  return Tensor<S>::leaf({N, K}, std::move(v));
}

template <typename S>
struct StepEval {
  std::vector<double> loss;
  std::vector<std::int64_t> pred;
  std::vector<S> grad;  // of summed loss w.r.t. delta, empty if not requested
};

template <typename S>
StepEval<S> eval_at(const ForwardFn<S>& f, const Tensor<S>& x,
                    const std::vector<S>& delta, const AttackConfig& cfg,
                    const std::vector<std::int64_t>& y,
                    const std::vector<std::int64_t>& targets, bool want_grad,
                    const Tensor<S>* soft_targets = nullptr) {
  auto dl = Tensor<S>::leaf(x.shape(), delta, want_grad);
  auto logits = f(add(x, dl));
  const auto& ls = logits.shape();
  if (ls.size() != 2 || ls[0] != x.shape()[0])
    throw TensorError("attack: model must map [N,...] to [N,K] logits, got " +
                      shape_str(ls));
  const std::int64_t N = ls[0], K = ls[1];
  if (y.size() != static_cast<std::size_t>(N))
    throw TensorError("attack: label count mismatch");
  for (auto label : y)
    if (label < 0 || label >= K)
      throw TensorError("attack: label out of range for " + std::to_string(K) +
                        " classes");
  if (soft_targets && cfg.loss != AttackLoss::Ce)
    throw TensorError("attack: distribution targets need the ce loss");
  Tensor<S> lvec =
      cfg.loss == AttackLoss::Ce
          ? cross_entropy_per_example(
                logits, soft_targets ? *soft_targets : one_hot<S>(y, K))
          : dlr_targeted(logits, y, targets);
  StepEval<S> out;
  out.loss.resize(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i)
    out.loss[i] = static_cast<double>(lvec.data()[i]);
  out.pred = argmax_rows(logits.data(), N, K);
  if (want_grad) {
    backward(vsum(lvec));
    out.grad = dl.grad();
  }
  return out;
}

// per-example feasibility certificate for x + delta
template <typename S>
std::vector<char> certify(const std::vector<S>& delta, const std::vector<S>& x,
                          std::int64_t N, std::int64_t d,
                          const threat::ThreatModel& tm) {
  std::vector<char> ok(static_cast<std::size_t>(N), 1);
  const double slack = 1e-6;
  for (std::int64_t i = 0; i < N; ++i) {
    const S* dr = delta.data() + i * d;
    const S* xr = x.data() + i * d;
    double norm = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      double v = static_cast<double>(dr[j]);
      switch (tm.p) {
        case threat::Norm::Linf: norm = std::max(norm, std::abs(v)); break;
        case threat::Norm::L2: norm += v * v; break;
        case threat::Norm::L1: norm += std::abs(v); break;
      }
      double px = static_cast<double>(xr[j]) + v;
      if (px < -slack || px > 1.0 + slack) ok[i] = 0;
    }
    if (tm.p == threat::Norm::L2) norm = std::sqrt(norm);
    if (norm > tm.epsilon * (1.0 + slack) + slack * 1e-3) ok[i] = 0;
  }
  return ok;
}

template <typename S>
std::vector<S> init_deltas(const Tensor<S>& x, const AttackConfig& cfg,
                           std::int64_t N, std::int64_t d) {
  Rng rng(derive_seed(cfg.seed, "attack.init"));
  std::vector<S> delta(static_cast<std::size_t>(N * d));
  for (std::int64_t i = 0; i < N; ++i) {
    std::vector<S> xr(x.data().begin() + i * d, x.data().begin() + (i + 1) * d);
    auto dr = threat::init_delta(rng, cfg.tm, xr, cfg.init);
    std::copy(dr.begin(), dr.end(), delta.begin() + i * d);
  }
  return delta;
}

}  // namespace detail_attack

// ---------------------------------------------------------------------------
// PGD: delta <- project(delta + step * steepest_direction(grad))
// ---------------------------------------------------------------------------

template <typename S>
AttackResult<S> pgd_attack(const ForwardFn<S>& f, const Tensor<S>& x,
                           const std::vector<std::int64_t>& y,
                           const AttackConfig& cfg,
                           const std::vector<std::int64_t>& targets = {},
                           const Tensor<S>* soft_targets = nullptr) {
  validate(cfg);
  if (cfg.kind != AttackKind::Pgd)
    throw TensorError("pgd_attack: config kind is not pgd");
  const std::int64_t N = x.shape()[0];
  const std::int64_t d = numel(x.shape()) / N;

  auto delta = detail_attack::init_deltas(x, cfg, N, d);
  std::vector<S> best_delta = delta;
  std::vector<double> best_loss(static_cast<std::size_t>(N),
                                -std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> best_pred(static_cast<std::size_t>(N), -1);
  std::vector<std::vector<double>> trace;

  auto consider = [&](const detail_attack::StepEval<S>& ev) {
    for (std::int64_t i = 0; i < N; ++i)
      if (ev.loss[i] > best_loss[i]) {
        best_loss[i] = ev.loss[i];
        best_pred[i] = ev.pred[i];
        std::copy(delta.begin() + i * d, delta.begin() + (i + 1) * d,
                  best_delta.begin() + i * d);
      }
    trace.push_back(best_loss);
  };

  for (int it = 0; it < cfg.iters; ++it) {
    auto ev = detail_attack::eval_at(f, x, delta, cfg, y, targets, true, soft_targets);
    consider(ev);
    for (std::int64_t i = 0; i < N; ++i) {
      std::vector<S> g(ev.grad.begin() + i * d, ev.grad.begin() + (i + 1) * d);
      auto s = threat::steepest_direction(g, cfg.tm);
      std::vector<S> dr(delta.begin() + i * d, delta.begin() + (i + 1) * d);
      for (std::int64_t j = 0; j < d; ++j)
        dr[j] += static_cast<S>(cfg.step_size) * s[j];
      std::vector<S> xr(x.data().begin() + i * d,
                        x.data().begin() + (i + 1) * d);
      threat::project(dr, xr, cfg.tm);
      std::copy(dr.begin(), dr.end(), delta.begin() + i * d);
    }
  }
  consider(detail_attack::eval_at(f, x, delta, cfg, y, targets, false, soft_targets));

  AttackResult<S> res;
  res.delta = Tensor<S>::leaf(x.shape(), best_delta);
  res.best_loss = std::move(best_loss);
  res.success.resize(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) res.success[i] = best_pred[i] != y[i];
  res.feasible = detail_attack::certify(best_delta, x.data(), N, d, cfg.tm);
  res.iters_used = cfg.iters;
  res.best_trace = std::move(trace);
  return res;
}

// ---------------------------------------------------------------------------
// APGD: momentum ascent, adaptive step halving at checkpoints, restart from
// the best-so-far point; every quantity tracked per example
// ---------------------------------------------------------------------------

template <typename S>
AttackResult<S> apgd_attack(const ForwardFn<S>& f, const Tensor<S>& x,
                            const std::vector<std::int64_t>& y,
                            const AttackConfig& cfg,
                            const std::vector<std::int64_t>& targets = {},
                            const Tensor<S>* soft_targets = nullptr) {
  validate(cfg);
  if (cfg.kind != AttackKind::Apgd)
    throw TensorError("apgd_attack: config kind is not apgd");
  const std::int64_t N = x.shape()[0];
  const std::int64_t d = numel(x.shape()) / N;
  const double alpha = 0.75;  // momentum mixing
  const double rho = 0.75;    // required fraction of loss-increasing steps

  auto checkpoints = apgd_checkpoints(cfg.iters);
  auto delta = detail_attack::init_deltas(x, cfg, N, d);
  std::vector<S> delta_prev = delta;  // x_{k-1}
  std::vector<S> best_delta = delta;

  std::vector<double> eta(static_cast<std::size_t>(N), 2.0 * cfg.tm.epsilon);
  std::vector<double> best_loss(static_cast<std::size_t>(N),
                                -std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> best_pred(static_cast<std::size_t>(N), -1);
  std::vector<double> loss_prev(static_cast<std::size_t>(N));
  std::vector<int> incr_count(static_cast<std::size_t>(N), 0);
  std::vector<double> ckpt_eta(eta);
  std::vector<double> ckpt_best(best_loss);
  std::vector<std::vector<double>> trace;

  auto consider = [&](const detail_attack::StepEval<S>& ev) {
    for (std::int64_t i = 0; i < N; ++i)
      if (ev.loss[i] > best_loss[i]) {
        best_loss[i] = ev.loss[i];
        best_pred[i] = ev.pred[i];
        std::copy(delta.begin() + i * d, delta.begin() + (i + 1) * d,
                  best_delta.begin() + i * d);
      }
    trace.push_back(best_loss);
  };

  auto ev = detail_attack::eval_at(f, x, delta, cfg, y, targets, true, soft_targets);
  consider(ev);
  loss_prev = ev.loss;
  for (auto& c : ckpt_best) c = -std::numeric_limits<double>::infinity();

  std::size_t next_ckpt = 0;
  for (int k = 0; k < cfg.iters; ++k) {
    for (std::int64_t i = 0; i < N; ++i) {
      std::vector<S> g(ev.grad.begin() + i * d, ev.grad.begin() + (i + 1) * d);
      auto s = threat::steepest_direction(g, cfg.tm);
      std::vector<S> xr(x.data().begin() + i * d,
                        x.data().begin() + (i + 1) * d);
      std::vector<S> z(d);
      for (std::int64_t j = 0; j < d; ++j)
        z[j] = delta[i * d + j] + static_cast<S>(eta[i]) * s[j];
      threat::project(z, xr, cfg.tm);
      std::vector<S> nxt(d);
      if (k == 0) {
        nxt = z;  // first update is plain ascent
      } else {
        for (std::int64_t j = 0; j < d; ++j) {
          double cur = delta[i * d + j];
          nxt[j] = static_cast<S>(cur + alpha * (z[j] - cur) +
                                  (1.0 - alpha) * (cur - delta_prev[i * d + j]));
        }
        threat::project(nxt, xr, cfg.tm);
      }
      std::copy(delta.begin() + i * d, delta.begin() + (i + 1) * d,
                delta_prev.begin() + i * d);
      std::copy(nxt.begin(), nxt.end(), delta.begin() + i * d);
    }

    bool last = k + 1 == cfg.iters;
    ev = detail_attack::eval_at(f, x, delta, cfg, y, targets, !last, soft_targets);
    consider(ev);
    for (std::int64_t i = 0; i < N; ++i) {
      if (ev.loss[i] > loss_prev[i]) ++incr_count[i];
      loss_prev[i] = ev.loss[i];
    }

    if (next_ckpt < checkpoints.size() && k + 1 == checkpoints[next_ckpt]) {
      int span = checkpoints[next_ckpt] -
                 (next_ckpt == 0 ? 0 : checkpoints[next_ckpt - 1]);
      for (std::int64_t i = 0; i < N; ++i) {
        bool too_few = incr_count[i] < rho * span;
        bool stalled = ckpt_eta[i] == eta[i] && ckpt_best[i] == best_loss[i];
        if (too_few || stalled) {
          eta[i] /= 2.0;
          std::copy(best_delta.begin() + i * d, best_delta.begin() + (i + 1) * d,
                    delta.begin() + i * d);
          std::copy(delta.begin() + i * d, delta.begin() + (i + 1) * d,
                    delta_prev.begin() + i * d);  // momentum reset
          loss_prev[i] = best_loss[i];
        }
        incr_count[i] = 0;
        ckpt_eta[i] = eta[i];
        ckpt_best[i] = best_loss[i];
      }
      ++next_ckpt;
      if (!last)  // the restart moved delta, so the cached gradient is stale
        ev = detail_attack::eval_at(f, x, delta, cfg, y, targets, true, soft_targets);
    }
  }

  AttackResult<S> res;
  res.delta = Tensor<S>::leaf(x.shape(), best_delta);
  res.best_loss = std::move(best_loss);
  res.success.resize(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) res.success[i] = best_pred[i] != y[i];
  res.feasible = detail_attack::certify(best_delta, x.data(), N, d, cfg.tm);
  res.iters_used = cfg.iters;
  res.best_trace = std::move(trace);
  return res;
}

template <typename S>
AttackResult<S> run_attack(const ForwardFn<S>& f, const Tensor<S>& x,
                           const std::vector<std::int64_t>& y,
                           const AttackConfig& cfg,
                           const std::vector<std::int64_t>& targets = {},
                           const Tensor<S>* soft_targets = nullptr) {
  return cfg.kind == AttackKind::Pgd
             ? pgd_attack(f, x, y, cfg, targets, soft_targets)
             : apgd_attack(f, x, y, cfg, targets, soft_targets);
}

// ---------------------------------------------------------------------------
// robust-accuracy protocol
// ---------------------------------------------------------------------------

struct EvalReport {
  threat::ThreatModel tm;
  std::int64_t examples = 0;
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  int iters = 0;   // per-stage iteration budget
  int stages = 0;  // attack stages actually run
  std::uint64_t seed = 0;
  std::vector<char> clean_correct;
  std::vector<char> robust;
};

std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& rep);

// quick: one cross-entropy stage; standard: cross-entropy stage then one
// targeted logit-ratio stage per target class (skipped when K < 4), each
// stage attacking only the still-unbroken examples
template <typename S>
EvalReport evaluate_robust_accuracy(const ForwardFn<S>& f,
                                    const Tensor<S>& images,
                                    const std::vector<std::int64_t>& labels,
                                    const threat::ThreatModel& tm,
                                    Protocol protocol, std::uint64_t seed,
                                    int quick_iters = 10,
                                    int dlr_targets = 3) {
  const std::int64_t N = images.shape()[0];
  const std::int64_t d = numel(images.shape()) / N;
  EvalReport rep;
  rep.tm = tm;
  rep.examples = N;
  rep.seed = seed;
  rep.iters = protocol == Protocol::Quick ? quick_iters : 40;

  auto logits = f(images);
  const std::int64_t K = logits.shape()[1];
  auto pred = detail_attack::argmax_rows(logits.data(), N, K);
  rep.clean_correct.resize(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i)
    rep.clean_correct[i] = pred[i] == labels[i];
  rep.robust = rep.clean_correct;

  // per-example target ranking by clean logits, used by the targeted stages
  auto nth_wrong = [&](std::int64_t i, int rank) {
    const S* row = logits.data().data() + i * K;
    std::vector<std::int64_t> order;
    for (std::int64_t c = 0; c < K; ++c)
      if (c != labels[i]) order.push_back(c);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
      return row[a] > row[b] || (row[a] == row[b] && a < b);
    });
    return order[rank];
  };

  auto survivors = [&] {
    std::vector<std::int64_t> idx;
    for (std::int64_t i = 0; i < N; ++i)
      if (rep.robust[i]) idx.push_back(i);
    return idx;
  };

  auto run_stage = [&](AttackLoss loss, int iters, int stage, int target_rank) {
    auto idx = survivors();
    if (idx.empty()) return;
    const std::int64_t n = static_cast<std::int64_t>(idx.size());
    std::vector<S> sub(static_cast<std::size_t>(n * d));
    std::vector<std::int64_t> suby(static_cast<std::size_t>(n));
    std::vector<std::int64_t> subt;
    for (std::int64_t j = 0; j < n; ++j) {
      std::copy(images.data().begin() + idx[j] * d,
                images.data().begin() + (idx[j] + 1) * d,
                sub.begin() + j * d);
      suby[j] = labels[idx[j]];
    }
    if (loss == AttackLoss::DlrTargeted)
      for (std::int64_t j = 0; j < n; ++j)
        subt.push_back(nth_wrong(idx[j], target_rank));
    Shape ss = images.shape();
    ss[0] = n;
    AttackConfig cfg;
    cfg.kind = AttackKind::Apgd;
    cfg.loss = loss;
    cfg.iters = iters;
    cfg.tm = tm;
    cfg.seed = derive_seed(seed, "stage" + std::to_string(stage));
    auto res = apgd_attack<S>(f, Tensor<S>::leaf(std::move(ss), std::move(sub)),
                              suby, cfg, subt);
    for (std::int64_t j = 0; j < n; ++j)
      if (res.success[j]) rep.robust[idx[j]] = 0;
    ++rep.stages;
  };

  run_stage(AttackLoss::Ce, rep.iters, 0, 0);
  if (protocol == Protocol::Standard && K >= 4) {
    int targets = std::min<std::int64_t>(dlr_targets, K - 1);
    for (int r = 0; r < targets; ++r)
      run_stage(AttackLoss::DlrTargeted, rep.iters, r + 1, r);
  }

  std::int64_t clean = 0, robust = 0;
  for (std::int64_t i = 0; i < N; ++i) {
    clean += rep.clean_correct[i];
    robust += rep.robust[i];
  }
  rep.clean_acc = static_cast<double>(clean) / static_cast<double>(N);
  rep.robust_acc = static_cast<double>(robust) / static_cast<double>(N);
  return rep;
}

}  // namespace advlab::attack
