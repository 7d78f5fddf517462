// Acceptance gate: one check per externally stated requirement.  Each check
// prints exactly one PASS/FAIL line; a numeric argument runs a single check,
// no argument runs them all.  Exit 0 iff everything selected passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "advlab/analyzer.hpp"
#include "advlab/arch.hpp"
#include "advlab/attack.hpp"
#include "advlab/checkpoint.hpp"
#include "advlab/cli.hpp"
#include "advlab/data.hpp"
#include "advlab/rng.hpp"
#include "advlab/sweep.hpp"
#include "advlab/tensor.hpp"
#include "advlab/threat.hpp"
#include "advlab/train.hpp"
#include "oracles.hpp"

using namespace advlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::vector<double> randn_vec(Rng& rng, std::int64_t n, double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.normal() * scale;
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream is(line);
  while (std::getline(is, tok, ',')) out.push_back(tok);
  return out;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f.good()) return "<unreadable:" + p.string() + ">";
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

fs::path fresh_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct ToolResult {
  int code;
  std::string out, err;
};

ToolResult run_tool(std::vector<std::string> args) {
  std::stringstream so, se;
  auto* co = std::cout.rdbuf(so.rdbuf());
  auto* ce = std::cerr.rdbuf(se.rdbuf());
  int code = cli::run_cli(std::move(args));
  std::cout.rdbuf(co);
  std::cerr.rdbuf(ce);
  return {code, so.str(), se.str()};
}

template <typename S>
attack::ForwardFn<S> linear_model(Tensor<S> w, Tensor<S> b) {
  return [w, b](const Tensor<S>& x) {
    auto flat = reshape(x, {x.shape()[0], numel(x.shape()) / x.shape()[0]});
    return linear(flat, w, &b);
  };
}

// ---------------------------------------------------------------------------
// 1. full-size cost table against the published per-model figures
// ---------------------------------------------------------------------------

Outcome check_cost_table() {
  auto t0 = Clock::now();
  // published figures: millions of parameters (exact to 0.01M) and GMACs
  // (matched within 2%)
  static const std::map<std::string, std::pair<double, double>> kPublished = {
      {"convnext-t", {28.59, 4.47}},
      {"convnext-t+convstem", {28.63, 4.60}},
      {"convnext-s", {50.10, 8.70}},
      {"convnext-s+convstem", {50.33, 8.79}},
      {"convnext-b", {88.59, 15.38}},
      {"convnext-b+convstem", {88.75, 15.97}},
      {"vit-s", {22.05, 4.61}},
      {"vit-s+convstem", {22.78, 4.99}},
      {"vit-m", {38.85, 8.01}},
      {"vit-m+convstem", {39.53, 8.38}},
      {"vit-b", {86.57, 17.58}},
      {"vit-b+convstem", {87.14, 17.93}},
      {"isotropic-convnext-s", {22.31, 4.29}},
      {"isotropic-convnext-s+convstem", {23.04, 4.67}},
  };

  auto r = run_tool({"analyze", "--presets", "fullsize", "--format", "csv"});
  if (r.code != 0)
    return {false, "analyze exited " + std::to_string(r.code) + ": " + r.err};

  int rows = 0, param_ok = 0, mac_ok = 0;
  std::string bad;
  std::istringstream is(r.out);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < 3) return {false, "malformed row: " + line};
    auto it = kPublished.find(f[0]);
    if (it == kPublished.end()) return {false, "unexpected row: " + f[0]};
    ++rows;
    const double params = std::stod(f[1]);
    const double gmacs = std::stod(f[2]) / 1e9;
    const long long got_cm = std::llround(params / 1e4);  // 0.01M units
    const long long want_cm = std::llround(it->second.first * 100.0);
    if (got_cm == want_cm) {
      ++param_ok;
    } else {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s params %.2f want %.2f; ",
                    f[0].c_str(), static_cast<double>(got_cm) / 100.0,
                    it->second.first);
      bad += buf;
    }
    const double rel = std::abs(gmacs - it->second.second) / it->second.second;
    if (rel <= 0.02) {
      ++mac_ok;
    } else {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s gmacs %.3f want %.2f; ", f[0].c_str(),
                    gmacs, it->second.second);
      bad += buf;
    }
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << param_ok << "/14 parameter rows exact, " << mac_ok
     << "/14 mac rows within 2%, " << fmt(dt, 3) << "s";
  if (!bad.empty()) os << " -- " << bad;
  if (rows != 14) return {false, "expected 14 rows, got " + std::to_string(rows)};
  return {param_ok == 14 && mac_ok == 14 && dt < 5.0, os.str()};
}

// ---------------------------------------------------------------------------
// 2. ball and ball-within-box projections against the bisection oracle
// ---------------------------------------------------------------------------

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

Outcome check_projections() {
  auto t0 = Clock::now();
  const int kInstances = 200;
  int bad = 0;
  std::string first;
  auto flag = [&](int i, const char* what, double gap) {
    ++bad;
    if (first.empty())
      first = "instance " + std::to_string(i) + " " + what + " gap " + fmt(gap);
  };

  for (int i = 0; i < kInstances; ++i) {
    Rng rng(derive_seed(2024, "proj" + std::to_string(i)));
    const int d = 1 + static_cast<int>(rng.below(8));
    std::vector<double> x(d), v0(d), lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
      x[j] = 0.01 + 0.98 * rng.uniform();
      v0[j] = 1.5 * rng.normal();
      lo[j] = -x[j];
      hi[j] = 1.0 - x[j];
    }
    const double eps2 = 0.05 + 1.45 * rng.uniform();
    const double eps1 = 0.05 + 2.95 * rng.uniform();
    const double epsi = 0.02 + 0.6 * rng.uniform();

    {  // joint l2 ball-and-box
      auto got = v0;
      threat::project(got, x, {threat::Norm::L2, eps2});
      auto want = oracle::project_l2_box(v0, lo, hi, eps2);
      double gap = std::abs(sq_dist(got, v0) - sq_dist(want, v0));
      double n2 = std::sqrt(sq_dist(got, std::vector<double>(d, 0.0)));
      bool feas = n2 <= eps2 + 1e-9;
      for (int j = 0; j < d; ++j)
        feas = feas && got[j] >= lo[j] - 1e-12 && got[j] <= hi[j] + 1e-12;
      if (gap > 1e-5 || !feas) flag(i, "l2-box", gap);
    }
    {  // joint l1 ball-and-box
      auto got = v0;
      threat::project(got, x, {threat::Norm::L1, eps1});
      auto want = oracle::project_l1_box(v0, lo, hi, eps1);
      double gap = std::abs(sq_dist(got, v0) - sq_dist(want, v0));
      double n1 = 0.0;
      bool feas = true;
      for (int j = 0; j < d; ++j) {
        n1 += std::abs(got[j]);
        feas = feas && got[j] >= lo[j] - 1e-12 && got[j] <= hi[j] + 1e-12;
      }
      if (gap > 1e-5 || !feas || n1 > eps1 + 1e-9) flag(i, "l1-box", gap);
    }
    {  // plain l2 ball: the scaled vector is the exact projection
      auto got = v0;
      threat::project_l2_ball(got, eps2);
      double n = std::sqrt(sq_dist(v0, std::vector<double>(d, 0.0)));
      double scale = n > eps2 ? eps2 / n : 1.0;
      std::vector<double> want(d);
      for (int j = 0; j < d; ++j) want[j] = v0[j] * scale;
      double gap = std::abs(sq_dist(got, v0) - sq_dist(want, v0));
      if (gap > 1e-5) flag(i, "l2-ball", gap);
    }
    {  // plain l1 ball against the soft-threshold oracle
      auto got = v0;
      threat::project_l1_ball(got, eps1);
      auto want = oracle::project_l1_ball(v0, eps1);
      double gap = std::abs(sq_dist(got, v0) - sq_dist(want, v0));
      if (gap > 1e-5) flag(i, "l1-ball", gap);
    }
    {  // joint linf must equal the per-coordinate clamp exactly
      auto got = v0;
      threat::project(got, x, {threat::Norm::Linf, epsi});
      for (int j = 0; j < d; ++j) {
        double w = std::clamp(std::clamp(v0[j], -epsi, epsi), lo[j], hi[j]);
        if (got[j] != w) flag(i, "linf-exact", std::abs(got[j] - w));
      }
    }
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << kInstances << " instances per projection, " << fmt(dt, 3) << "s";
  if (bad) os << " -- " << bad << " failures, first: " << first;
  return {bad == 0 && dt < 30.0, os.str()};
}

// ---------------------------------------------------------------------------
// 3. central finite differences across every differentiable op
// ---------------------------------------------------------------------------

// gradient of build()'s scalar output for each leaf vs central differences;
// returns the worst relative error seen
double grad_instance(std::vector<Tensor<double>*> leaves,
                     const std::function<Tensor<double>()>& build) {
  auto loss = build();
  backward(loss);
  auto value = [&] { return build().item(); };
  double worst = 0.0;
  for (auto* leaf : leaves) {
    if (!leaf->has_grad()) return std::numeric_limits<double>::infinity();
    std::vector<double> analytic(leaf->grad());
    auto numeric = oracle::fd_grad(*leaf, value);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      double rel = std::abs(analytic[i] - numeric[i]) /
                   std::max(1.0, std::abs(numeric[i]));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

Outcome check_gradients() {
  auto t0 = Clock::now();
  auto leafr = [](Rng& rng, Shape s, bool rg = true) {
    auto n = numel(s);
    return Tensor<double>::leaf(std::move(s), randn_vec(rng, n), rg);
  };
  // fixed random coefficients make the incoming gradient non-uniform
  auto reduce = [](const Tensor<double>& y, const Tensor<double>& r) {
    return vsum(mul(y, r));
  };

  using OpFn = std::function<double(std::uint64_t)>;
  std::vector<std::pair<std::string, OpFn>> ops;

  ops.emplace_back("add", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {2, 3}), b = leafr(rng, {2, 3});
    auto r = leafr(rng, {2, 3}, false);
    return grad_instance({&a, &b}, [&] { return reduce(add(a, b), r); });
  });
  ops.emplace_back("sub", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {3, 4}), b = leafr(rng, {3, 4});
    auto r = leafr(rng, {3, 4}, false);
    return grad_instance({&a, &b}, [&] { return reduce(sub(a, b), r); });
  });
  ops.emplace_back("mul", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {2, 5}), b = leafr(rng, {2, 5});
    auto r = leafr(rng, {2, 5}, false);
    return grad_instance({&a, &b}, [&] { return reduce(mul(a, b), r); });
  });
  ops.emplace_back("smul", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {3, 3});
    auto r = leafr(rng, {3, 3}, false);
    return grad_instance({&a}, [&] { return reduce(smul(a, -1.7), r); });
  });
  ops.emplace_back("vsum", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {2, 4});
    return grad_instance({&a}, [&] { return smul(vsum(a), 0.3); });
  });
  ops.emplace_back("reshape", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {2, 6});
    auto r = leafr(rng, {3, 4}, false);
    return grad_instance({&a}, [&] { return reduce(reshape(a, {3, 4}), r); });
  });
  ops.emplace_back("permute", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {2, 3, 4});
    auto r = leafr(rng, {4, 2, 3}, false);
    return grad_instance({&a},
                         [&] { return reduce(permute(a, {2, 0, 1}), r); });
  });
  ops.emplace_back("linear", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {3, 4}), w = leafr(rng, {5, 4}), b = leafr(rng, {5});
    auto r = leafr(rng, {3, 5}, false);
    return grad_instance({&x, &w, &b},
                         [&] { return reduce(linear(x, w, &b), r); });
  });
  ops.emplace_back("bmm", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {2, 3, 4}), b = leafr(rng, {2, 4, 2});
    auto r = leafr(rng, {2, 3, 2}, false);
    return grad_instance({&a, &b}, [&] { return reduce(bmm(a, b), r); });
  });
  ops.emplace_back("conv2d", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {1, 2, 5, 5}), w = leafr(rng, {3, 2, 3, 3});
    auto b = leafr(rng, {3});
    auto r = leafr(rng, {1, 3, 5, 5}, false);
    return grad_instance(
        {&x, &w, &b}, [&] { return reduce(conv2d(x, w, &b, 1, 1), r); });
  });
  ops.emplace_back("conv2d/stride2", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {1, 2, 6, 6}), w = leafr(rng, {4, 2, 3, 3});
    auto b = leafr(rng, {4});
    auto r = leafr(rng, {1, 4, 3, 3}, false);
    return grad_instance(
        {&x, &w, &b}, [&] { return reduce(conv2d(x, w, &b, 2, 1), r); });
  });
  ops.emplace_back("depthwise_conv2d", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {1, 3, 5, 5}), w = leafr(rng, {3, 1, 3, 3});
    auto b = leafr(rng, {3});
    auto r = leafr(rng, {1, 3, 5, 5}, false);
    return grad_instance({&x, &w, &b}, [&] {
      return reduce(depthwise_conv2d(x, w, &b, 1, 1), r);
    });
  });
  ops.emplace_back("layer_norm", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {4, 6}), g = leafr(rng, {6}), be = leafr(rng, {6});
    auto r = leafr(rng, {4, 6}, false);
    return grad_instance(
        {&x, &g, &be}, [&] { return reduce(layer_norm(x, g, be, 1e-6), r); });
  });
  ops.emplace_back("gelu", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {3, 5});
    auto r = leafr(rng, {3, 5}, false);
    return grad_instance({&a}, [&] { return reduce(gelu(a), r); });
  });
  ops.emplace_back("softmax_lastdim", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto a = leafr(rng, {3, 6});
    auto r = leafr(rng, {3, 6}, false);
    return grad_instance({&a}, [&] { return reduce(softmax_lastdim(a), r); });
  });
  ops.emplace_back("global_avg_pool_hw", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {2, 3, 4, 5});  // NHWC: pools the 3x4 grid
    auto r = leafr(rng, {2, 5}, false);
    return grad_instance({&x},
                         [&] { return reduce(global_avg_pool_hw(x), r); });
  });
  ops.emplace_back("select_token", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {2, 5, 4});
    auto r = leafr(rng, {2, 4}, false);
    return grad_instance({&x}, [&] { return reduce(select_token(x, 2), r); });
  });
  ops.emplace_back("prepend_token", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {2, 3, 4}), cls = leafr(rng, {4});
    auto r = leafr(rng, {2, 4, 4}, false);
    return grad_instance({&x, &cls},
                         [&] { return reduce(prepend_token(x, cls), r); });
  });
  ops.emplace_back("add_rows", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {2, 3, 4}), tab = leafr(rng, {3, 4});
    auto r = leafr(rng, {2, 3, 4}, false);
    return grad_instance({&x, &tab},
                         [&] { return reduce(add_rows(x, tab), r); });
  });
  ops.emplace_back("scale_lastdim", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {2, 3, 4}), g = leafr(rng, {4});
    auto r = leafr(rng, {2, 3, 4}, false);
    return grad_instance({&x, &g},
                         [&] { return reduce(scale_lastdim(x, g), r); });
  });
  ops.emplace_back("multihead_attention", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto x = leafr(rng, {2, 5, 8});
    AttentionWeights<double> w{leafr(rng, {8, 8}), leafr(rng, {8, 8}),
                               leafr(rng, {8, 8}), leafr(rng, {8, 8}),
                               leafr(rng, {8}),    leafr(rng, {8}),
                               leafr(rng, {8}),    leafr(rng, {8})};
    auto r = leafr(rng, {2, 5, 8}, false);
    return grad_instance(
        {&x, &w.wq, &w.wk, &w.wv, &w.wo, &w.bq, &w.bk, &w.bv, &w.bo},
        [&] { return reduce(multihead_attention(x, w, 2), r); });
  });
  // targets stay fixed: perturbing them would break the row-sum validation
  auto prob_rows = [](Rng& rng, std::int64_t n, std::int64_t k) {
    std::vector<double> t(static_cast<std::size_t>(n * k));
    for (std::int64_t i = 0; i < n; ++i) {
      double mx = -1e30, s = 0.0;
      for (std::int64_t c = 0; c < k; ++c) {
        t[i * k + c] = rng.normal();
        mx = std::max(mx, t[i * k + c]);
      }
      for (std::int64_t c = 0; c < k; ++c) {
        t[i * k + c] = std::exp(t[i * k + c] - mx);
        s += t[i * k + c];
      }
      for (std::int64_t c = 0; c < k; ++c) t[i * k + c] /= s;
    }
    return t;
  };
  ops.emplace_back("cross_entropy_per_example", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto z = leafr(rng, {4, 5});
    auto t = Tensor<double>::leaf({4, 5}, prob_rows(rng, 4, 5));
    auto r = leafr(rng, {4}, false);
    return grad_instance(
        {&z}, [&] { return reduce(cross_entropy_per_example(z, t), r); });
  });
  ops.emplace_back("cross_entropy", [&](std::uint64_t sd) {
    Rng rng(sd);
    auto z = leafr(rng, {4, 5});
    auto t = Tensor<double>::leaf({4, 5}, prob_rows(rng, 4, 5));
    return grad_instance({&z}, [&] { return cross_entropy(z, t); });
  });
  // bicubic_resize stays out: it returns a detached leaf by design and never
  // sits on the gradient tape

  const int kPerOp = 20;
  double worst = 0.0;
  std::string bad;
  for (auto& [name, fn] : ops) {
    double op_worst = 0.0;
    for (int k = 0; k < kPerOp; ++k)
      op_worst =
          std::max(op_worst, fn(derive_seed(31337, name + "/" + std::to_string(k))));
    worst = std::max(worst, op_worst);
    if (!(op_worst < 1e-4)) bad += name + " rel " + fmt(op_worst) + "; ";
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << ops.size() << " ops x " << kPerOp << " instances, worst rel "
     << fmt(worst, 3) << ", " << fmt(dt, 3) << "s";
  if (!bad.empty()) os << " -- " << bad;
  return {bad.empty() && dt < 120.0, os.str()};
}

// ---------------------------------------------------------------------------
// 4. attacks reach the closed-form worst case on binary linear models
// ---------------------------------------------------------------------------

Outcome check_closed_form() {
  const int kInstances = 100;
  int ok_pgd = 0, ok_apgd = 0;
  double worst_gap = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    Rng rng(derive_seed(501, "cf" + std::to_string(i)));
    const std::int64_t d = 2 + static_cast<std::int64_t>(rng.below(7));
    auto w = Tensor<double>::leaf({2, d}, randn_vec(rng, 2 * d));
    auto b = Tensor<double>::leaf({2}, randn_vec(rng, 2, 0.1));
    std::vector<double> xv(static_cast<std::size_t>(d));
    for (auto& v : xv) v = 0.3 + 0.4 * rng.uniform();
    auto x = Tensor<double>::leaf({1, d}, xv);
    const std::int64_t y = static_cast<std::int64_t>(rng.below(2));
    const std::int64_t o = 1 - y;
    const double eps = 0.02 + 0.08 * rng.uniform();

    // max_{|delta|_inf <= eps} CE = log1p(exp(u0 + eps * sum |w_o - w_y|));
    // the box never binds because x stays in [0.3, 0.7] and eps <= 0.1
    double u0 = b.data()[o] - b.data()[y];
    double reach = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      const double dw = w.data()[o * d + j] - w.data()[y * d + j];
      u0 += dw * xv[j];
      reach += std::abs(dw);
    }
    const double worst = std::log1p(std::exp(u0 + eps * reach));

    auto f = linear_model(w, b);
    attack::AttackConfig pc;
    pc.kind = attack::AttackKind::Pgd;
    pc.iters = 1;
    pc.step_size = 2.0 * eps;
    pc.tm = {threat::Norm::Linf, eps};
    pc.seed = derive_seed(502, "p" + std::to_string(i));
    auto rp = attack::pgd_attack(f, x, {y}, pc);

    attack::AttackConfig ac;
    ac.kind = attack::AttackKind::Apgd;
    ac.iters = 5;
    ac.tm = {threat::Norm::Linf, eps};
    ac.seed = derive_seed(502, "a" + std::to_string(i));
    auto ra = attack::apgd_attack(f, x, {y}, ac);

    const double gp = std::abs(rp.best_loss[0] - worst);
    const double ga = std::abs(ra.best_loss[0] - worst);
    worst_gap = std::max({worst_gap, gp, ga});
    if (rp.feasible[0] && gp <= 1e-6 && rp.best_loss[0] <= worst + 1e-9)
      ++ok_pgd;
    if (ra.feasible[0] && ga <= 1e-6 && ra.best_loss[0] <= worst + 1e-9)
      ++ok_apgd;
  }
  std::ostringstream os;
  os << "pgd " << ok_pgd << "/100, apgd " << ok_apgd << "/100, worst gap "
     << fmt(worst_gap, 3);
  return {ok_pgd == kInstances && ok_apgd == kInstances, os.str()};
}

// ---------------------------------------------------------------------------
// 5. micro adversarial training beats both of its baselines
// ---------------------------------------------------------------------------

double model_clean_acc(arch::Model<float>& m, const data::Dataset& ds) {
  auto logits = m.forward(ds.images);
  auto pred = attack::detail_attack::argmax_rows(logits.data(), ds.size(),
                                                 logits.shape()[1]);
  std::int64_t ok = 0;
  for (std::int64_t i = 0; i < ds.size(); ++i) ok += pred[i] == ds.labels[i];
  return static_cast<double>(ok) / static_cast<double>(ds.size());
}

double model_quick_robust(arch::Model<float>& m, const data::Dataset& ds,
                          const threat::ThreatModel& tm) {
  attack::ForwardFn<float> f = [&](const Tensor<float>& x) {
    return m.forward(x);
  };
  auto rep = attack::evaluate_robust_accuracy(f, ds.images, ds.labels, tm,
                                              attack::Protocol::Quick, 123);
  return rep.robust_acc;
}

Outcome check_micro_training() {
  auto t0 = Clock::now();
  auto all = data::synth_blobs(480, 3, 32, 0.15, 8);
  auto train_ds = data::slice(all, 0, 384);
  auto held = data::slice(all, 384, 96);
  const threat::ThreatModel tm{threat::Norm::Linf, 8.0 / 255.0};

  train::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.warmup_peak_epoch = 3;
  cfg.peak_lr = 1e-3;
  cfg.batch_size = 48;
  cfg.attack_steps = 2;
  cfg.attack_warmup_epochs = 10;
  cfg.tm = tm;
  cfg.augmentation = train::Augmentation::Basic;
  cfg.val_fraction = 0.0;
  cfg.seed = 10;

  auto adv = arch::build<float>(arch::preset_spec("micro-convnext+convstem"), 9);
  arch::replace_head(adv, 3, 10);
  auto run = train::adv_train(adv, train_ds, cfg);
  if (run.halted) return {false, "adversarial run halted: " + run.halt_reason};

  auto std_cfg = cfg;
  std_cfg.attack_steps = 0;
  auto plain = arch::build<float>(arch::preset_spec("micro-convnext+convstem"), 9);
  arch::replace_head(plain, 3, 10);
  auto run2 = train::adv_train(plain, train_ds, std_cfg);
  if (run2.halted) return {false, "standard run halted: " + run2.halt_reason};

  auto untrained =
      arch::build<float>(arch::preset_spec("micro-convnext+convstem"), 9);
  arch::replace_head(untrained, 3, 10);

  const double clean = model_clean_acc(adv, train_ds);
  const double rob_adv = model_quick_robust(adv, held, tm);
  const double rob_std = model_quick_robust(plain, held, tm);
  const double rob_un = model_quick_robust(untrained, held, tm);
  const double dt = seconds_since(t0);

  std::ostringstream os;
  os << "train clean " << fmt(clean) << ", held robust adv " << fmt(rob_adv)
     << " vs standard " << fmt(rob_std) << " vs untrained " << fmt(rob_un)
     << ", " << fmt(dt, 4) << "s";
  const bool pass =
      clean >= 0.9 && rob_adv > rob_std && rob_adv > rob_un && dt < 600.0;
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 6. attack engine contracts: monotone best loss, feasibility certificates,
//    robust <= clean rows, more iterations never help the defender
// ---------------------------------------------------------------------------

Outcome check_attack_contracts() {
  Rng rng(904);
  const std::int64_t N = 40, d = 8, K = 5;
  auto w = Tensor<double>::leaf({K, d}, randn_vec(rng, K * d, 0.7));
  auto b = Tensor<double>::leaf({K}, randn_vec(rng, K, 0.1));
  std::vector<double> xv(static_cast<std::size_t>(N * d));
  for (auto& v : xv) v = 0.2 + 0.6 * rng.uniform();
  auto x = Tensor<double>::leaf({N, d}, xv);
  auto f = linear_model(w, b);
  auto logits = f(x);
  auto pred = attack::detail_attack::argmax_rows(logits.data(), N, K);
  std::vector<std::int64_t> y(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i)
    y[i] = i % 2 == 0 ? pred[i] : static_cast<std::int64_t>(rng.below(K));

  std::string bad;

  {  // per-example best-loss trace never decreases and explains best_loss
    attack::AttackConfig cfg;
    cfg.iters = 10;
    cfg.tm = {threat::Norm::Linf, 0.05};
    cfg.seed = 5;
    auto res = attack::apgd_attack(f, x, y, cfg);
    for (std::size_t t = 1; t + 0 < res.best_trace.size() && bad.empty(); ++t)
      for (std::int64_t i = 0; i < N; ++i)
        if (res.best_trace[t][i] < res.best_trace[t - 1][i]) {
          bad += "trace decreased at step " + std::to_string(t) + "; ";
          break;
        }
    for (std::int64_t i = 0; i < N; ++i)
      if (std::abs(res.best_trace.back()[i] - res.best_loss[i]) > 1e-9) {
        bad += "best_loss disagrees with the trace; ";
        break;
      }
  }

  // feasibility certificates across every norm and both attacks
  for (auto tm : {threat::ThreatModel{threat::Norm::Linf, 0.05},
                  threat::ThreatModel{threat::Norm::L2, 0.5},
                  threat::ThreatModel{threat::Norm::L1, 2.0}}) {
    for (auto kind : {attack::AttackKind::Pgd, attack::AttackKind::Apgd}) {
      attack::AttackConfig cfg;
      cfg.kind = kind;
      cfg.iters = 5;
      cfg.step_size = kind == attack::AttackKind::Pgd ? tm.epsilon / 2.0 : 0.0;
      cfg.tm = tm;
      cfg.seed = 6;
      auto res = attack::run_attack(f, x, y, cfg);
      std::int64_t feas = 0;
      for (auto c : res.feasible) feas += c != 0;
      if (feas != N)
        bad += threat::norm_name(tm.p) + std::string(" feasible ") +
               std::to_string(feas) + "/" + std::to_string(N) + "; ";
    }
  }

  // robust <= clean on every report row, per example and in aggregate
  for (auto tm : {threat::ThreatModel{threat::Norm::Linf, 0.02},
                  threat::ThreatModel{threat::Norm::Linf, 0.05},
                  threat::ThreatModel{threat::Norm::L2, 0.3}}) {
    auto rep = attack::evaluate_robust_accuracy(f, x, y, tm,
                                                attack::Protocol::Quick, 7);
    if (rep.robust_acc > rep.clean_acc)
      bad += "aggregate robust > clean; ";
    for (std::int64_t i = 0; i < N; ++i)
      if (rep.robust[i] && !rep.clean_correct[i]) {
        bad += "robust example marked clean-wrong; ";
        break;
      }
  }

  {  // a 10-iteration attack never leaves more standing than a 2-iteration one
    const threat::ThreatModel tm{threat::Norm::Linf, 0.05};
    auto r10 = attack::evaluate_robust_accuracy(f, x, y, tm,
                                                attack::Protocol::Quick, 9, 10);
    auto r2 = attack::evaluate_robust_accuracy(f, x, y, tm,
                                               attack::Protocol::Quick, 9, 2);
    if (r10.robust_acc > r2.robust_acc)
      bad += "robust@10 " + fmt(r10.robust_acc) + " > robust@2 " +
             fmt(r2.robust_acc) + "; ";
  }

  {  // the same contracts hold on a real (micro) network
    auto ds = data::synth_blobs(16, 3, 32, 0.3, 33);
    auto m = arch::build<float>(arch::preset_spec("micro-convnext"), 3);
    arch::replace_head(m, 3, 4);
    attack::ForwardFn<float> mf = [&](const Tensor<float>& t) {
      return m.forward(t);
    };
    const threat::ThreatModel tm{threat::Norm::Linf, 8.0 / 255.0};
    auto r10 = attack::evaluate_robust_accuracy(mf, ds.images, ds.labels, tm,
                                                attack::Protocol::Quick, 11, 10);
    auto r2 = attack::evaluate_robust_accuracy(mf, ds.images, ds.labels, tm,
                                               attack::Protocol::Quick, 11, 2);
    if (r10.robust_acc > r2.robust_acc) bad += "micro robust@10 > robust@2; ";
    if (r10.robust_acc > r10.clean_acc) bad += "micro robust > clean; ";
    attack::AttackConfig cfg;
    cfg.iters = 10;
    cfg.tm = tm;
    cfg.seed = 12;
    auto res = attack::apgd_attack(mf, ds.images, ds.labels, cfg);
    for (auto c : res.feasible)
      if (!c) {
        bad += "micro attack infeasible example; ";
        break;
      }
  }

  return {bad.empty(), bad.empty() ? "trace, feasibility, report rows, "
                                     "iteration ordering all hold"
                                   : bad};
}

// ---------------------------------------------------------------------------
// 7. resolution protocol: resize arithmetic, positional-table identity,
//    linear l2 radius scaling
// ---------------------------------------------------------------------------

Tensor<float> random_images(std::int64_t n, std::int64_t c, std::int64_t h,
                            std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(static_cast<std::size_t>(n * c * h * w));
  for (auto& x : v) x = static_cast<float>(rng.uniform());
  return Tensor<float>::leaf({n, c, h, w}, std::move(v));
}

Outcome check_resolution_protocol() {
  std::string bad;

  if (std::llround(224.0 / 0.875) != 256) bad += "intermediate size != 256; ";

  {  // 256 input: the pipeline must reduce to the centered 224 crop, bit-exact
    auto x = random_images(2, 3, 256, 256, 71);
    auto y = sweep::resize_pipeline(x, 224, 0.875);
    if (y.shape() != Shape{2, 3, 224, 224}) bad += "crop-path shape; ";
    const auto& xv = x.data();
    const auto& yv = y.data();
    for (std::int64_t p = 0; p < 2 * 3 && bad.empty(); ++p)
      for (std::int64_t i = 0; i < 224; ++i)
        for (std::int64_t j = 0; j < 224; ++j)
          if (yv[(p * 224 + i) * 224 + j] !=
              xv[(p * 256 + 16 + i) * 256 + 16 + j]) {
            bad += "crop-path bits; ";
            i = j = 224;
          }
  }
  {  // 128 input: resample to 256 on the short side, then the same crop
    auto x = random_images(1, 3, 128, 128, 72);
    auto y = sweep::resize_pipeline(x, 224, 0.875);
    auto mid = bicubic_resize_raw(x.data().data(), 3, 128, 128, 256, 256);
    const auto& yv = y.data();
    for (std::int64_t c = 0; c < 3 && bad.empty(); ++c)
      for (std::int64_t i = 0; i < 224; ++i)
        for (std::int64_t j = 0; j < 224; ++j)
          if (yv[(c * 224 + i) * 224 + j] !=
              mid[(c * 256 + 16 + i) * 256 + 16 + j]) {
            bad += "resample-path bits; ";
            i = j = 224;
          }
  }
  {  // positional table: identity at the build grid, token row untouched
    auto m = arch::build<float>(arch::preset_spec("micro-vit"), 11);
    const auto before = m.param("pos_embed").data();
    arch::interpolate_pos_embed(m, 4);
    const auto& same = m.param("pos_embed").data();
    if (same.size() != before.size() ||
        std::memcmp(same.data(), before.data(),
                    before.size() * sizeof(float)) != 0)
      bad += "identity resample changed the table; ";
    arch::interpolate_pos_embed(m, 6);
    if (m.param("pos_embed").shape() != Shape{37, 64})
      bad += "6x6 table shape; ";
    for (int k = 0; k < 64; ++k)
      if (m.param("pos_embed").data()[k] != before[k]) {
        bad += "token row changed; ";
        break;
      }
  }
  if (sweep::scale_epsilon_l2(2.0, 224, 224) != 2.0) bad += "base radius; ";
  if (sweep::scale_epsilon_l2(2.0, 224, 288) != 2.0 * 288 / 224)
    bad += "288 radius; ";

  return {bad.empty(),
          bad.empty() ? "intermediate 256, bit-exact crop and table identity, "
                        "linear radius"
                      : bad};
}

// ---------------------------------------------------------------------------
// 8. two seeded end-to-end runs agree bit for bit; checkpoints round-trip
// ---------------------------------------------------------------------------

Outcome check_determinism() {
  auto run_suite = [](const fs::path& dir, std::string& cat) -> std::string {
    auto r1 = run_tool({"train", "--model", "micro-convnext+convstem",
                        "--synth", "48,3,32,0.3,5", "--epochs", "2",
                        "--attack-steps", "1", "--batch-size", "24",
                        "--val-fraction", "0.25", "--seed", "11", "--out",
                        (dir / "run").string()});
    if (r1.code != 0) return "train exited " + std::to_string(r1.code) + ": " + r1.err;
    cat += r1.out;
    const auto ck = (dir / "run.epoch002.ckpt").string();
    auto r2 = run_tool({"attack", "--ckpt", ck, "--synth", "24,3,32,0.3,6",
                        "--tm", "linf:0.0157", "--iters", "3", "--seed", "4",
                        "--out", (dir / "atk.csv").string()});
    if (r2.code != 0) return "attack exited " + std::to_string(r2.code) + ": " + r2.err;
    cat += r2.out;
    auto r3 = run_tool({"sweep-resolution", "--ckpt", ck, "--synth",
                        "24,3,32,0.3,6", "--resolutions", "32,64", "--tm",
                        "linf:0.0157", "--iters", "2", "--seed", "4", "--out",
                        (dir / "sweep.csv").string()});
    if (r3.code != 0) return "sweep exited " + std::to_string(r3.code) + ": " + r3.err;
    cat += r3.out;
    return "";
  };

  auto da = fresh_dir("advlab_accept_a");
  auto db = fresh_dir("advlab_accept_b");
  std::string cat_a, cat_b;
  if (auto e = run_suite(da, cat_a); !e.empty()) return {false, "run a: " + e};
  if (auto e = run_suite(db, cat_b); !e.empty()) return {false, "run b: " + e};

  std::string bad;
  if (cat_a != cat_b) bad += "stdout differs; ";
  for (const char* name : {"run.config", "run.log.csv", "run.epoch001.ckpt",
                           "run.epoch002.ckpt", "atk.csv", "sweep.csv"})
    if (read_bytes(da / name) != read_bytes(db / name))
      bad += std::string(name) + " differs; ";

  // byte-exact persistence round trip
  auto c = ckpt::load_checkpoint((da / "run.epoch002.ckpt").string());
  ckpt::save_checkpoint(c, (da / "roundtrip.ckpt").string());
  if (read_bytes(da / "run.epoch002.ckpt") != read_bytes(da / "roundtrip.ckpt"))
    bad += "round trip differs; ";

  return {bad.empty(), bad.empty() ? "train + attack + sweep logs, "
                                     "checkpoints and round trip identical"
                                   : bad};
}

// ---------------------------------------------------------------------------
// 9. schedule, optimizer and smoothing unit values
// ---------------------------------------------------------------------------

Outcome check_unit_values() {
  std::string bad;
  if (train::cosine_warmup_lr(10, 100, 10, 1e-3) != 1e-3)
    bad += "warmup peak lr; ";

  std::vector<double> p = {1.25, -0.75, 0.5};
  const std::vector<double> orig = p;
  train::AdamW<double> opt(0.05);
  opt.step({{&p, nullptr}}, 1e-3);
  for (int i = 0; i < 3; ++i)
    if (p[i] != orig[i] * (1.0 - 1e-3 * 0.05)) {
      bad += "zero-grad decay step; ";
      break;
    }

  auto t = train::label_smooth<double>({3}, 0.1, 10);
  if (t.data()[3] != 0.91) bad += "true-class mass; ";
  for (int k = 0; k < 10; ++k)
    if (k != 3 && t.data()[k] != 0.01) {
      bad += "off-class mass; ";
      break;
    }
  double s = 0.0;
  for (int k = 0; k < 10; ++k) s += t.data()[k];
  if (std::abs(s - 1.0) > 1e-12) bad += "row sum; ";

  return {bad.empty(), bad.empty() ? "peak lr 1e-3, decay factor exact, "
                                     "smoothed mass 0.91"
                                   : bad};
}

struct Criterion {
  const char* title;
  Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {"full-size cost table matches the published figures", check_cost_table},
    {"ball and box projections match the bisection oracle", check_projections},
    {"finite-difference gradient suite", check_gradients},
    {"attacks reach the closed-form worst case on linear models",
     check_closed_form},
    {"micro adversarial training beats its baselines", check_micro_training},
    {"attack engine contracts", check_attack_contracts},
    {"resolution protocol arithmetic", check_resolution_protocol},
    {"seeded end-to-end runs are bit-reproducible", check_determinism},
    {"schedule and optimizer unit values", check_unit_values},
};

int run_one(int k) {
  Outcome o;
  try {
    o = kCriteria[k - 1].fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s %d: %s%s%s\n", o.pass ? "PASS" : "FAIL", k,
              kCriteria[k - 1].title, o.detail.empty() ? "" : " -- ",
              o.detail.c_str());
  std::fflush(stdout);
  return o.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) {
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > 9) {
      std::fprintf(stderr, "usage: acceptance [1-9]\n");
      return 2;
    }
    return run_one(k);
  }
  int failures = 0;
  for (int k = 1; k <= 9; ++k) failures += run_one(k);
  return failures ? 1 : 0;
}
