#pragma once

// Dense N-d tensor with reverse-mode automatic differentiation.
//
// Design: define-by-run.  Every operation allocates a fresh node holding the
// result values, handles to its parents and a closure that maps the node's
// gradient back onto the parents.  backward() topologically sorts the
// reachable subgraph and runs the closures in reverse order, so each node is
// visited exactly once and gradient accumulation order is deterministic.
//
// The scalar type is a template parameter: runtime code uses float, numeric
// verification (finite-difference gradient checks) instantiates double.
//
// Every forward op scans its output for NaN/Inf and throws, so non-finite
// values surface at the op that produced them instead of corrupting training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

namespace advlab {

using Shape = std::vector<std::int64_t>;

struct TensorError : std::runtime_error {
  explicit TensorError(const std::string& what) : std::runtime_error(what) {}
};

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * s[i + 1];
  return st;
}

template <typename S>
struct Node {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // allocated lazily, same extent as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<S>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), S(0));
    return grad;
  }
};

template <typename S>
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<S>> n) : node_(std::move(n)) {}

  static Tensor leaf(Shape shape, std::vector<S> data, bool requires_grad = false) {
    if (numel(shape) != static_cast<std::int64_t>(data.size()))
      throw TensorError("leaf: shape " + shape_str(shape) + " wants " +
                        std::to_string(numel(shape)) + " values, got " +
                        std::to_string(data.size()));
    auto n = std::make_shared<Node<S>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<S> d(static_cast<std::size_t>(numel(shape)), S(0));
    return leaf(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor full(Shape shape, S v, bool requires_grad = false) {
    std::vector<S> d(static_cast<std::size_t>(numel(shape)), v);
    return leaf(std::move(shape), std::move(d), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->value.size()); }
  const std::vector<S>& data() const { return node_->value; }
  std::vector<S>& mutable_data() { return node_->value; }
  const std::vector<S>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }
  void zero_grad() { node_->grad.clear(); }
  const char* op() const { return node_->op; }

  S item() const {
    if (node_->value.size() != 1)
      throw TensorError("item: tensor has " + std::to_string(node_->value.size()) +
                        " values, expected scalar");
    return node_->value[0];
  }

  std::shared_ptr<Node<S>> node() const { return node_; }

private:
  std::shared_ptr<Node<S>> node_;
};

namespace detail {

template <typename S>
inline void check_finite(const Node<S>& n) {
  for (S v : n.value)
    if (!std::isfinite(static_cast<double>(v)))
      throw TensorError(std::string(n.op) + ": non-finite value in forward output");
}

template <typename S>
inline std::shared_ptr<Node<S>> make_node(const char* op, Shape shape,
                                          std::vector<std::shared_ptr<Node<S>>> parents) {
  auto n = std::make_shared<Node<S>>();
  n->op = op;
  n->shape = std::move(shape);
  n->value.assign(static_cast<std::size_t>(numel(n->shape)), S(0));
  n->parents = std::move(parents);
  for (auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

// C[M,N] += A[M,K] * B[K,N]
template <typename S>
void gemm_acc(const S* A, const S* B, S* C, std::int64_t M, std::int64_t K,
              std::int64_t N) {
  for (std::int64_t i = 0; i < M; ++i)
    for (std::int64_t k = 0; k < K; ++k) {
      S a = A[i * K + k];
      if (a == S(0)) continue;
      const S* b = B + k * N;
      S* c = C + i * N;
      for (std::int64_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
}

// C[M,N] += A[M,K] * B[N,K]^T
template <typename S>
void gemm_nt_acc(const S* A, const S* B, S* C, std::int64_t M, std::int64_t K,
                 std::int64_t N) {
  for (std::int64_t i = 0; i < M; ++i)
    for (std::int64_t j = 0; j < N; ++j) {
      const S* a = A + i * K;
      const S* b = B + j * K;
      S acc = S(0);
      for (std::int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
      C[i * N + j] += acc;
    }
}

// C[K,N] += A[M,K]^T * B[M,N]
template <typename S>
void gemm_tn_acc(const S* A, const S* B, S* C, std::int64_t M, std::int64_t K,
                 std::int64_t N) {
  for (std::int64_t m = 0; m < M; ++m) {
    const S* a = A + m * K;
    const S* b = B + m * N;
    for (std::int64_t k = 0; k < K; ++k) {
      S av = a[k];
      if (av == S(0)) continue;
      S* c = C + k * N;
      for (std::int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Populates grad on every reachable node with requires_grad, seeding the
// scalar loss with gradient 1.  Deterministic: traversal order depends only
// on graph structure.
template <typename S>
void backward(const Tensor<S>& loss) {
  if (loss.size() != 1)
    throw TensorError("backward: loss must be scalar, got shape " +
                      shape_str(loss.shape()));
  if (!loss.requires_grad())
    throw TensorError("backward: loss does not depend on any differentiable leaf");

  // iterative post-order DFS
  std::vector<Node<S>*> order;
  std::vector<std::pair<Node<S>*, std::size_t>> stack;
  std::unordered_set<Node<S>*> seen;
  stack.push_back({loss.node().get(), 0});
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node<S>* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise and reduction ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape())
    throw TensorError("add: shape " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  auto n = detail::make_node<S>("add", a.shape(), {a.node(), b.node()});
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) n->value[i] = av[i] + bv[i];
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [](Node<S>& self) {
      for (int pi = 0; pi < 2; ++pi) {
        auto& p = self.parents[pi];
        if (!p->requires_grad) continue;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    };
  return Tensor<S>(n);
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape())
    throw TensorError("sub: shape " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  auto n = detail::make_node<S>("sub", a.shape(), {a.node(), b.node()});
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) n->value[i] = av[i] - bv[i];
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [](Node<S>& self) {
      if (self.parents[0]->requires_grad) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (self.parents[1]->requires_grad) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
      }
    };
  return Tensor<S>(n);
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape())
    throw TensorError("mul: shape " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  auto n = detail::make_node<S>("mul", a.shape(), {a.node(), b.node()});
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) n->value[i] = av[i] * bv[i];
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [](Node<S>& self) {
      const auto& av = self.parents[0]->value;
      const auto& bv = self.parents[1]->value;
      if (self.parents[0]->requires_grad) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
      }
      if (self.parents[1]->requires_grad) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
      }
    };
  return Tensor<S>(n);
}

template <typename S>
Tensor<S> smul(const Tensor<S>& x, S c) {
  auto n = detail::make_node<S>("smul", x.shape(), {x.node()});
  const auto& xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) n->value[i] = xv[i] * c;
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [c](Node<S>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * c;
    };
  return Tensor<S>(n);
}

template <typename S>
Tensor<S> vsum(const Tensor<S>& x) {
  auto n = detail::make_node<S>("sum", Shape{}, {x.node()});
  S acc = S(0);
  for (S v : x.data()) acc += v;
  n->value[0] = acc;
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [](Node<S>& self) {
      auto& g = self.parents[0]->ensure_grad();
      S gy = self.grad[0];
      for (auto& v : g) v += gy;
    };
  return Tensor<S>(n);
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw TensorError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                      shape_str(shape));
  auto n = detail::make_node<S>("reshape", std::move(shape), {x.node()});
  n->value = x.data();
  if (n->requires_grad)
    n->backward_fn = [](Node<S>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    };
  return Tensor<S>(n);
}

namespace detail {
// out[perm-mapped idx] = in[idx]; used by permute forward and backward.
template <typename S>
void permute_copy(const Shape& in_shape, const std::vector<S>& in,
                  const std::vector<int>& perm, std::vector<S>& out, bool accumulate) {
  const std::size_t r = in_shape.size();
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in_shape[perm[i]];
  auto in_str = row_major_strides(in_shape);
  auto out_str = row_major_strides(out_shape);
  // stride of output axis i in terms of input linear index
  std::vector<std::int64_t> map_str(r);
  for (std::size_t i = 0; i < r; ++i) map_str[i] = in_str[perm[i]];
  const std::int64_t total = numel(in_shape);
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t src = 0;
  for (std::int64_t o = 0; o < total; ++o) {
    if (accumulate)
      out[src] += in[o];  // caller swaps roles for backward
    else
      out[o] = in[src];
    // advance output multi-index, tracking src
    for (int ax = static_cast<int>(r) - 1; ax >= 0; --ax) {
      if (++idx[ax] < out_shape[ax]) {
        src += map_str[ax];
        break;
      }
      src -= map_str[ax] * (out_shape[ax] - 1);
      idx[ax] = 0;
    }
  }
}
}  // namespace detail

template <typename S>
Tensor<S> permute(const Tensor<S>& x, std::vector<int> perm) {
  const auto& xs = x.shape();
  if (perm.size() != xs.size())
    throw TensorError("permute: rank " + std::to_string(xs.size()) + " vs perm size " +
                      std::to_string(perm.size()));
  Shape out_shape(xs.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = xs[perm[i]];
  auto n = detail::make_node<S>("permute", out_shape, {x.node()});
  detail::permute_copy(xs, x.data(), perm, n->value, false);
  if (n->requires_grad)
    n->backward_fn = [perm](Node<S>& self) {
      // dIn[src] += dOut[o] along the same index walk
      auto& g = self.parents[0]->ensure_grad();
      detail::permute_copy(self.parents[0]->shape, self.grad, perm, g, true);
    };
  return Tensor<S>(n);
}

// ---------------------------------------------------------------------------
// broadcast helpers: bias-style adds and per-channel scaling
// ---------------------------------------------------------------------------

// y[n, ...] = x[n, ...] + table[...]  (broadcast over leading axis)
template <typename S>
Tensor<S> add_rows(const Tensor<S>& x, const Tensor<S>& table) {
  const auto& xs = x.shape();
  Shape rest(xs.begin() + 1, xs.end());
  if (table.shape() != rest)
    throw TensorError("add_rows: table shape " + shape_str(table.shape()) +
                      " does not match trailing dims of " + shape_str(xs));
  auto n = detail::make_node<S>("add_rows", xs, {x.node(), table.node()});
  const std::int64_t rows = xs[0], cols = numel(rest);
  const auto& xv = x.data();
  const auto& tv = table.data();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      n->value[r * cols + c] = xv[r * cols + c] + tv[c];
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [rows, cols](Node<S>& self) {
      if (self.parents[0]->requires_grad) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (self.parents[1]->requires_grad) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
      }
    };
  return Tensor<S>(n);
}

// y[..., c] = x[..., c] * gamma[c]
template <typename S>
Tensor<S> scale_lastdim(const Tensor<S>& x, const Tensor<S>& gamma) {
  const auto& xs = x.shape();
  const std::int64_t C = xs.back();
  if (gamma.shape() != Shape{C})
    throw TensorError("scale_lastdim: gamma shape " + shape_str(gamma.shape()) +
                      " vs channel dim " + std::to_string(C));
  auto n = detail::make_node<S>("scale_lastdim", xs, {x.node(), gamma.node()});
  const std::int64_t rows = x.size() / C;
  const auto& xv = x.data();
  const auto& gv = gamma.data();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < C; ++c)
      n->value[r * C + c] = xv[r * C + c] * gv[c];
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [rows, C](Node<S>& self) {
      const auto& xv = self.parents[0]->value;
      const auto& gv = self.parents[1]->value;
      if (self.parents[0]->requires_grad) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t c = 0; c < C; ++c)
            g[r * C + c] += self.grad[r * C + c] * gv[c];
      }
      if (self.parents[1]->requires_grad) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t c = 0; c < C; ++c)
            g[c] += self.grad[r * C + c] * xv[r * C + c];
      }
    };
  return Tensor<S>(n);
}

// ---------------------------------------------------------------------------
// linear / batched matmul
// ---------------------------------------------------------------------------

// y[..., out] = x[..., in] @ W[out, in]^T + b[out]
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w,
                 std::type_identity_t<const Tensor<S>*> b = nullptr) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (ws.size() != 2)
    throw TensorError("linear: weight must be 2-d, got " + shape_str(ws));
  const std::int64_t in = ws[1], out = ws[0];
  if (xs.empty() || xs.back() != in)
    throw TensorError("linear: input last dim " + shape_str(xs) +
                      " does not match weight in=" + std::to_string(in));
  if (b && b->shape() != Shape{out})
    throw TensorError("linear: bias shape " + shape_str(b->shape()) + " vs out=" +
                      std::to_string(out));
  Shape out_shape(xs);
  out_shape.back() = out;
  std::vector<std::shared_ptr<Node<S>>> parents{x.node(), w.node()};
  if (b) parents.push_back(b->node());
  auto n = detail::make_node<S>("linear", out_shape, std::move(parents));
  const std::int64_t rows = x.size() / in;
  detail::gemm_nt_acc(x.data().data(), w.data().data(), n->value.data(), rows, in, out);
  if (b) {
    const auto& bv = b->data();
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t o = 0; o < out; ++o) n->value[r * out + o] += bv[o];
  }
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [rows, in, out](Node<S>& self) {
      const auto& gy = self.grad;
      const auto& xv = self.parents[0]->value;
      const auto& wv = self.parents[1]->value;
      if (self.parents[0]->requires_grad)
        detail::gemm_acc(gy.data(), wv.data(), self.parents[0]->ensure_grad().data(),
                         rows, out, in);
      if (self.parents[1]->requires_grad)
        detail::gemm_tn_acc(gy.data(), xv.data(), self.parents[1]->ensure_grad().data(),
                            rows, out, in);
      if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
        auto& gb = self.parents[2]->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t o = 0; o < out; ++o) gb[o] += gy[r * out + o];
      }
    };
  return Tensor<S>(n);
}

// C[b] = A[b] @ B[b] over a shared leading batch axis
template <typename S>
Tensor<S> bmm(const Tensor<S>& a, const Tensor<S>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[1])
    throw TensorError("bmm: incompatible shapes " + shape_str(as) + " x " +
                      shape_str(bs));
  const std::int64_t B = as[0], M = as[1], K = as[2], N = bs[2];
  auto n = detail::make_node<S>("bmm", Shape{B, M, N}, {a.node(), b.node()});
  for (std::int64_t i = 0; i < B; ++i)
    detail::gemm_acc(a.data().data() + i * M * K, b.data().data() + i * K * N,
                     n->value.data() + i * M * N, M, K, N);
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [B, M, K, N](Node<S>& self) {
      const auto& gy = self.grad;
      const auto& av = self.parents[0]->value;
      const auto& bv = self.parents[1]->value;
      if (self.parents[0]->requires_grad) {
        auto& ga = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < B; ++i)
          detail::gemm_nt_acc(gy.data() + i * M * N, bv.data() + i * K * N,
                              ga.data() + i * M * K, M, N, K);
      }
      if (self.parents[1]->requires_grad) {
        auto& gb = self.parents[1]->ensure_grad();
        for (std::int64_t i = 0; i < B; ++i)
          detail::gemm_tn_acc(av.data() + i * M * K, gy.data() + i * M * N,
                              gb.data() + i * K * N, M, K, N);
      }
    };
  return Tensor<S>(n);
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

namespace detail {

// col[(ci*k + ki)*k + kj][oh*Wo + ow] for one sample and channel range
template <typename S>
void im2col(const S* img, std::int64_t C, std::int64_t H, std::int64_t W,
            std::int64_t k, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
            std::int64_t Wo, S* col) {
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t ki = 0; ki < k; ++ki)
      for (std::int64_t kj = 0; kj < k; ++kj) {
        S* dst = col + ((c * k + ki) * k + kj) * Ho * Wo;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          std::int64_t ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) {
            for (std::int64_t ow = 0; ow < Wo; ++ow) dst[oh * Wo + ow] = S(0);
            continue;
          }
          const S* src = img + (c * H + ih) * W;
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            std::int64_t iw = ow * stride - pad + kj;
            dst[oh * Wo + ow] = (iw < 0 || iw >= W) ? S(0) : src[iw];
          }
        }
      }
}

template <typename S>
void col2im_acc(const S* col, std::int64_t C, std::int64_t H, std::int64_t W,
                std::int64_t k, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
                std::int64_t Wo, S* img) {
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t ki = 0; ki < k; ++ki)
      for (std::int64_t kj = 0; kj < k; ++kj) {
        const S* src = col + ((c * k + ki) * k + kj) * Ho * Wo;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          std::int64_t ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) continue;
          S* dst = img + (c * H + ih) * W;
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            std::int64_t iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < W) dst[iw] += src[oh * Wo + ow];
          }
        }
      }
}

}  // namespace detail

// input [N, Cin, H, W], weight [Cout, Cin/groups, k, k], bias [Cout]
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight,
                 std::type_identity_t<const Tensor<S>*> bias, std::int64_t stride,
                 std::int64_t padding,
                 std::int64_t groups = 1) {
  const auto& is = input.shape();
  const auto& ws = weight.shape();
  if (is.size() != 4)
    throw TensorError("conv2d: input must be NCHW, got " + shape_str(is));
  if (ws.size() != 4 || ws[2] != ws[3])
    throw TensorError("conv2d: weight must be [out, in/groups, k, k], got " +
                      shape_str(ws));
  const std::int64_t N = is[0], Cin = is[1], H = is[2], W = is[3];
  const std::int64_t Cout = ws[0], k = ws[2];
  if (Cin % groups != 0)
    throw TensorError("conv2d: in-channels " + std::to_string(Cin) +
                      " not divisible by groups " + std::to_string(groups));
  if (Cout % groups != 0)
    throw TensorError("conv2d: out-channels " + std::to_string(Cout) +
                      " not divisible by groups " + std::to_string(groups));
  if (ws[1] != Cin / groups)
    throw TensorError("conv2d: weight in-channel dim " + std::to_string(ws[1]) +
                      " != input channels/groups " + std::to_string(Cin / groups));
  if (stride < 1 || padding < 0)
    throw TensorError("conv2d: bad stride/padding");
  const std::int64_t Ho = (H + 2 * padding - k) / stride + 1;
  const std::int64_t Wo = (W + 2 * padding - k) / stride + 1;
  if (H + 2 * padding < k || W + 2 * padding < k)
    throw TensorError("conv2d: kernel " + std::to_string(k) +
                      " does not fit padded input " + shape_str(is));
  if (bias && bias->shape() != Shape{Cout})
    throw TensorError("conv2d: bias shape " + shape_str(bias->shape()) + " vs out=" +
                      std::to_string(Cout));

  std::vector<std::shared_ptr<Node<S>>> parents{input.node(), weight.node()};
  if (bias) parents.push_back(bias->node());
  auto n = detail::make_node<S>("conv2d", Shape{N, Cout, Ho, Wo}, std::move(parents));

  const std::int64_t Cg = Cin / groups, Og = Cout / groups;
  const std::int64_t ckk = Cg * k * k, hw = Ho * Wo;
  std::vector<S> col(static_cast<std::size_t>(ckk * hw));
  for (std::int64_t s = 0; s < N; ++s)
    for (std::int64_t g = 0; g < groups; ++g) {
      detail::im2col(input.data().data() + (s * Cin + g * Cg) * H * W, Cg, H, W, k,
                     stride, padding, Ho, Wo, col.data());
      detail::gemm_acc(weight.data().data() + g * Og * ckk, col.data(),
                       n->value.data() + (s * Cout + g * Og) * hw, Og, ckk, hw);
    }
  if (bias) {
    const auto& bv = bias->data();
    for (std::int64_t s = 0; s < N; ++s)
      for (std::int64_t c = 0; c < Cout; ++c) {
        S* dst = n->value.data() + (s * Cout + c) * hw;
        for (std::int64_t i = 0; i < hw; ++i) dst[i] += bv[c];
      }
  }
  detail::check_finite(*n);

  if (n->requires_grad)
    n->backward_fn = [N, Cin, H, W, Cout, k, stride, padding, groups, Ho,
                      Wo](Node<S>& self) {
      const std::int64_t Cg = Cin / groups, Og = Cout / groups;
      const std::int64_t ckk = Cg * k * k, hw = Ho * Wo;
      const auto& gy = self.grad;
      auto& in_node = *self.parents[0];
      auto& w_node = *self.parents[1];
      const bool need_gi = in_node.requires_grad;
      const bool need_gw = w_node.requires_grad;
      if (need_gi) in_node.ensure_grad();
      if (need_gw) w_node.ensure_grad();
      std::vector<S> col(static_cast<std::size_t>(ckk * hw));
      std::vector<S> dcol(static_cast<std::size_t>(ckk * hw));
      for (std::int64_t s = 0; s < N; ++s)
        for (std::int64_t g = 0; g < groups; ++g) {
          const S* gy_g = gy.data() + (s * Cout + g * Og) * hw;
          if (need_gw) {
            detail::im2col(in_node.value.data() + (s * Cin + g * Cg) * H * W, Cg, H,
                           W, k, stride, padding, Ho, Wo, col.data());
            detail::gemm_nt_acc(gy_g, col.data(),
                                w_node.grad.data() + g * Og * ckk, Og, hw, ckk);
          }
          if (need_gi) {
            std::fill(dcol.begin(), dcol.end(), S(0));
            detail::gemm_tn_acc(w_node.value.data() + g * Og * ckk, gy_g,
                                dcol.data(), Og, ckk, hw);
            detail::col2im_acc(dcol.data(), Cg, H, W, k, stride, padding, Ho, Wo,
                               in_node.grad.data() + (s * Cin + g * Cg) * H * W);
          }
        }
      if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
        auto& gb = self.parents[2]->ensure_grad();
        for (std::int64_t s = 0; s < N; ++s)
          for (std::int64_t c = 0; c < Cout; ++c) {
            const S* src = gy.data() + (s * Cout + c) * hw;
            S acc = S(0);
            for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
            gb[c] += acc;
          }
      }
    };
  return Tensor<S>(n);
}

// per-channel spatial convolution: groups == channels, "same"-style padding is
// the caller's choice.  weight [C, 1, k, k].
template <typename S>
Tensor<S> depthwise_conv2d(const Tensor<S>& input, const Tensor<S>& weight,
                           std::type_identity_t<const Tensor<S>*> bias,
                           std::int64_t stride,
                           std::int64_t padding) {
  const auto& is = input.shape();
  if (is.size() != 4)
    throw TensorError("depthwise_conv2d: input must be NCHW, got " + shape_str(is));
  return conv2d(input, weight, bias, stride, padding, /*groups=*/is[1]);
}

// ---------------------------------------------------------------------------
// normalization / activation / attention-adjacent ops
// ---------------------------------------------------------------------------

// normalizes the last (channel) axis to zero mean and unit variance, then
// applies the affine pair.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma,
                     const Tensor<S>& beta, double eps) {
  if (eps <= 0.0) throw TensorError("layer_norm: eps must be > 0");
  const auto& xs = x.shape();
  const std::int64_t C = xs.back();
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C})
    throw TensorError("layer_norm: affine shape " + shape_str(gamma.shape()) + "/" +
                      shape_str(beta.shape()) + " vs channel dim " +
                      std::to_string(C));
  auto n = detail::make_node<S>("layer_norm", xs,
                                {x.node(), gamma.node(), beta.node()});
  const std::int64_t rows = x.size() / C;
  const auto& xv = x.data();
  const auto& gv = gamma.data();
  const auto& bv = beta.data();
  std::vector<S> mean(rows), rstd(rows);
  for (std::int64_t r = 0; r < rows; ++r) {
    const S* px = xv.data() + r * C;
    S m = S(0);
    for (std::int64_t c = 0; c < C; ++c) m += px[c];
    m /= S(C);
    S var = S(0);
    for (std::int64_t c = 0; c < C; ++c) {
      S d = px[c] - m;
      var += d * d;
    }
    var /= S(C);
    S rs = S(1) / std::sqrt(var + S(eps));
    mean[r] = m;
    rstd[r] = rs;
    S* py = n->value.data() + r * C;
    for (std::int64_t c = 0; c < C; ++c) py[c] = (px[c] - m) * rs * gv[c] + bv[c];
  }
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [rows, C, mean = std::move(mean),
                      rstd = std::move(rstd)](Node<S>& self) {
      const auto& gy = self.grad;
      const auto& xv = self.parents[0]->value;
      const auto& gv = self.parents[1]->value;
      const bool need_gx = self.parents[0]->requires_grad;
      const bool need_gg = self.parents[1]->requires_grad;
      const bool need_gb = self.parents[2]->requires_grad;
      if (need_gx) self.parents[0]->ensure_grad();
      if (need_gg) self.parents[1]->ensure_grad();
      if (need_gb) self.parents[2]->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        const S* px = xv.data() + r * C;
        const S* pg = gy.data() + r * C;
        S m = mean[r], rs = rstd[r];
        if (need_gg || need_gb) {
          for (std::int64_t c = 0; c < C; ++c) {
            S xh = (px[c] - m) * rs;
            if (need_gg) self.parents[1]->grad[c] += pg[c] * xh;
            if (need_gb) self.parents[2]->grad[c] += pg[c];
          }
        }
        if (need_gx) {
          S sum_dg = S(0), sum_dgx = S(0);
          for (std::int64_t c = 0; c < C; ++c) {
            S dg = pg[c] * gv[c];
            S xh = (px[c] - m) * rs;
            sum_dg += dg;
            sum_dgx += dg * xh;
          }
          S* gx = self.parents[0]->grad.data() + r * C;
          for (std::int64_t c = 0; c < C; ++c) {
            S dg = pg[c] * gv[c];
            S xh = (px[c] - m) * rs;
            gx[c] += rs * (dg - sum_dg / S(C) - xh * sum_dgx / S(C));
          }
        }
      }
    };
  return Tensor<S>(n);
}

// exact erf form: x * Phi(x)
template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  auto n = detail::make_node<S>("gelu", x.shape(), {x.node()});
  const auto& xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double v = static_cast<double>(xv[i]);
    n->value[i] = static_cast<S>(v * 0.5 * (1.0 + std::erf(v * 0.7071067811865475244)));
  }
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [](Node<S>& self) {
      auto& g = self.parents[0]->ensure_grad();
      const auto& xv = self.parents[0]->value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        double v = static_cast<double>(xv[i]);
        double phi = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
        double pdf = 0.3989422804014326779 * std::exp(-0.5 * v * v);
        g[i] += self.grad[i] * static_cast<S>(phi + v * pdf);
      }
    };
  return Tensor<S>(n);
}

template <typename S>
Tensor<S> softmax_lastdim(const Tensor<S>& x) {
  const auto& xs = x.shape();
  const std::int64_t C = xs.back();
  auto n = detail::make_node<S>("softmax", xs, {x.node()});
  const std::int64_t rows = x.size() / C;
  const auto& xv = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S* px = xv.data() + r * C;
    S* py = n->value.data() + r * C;
    S mx = px[0];
    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, px[c]);
    S z = S(0);
    for (std::int64_t c = 0; c < C; ++c) {
      py[c] = std::exp(px[c] - mx);
      z += py[c];
    }
    for (std::int64_t c = 0; c < C; ++c) py[c] /= z;
  }
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [rows, C](Node<S>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        const S* y = self.value.data() + r * C;
        const S* gy = self.grad.data() + r * C;
        S dot = S(0);
        for (std::int64_t c = 0; c < C; ++c) dot += gy[c] * y[c];
        S* gx = g.data() + r * C;
        for (std::int64_t c = 0; c < C; ++c) gx[c] += y[c] * (gy[c] - dot);
      }
    };
  return Tensor<S>(n);
}

// mean over the two middle axes of [N, H, W, C] -> [N, C]
template <typename S>
Tensor<S> global_avg_pool_hw(const Tensor<S>& x) {
  const auto& xs = x.shape();
  if (xs.size() != 4)
    throw TensorError("global_avg_pool_hw: expected NHWC, got " + shape_str(xs));
  const std::int64_t N = xs[0], H = xs[1], W = xs[2], C = xs[3];
  auto n = detail::make_node<S>("global_avg_pool", Shape{N, C}, {x.node()});
  const auto& xv = x.data();
  const S inv = S(1) / S(H * W);
  for (std::int64_t s = 0; s < N; ++s)
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t w = 0; w < W; ++w)
        for (std::int64_t c = 0; c < C; ++c)
          n->value[s * C + c] += xv[((s * H + h) * W + w) * C + c] * inv;
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [N, H, W, C, inv](Node<S>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::int64_t s = 0; s < N; ++s)
        for (std::int64_t h = 0; h < H; ++h)
          for (std::int64_t w = 0; w < W; ++w)
            for (std::int64_t c = 0; c < C; ++c)
              g[((s * H + h) * W + w) * C + c] += self.grad[s * C + c] * inv;
    };
  return Tensor<S>(n);
}

// x[N, L, D] -> x[:, index, :]
template <typename S>
Tensor<S> select_token(const Tensor<S>& x, std::int64_t index) {
  const auto& xs = x.shape();
  if (xs.size() != 3 || index < 0 || index >= xs[1])
    throw TensorError("select_token: bad index " + std::to_string(index) + " for " +
                      shape_str(xs));
  const std::int64_t N = xs[0], L = xs[1], D = xs[2];
  auto n = detail::make_node<S>("select_token", Shape{N, D}, {x.node()});
  const auto& xv = x.data();
  for (std::int64_t s = 0; s < N; ++s)
    for (std::int64_t d = 0; d < D; ++d)
      n->value[s * D + d] = xv[(s * L + index) * D + d];
  if (n->requires_grad)
    n->backward_fn = [N, L, D, index](Node<S>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::int64_t s = 0; s < N; ++s)
        for (std::int64_t d = 0; d < D; ++d)
          g[(s * L + index) * D + d] += self.grad[s * D + d];
    };
  return Tensor<S>(n);
}

// prepend a learned token: [N, L, D] + [D] -> [N, L+1, D]
template <typename S>
Tensor<S> prepend_token(const Tensor<S>& tokens, const Tensor<S>& cls) {
  const auto& xs = tokens.shape();
  if (xs.size() != 3 || cls.shape() != Shape{xs[2]})
    throw TensorError("prepend_token: shapes " + shape_str(xs) + " / " +
                      shape_str(cls.shape()));
  const std::int64_t N = xs[0], L = xs[1], D = xs[2];
  auto n = detail::make_node<S>("prepend_token", Shape{N, L + 1, D},
                                {tokens.node(), cls.node()});
  const auto& tv = tokens.data();
  const auto& cv = cls.data();
  for (std::int64_t s = 0; s < N; ++s) {
    for (std::int64_t d = 0; d < D; ++d) n->value[s * (L + 1) * D + d] = cv[d];
    for (std::int64_t l = 0; l < L; ++l)
      for (std::int64_t d = 0; d < D; ++d)
        n->value[(s * (L + 1) + l + 1) * D + d] = tv[(s * L + l) * D + d];
  }
  if (n->requires_grad)
    n->backward_fn = [N, L, D](Node<S>& self) {
      if (self.parents[0]->requires_grad) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t s = 0; s < N; ++s)
          for (std::int64_t l = 0; l < L; ++l)
            for (std::int64_t d = 0; d < D; ++d)
              g[(s * L + l) * D + d] += self.grad[(s * (L + 1) + l + 1) * D + d];
      }
      if (self.parents[1]->requires_grad) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::int64_t s = 0; s < N; ++s)
          for (std::int64_t d = 0; d < D; ++d)
            g[d] += self.grad[s * (L + 1) * D + d];
      }
    };
  return Tensor<S>(n);
}

// ---------------------------------------------------------------------------
// attention and losses
// ---------------------------------------------------------------------------

template <typename S>
struct AttentionWeights {
  Tensor<S> wq, wk, wv, wo;      // each [D, D]
  Tensor<S> bq, bk, bv, bo;      // each [D]
};

// softmax(Q K^T / sqrt(D/heads)) V per head, concatenated, output-projected.
template <typename S>
Tensor<S> multihead_attention(const Tensor<S>& x, const AttentionWeights<S>& w,
                              std::int64_t heads) {
  const auto& xs = x.shape();
  if (xs.size() != 3)
    throw TensorError("multihead_attention: expected [N, L, D], got " + shape_str(xs));
  const std::int64_t N = xs[0], L = xs[1], D = xs[2];
  if (heads < 1 || D % heads != 0)
    throw TensorError("multihead_attention: width " + std::to_string(D) +
                      " not divisible by heads " + std::to_string(heads));
  const std::int64_t dh = D / heads;
  auto split = [&](const Tensor<S>& t) {
    // [N, L, D] -> [N*heads, L, dh]
    auto r = reshape(t, {N, L, heads, dh});
    auto p = permute(r, {0, 2, 1, 3});
    return reshape(p, {N * heads, L, dh});
  };
  auto q = split(linear(x, w.wq, &w.bq));
  auto k = split(linear(x, w.wk, &w.bk));
  auto v = split(linear(x, w.wv, &w.bv));
  auto att = softmax_lastdim(
      smul(bmm(q, permute(k, {0, 2, 1})), S(1.0 / std::sqrt(double(dh)))));
  auto o = bmm(att, v);
  auto merged = reshape(permute(reshape(o, {N, heads, L, dh}), {0, 2, 1, 3}),
                        {N, L, D});
  return linear(merged, w.wo, &w.bo);
}

// per-example -sum(target * log softmax(logits)); stabilized by max-subtraction
template <typename S>
Tensor<S> cross_entropy_per_example(const Tensor<S>& logits, const Tensor<S>& target) {
  const auto& ls = logits.shape();
  if (ls.size() != 2 || target.shape() != ls)
    throw TensorError("cross_entropy: logits " + shape_str(ls) + " vs target " +
                      shape_str(target.shape()));
  const std::int64_t N = ls[0], K = ls[1];
  if (K < 2) throw TensorError("cross_entropy: needs at least 2 classes");
  const auto& zv = logits.data();
  const auto& tv = target.data();
  for (std::int64_t r = 0; r < N; ++r) {
    double s = 0.0;
    for (std::int64_t c = 0; c < K; ++c) s += static_cast<double>(tv[r * K + c]);
    if (std::abs(s - 1.0) > 1e-6)
      throw TensorError("cross_entropy: target row " + std::to_string(r) +
                        " sums to " + std::to_string(s));
  }
  auto n = detail::make_node<S>("cross_entropy", Shape{N},
                                {logits.node(), target.node()});
  std::vector<S> lse(N);
  for (std::int64_t r = 0; r < N; ++r) {
    const S* z = zv.data() + r * K;
    S mx = z[0];
    for (std::int64_t c = 1; c < K; ++c) mx = std::max(mx, z[c]);
    S acc = S(0);
    for (std::int64_t c = 0; c < K; ++c) acc += std::exp(z[c] - mx);
    lse[r] = mx + std::log(acc);
    S loss = S(0);
    for (std::int64_t c = 0; c < K; ++c) loss += tv[r * K + c] * (lse[r] - z[c]);
    n->value[r] = loss;
  }
  detail::check_finite(*n);
  if (n->requires_grad)
    n->backward_fn = [N, K, lse = std::move(lse)](Node<S>& self) {
      const auto& zv = self.parents[0]->value;
      const auto& tv = self.parents[1]->value;
      if (self.parents[0]->requires_grad) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t r = 0; r < N; ++r) {
          S gy = self.grad[r];
          for (std::int64_t c = 0; c < K; ++c) {
            S p = std::exp(zv[r * K + c] - lse[r]);
            g[r * K + c] += gy * (p - tv[r * K + c]);
          }
        }
      }
      if (self.parents[1]->requires_grad) {
        auto& g = self.parents[1]->ensure_grad();
        for (std::int64_t r = 0; r < N; ++r)
          for (std::int64_t c = 0; c < K; ++c)
            g[r * K + c] += self.grad[r] * (lse[r] - zv[r * K + c]);
      }
    };
  return Tensor<S>(n);
}

// batch mean
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const Tensor<S>& target) {
  auto per = cross_entropy_per_example(logits, target);
  return smul(vsum(per), S(1) / S(per.shape()[0]));
}

// ---------------------------------------------------------------------------
// bicubic resize (forward only; used by the data pipeline and positional
// embedding interpolation, neither of which is differentiated through)
// ---------------------------------------------------------------------------

namespace detail {

inline double cubic_kernel(double t) {
  constexpr double a = -0.5;
  double at = std::abs(t);
  if (at <= 1.0) return ((a + 2.0) * at - (a + 3.0)) * at * at + 1.0;
  if (at < 2.0) return (((at - 5.0) * at + 8.0) * at - 4.0) * a;
  return 0.0;
}

// one axis of separable cubic-convolution resampling with half-pixel centers
// and clamped source indices
template <typename S>
void resize_axis(const S* src, std::int64_t n_in, std::int64_t stride_in, S* dst,
                 std::int64_t n_out, std::int64_t stride_out) {
  const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
  for (std::int64_t o = 0; o < n_out; ++o) {
    double sx = (static_cast<double>(o) + 0.5) * scale - 0.5;
    std::int64_t base = static_cast<std::int64_t>(std::floor(sx));
    double frac = sx - static_cast<double>(base);
    double acc = 0.0;
    for (int i = -1; i <= 2; ++i) {
      std::int64_t idx = std::clamp<std::int64_t>(base + i, 0, n_in - 1);
      acc += cubic_kernel(frac - i) * static_cast<double>(src[idx * stride_in]);
    }
    dst[o * stride_out] = static_cast<S>(acc);
  }
}

}  // namespace detail

// image [C, H, W] -> [C, out_h, out_w]
template <typename S>
std::vector<S> bicubic_resize_raw(const S* img, std::int64_t C, std::int64_t H,
                                  std::int64_t W, std::int64_t out_h,
                                  std::int64_t out_w) {
  if (out_h < 1 || out_w < 1)
    throw TensorError("bicubic_resize: output dims must be >= 1");
  if (H < 4 || W < 4)
    throw TensorError("bicubic_resize: input must be at least 4x4 for kernel support");
  std::vector<S> mid(static_cast<std::size_t>(C * H * out_w));
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t h = 0; h < H; ++h)
      detail::resize_axis(img + (c * H + h) * W, W, 1,
                          mid.data() + (c * H + h) * out_w, out_w, 1);
  std::vector<S> out(static_cast<std::size_t>(C * out_h * out_w));
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t w = 0; w < out_w; ++w)
      detail::resize_axis(mid.data() + c * H * out_w + w, H, out_w,
                          out.data() + c * out_h * out_w + w, out_h, out_w);
  return out;
}

template <typename S>
Tensor<S> bicubic_resize(const Tensor<S>& image, std::int64_t out_h,
                         std::int64_t out_w) {
  const auto& is = image.shape();
  if (is.size() != 3)
    throw TensorError("bicubic_resize: expected [C, H, W], got " + shape_str(is));
  auto out = bicubic_resize_raw(image.data().data(), is[0], is[1], is[2], out_h, out_w);
  auto t = Tensor<S>::leaf({is[0], out_h, out_w}, std::move(out));
  detail::check_finite(*t.node());
  return t;
}

// ---------------------------------------------------------------------------
// serialization: little-endian (rank, extents as u64) header + row-major f32
// ---------------------------------------------------------------------------

void write_tensor_f32(std::ostream& os, const Shape& shape,
                      const std::vector<float>& data);
std::pair<Shape, std::vector<float>> read_tensor_f32(std::istream& is);

template <typename S>
void write_tensor(std::ostream& os, const Tensor<S>& t) {
  std::vector<float> f(t.data().begin(), t.data().end());
  write_tensor_f32(os, t.shape(), f);
}

template <typename S>
Tensor<S> read_tensor(std::istream& is) {
  auto [shape, f] = read_tensor_f32(is);
  std::vector<S> d(f.begin(), f.end());
  return Tensor<S>::leaf(std::move(shape), std::move(d));
}

}  // namespace advlab
