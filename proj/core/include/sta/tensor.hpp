#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sta/errors.hpp"
#include "sta/rng.hpp"

// Dense row-major tensors with reverse-mode differentiation over a fixed op
// vocabulary: matmul/linear, softmax, layer_norm, bilinear resize, 3x3 conv,
// elementwise arithmetic, reductions, slicing/gather/concat/permute.
// Scalar type S is float for training/inference and double for gradient
// checking. The tape is built implicitly: each op node keeps shared pointers
// to its inputs plus a closure that routes upstream gradients to them.

namespace sta {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << "]";
  return os.str();
}

template <typename S>
class Tensor {
  struct Node;
  using NodePtr = std::shared_ptr<Node>;

  struct GradSink {
    std::unordered_map<Node*, std::vector<S>>& flow;
    std::vector<S>& at(const NodePtr& n) {
      auto& g = flow[n.get()];
      if (g.empty()) g.assign(n->data.size(), S(0));
      return g;
    }
    bool wants(const NodePtr& n) const { return n->tracked(); }
  };

  using BackFn = std::function<void(const std::vector<S>&, GradSink&)>;

  struct Node {
    Shape shape;
    std::vector<S> data;
    std::vector<S> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    BackFn back;
    bool tracked() const { return requires_grad || !parents.empty(); }
  };

public:
  using Scalar = S;

  Tensor() = default;

  static Tensor zeros(Shape shape) { return full(std::move(shape), S(0)); }

  static Tensor full(Shape shape, S value) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->data.assign(shape_numel(shape), value);
    t.node_->shape = std::move(shape);
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<S> data) {
    if (shape_numel(shape) != data.size())
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    return t;
  }

  static Tensor scalar(S v) { return from_data({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape[axis]; }

  const std::vector<S>& data() const { return node_->data; }
  // Direct mutation; only sensible on leaves (optimizer updates, FD probes).
  std::vector<S>& mutable_data() { return node_->data; }

  S value() const {
    if (numel() != 1) throw ContractError("value() requires a 1-element tensor, got " + shape_str(shape()));
    return node_->data[0];
  }

  S at(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != rank()) throw DimensionError("index rank mismatch");
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      off = off * node_->shape[axis] + i;
      ++axis;
    }
    return node_->data[off];
  }

  Tensor& set_requires_grad(bool b) {
    node_->requires_grad = b;
    return *this;
  }
  bool requires_grad() const { return node_->requires_grad; }
  bool tracked() const { return node_ && node_->tracked(); }

  // A copy that does not participate in any tape.
  Tensor detach() const { return from_data(node_->shape, node_->data); }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<S>& grad() const {
    if (!has_grad()) throw ContractError("tensor has no accumulated gradient");
    return node_->grad;
  }
  Tensor grad_tensor() const { return from_data(node_->shape, grad()); }
  void zero_grad() {
    if (node_) node_->grad.clear();
  }

  bool same_node(const Tensor& o) const { return node_ == o.node_; }

  // --- graph construction -------------------------------------------------

  static Tensor make_op(Shape shape, std::vector<S> data, std::vector<Tensor> inputs, BackFn back) {
    Tensor t = from_data(std::move(shape), std::move(data));
    bool any_tracked = false;
    for (const auto& in : inputs) any_tracked |= in.tracked();
    if (any_tracked) {
      for (auto& in : inputs) t.node_->parents.push_back(in.node_);
      t.node_->back = std::move(back);
    }
    return t;
  }

  NodePtr node() const { return node_; }

  // Accumulates gradients of `loss` into every reachable requires_grad
  // tensor. Repeated calls keep adding; zero_grad() resets a leaf.
  friend void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
      throw ContractError("backward requires a scalar loss");
    // Iterative DFS post-order over parents.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
      Node* n;
      std::size_t next;
    };
    std::vector<Frame> stack;
    if (loss.node_->tracked()) {
      stack.push_back({loss.node_.get(), 0});
      visited.insert(loss.node_.get());
    }
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < f.n->parents.size()) {
        Node* p = f.n->parents[f.next++].get();
        if (p->tracked() && !visited.count(p)) {
          visited.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        order.push_back(f.n);
        stack.pop_back();
      }
    }
    std::unordered_map<Node*, std::vector<S>> flow;
    flow[loss.node_.get()] = {S(1)};
    GradSink sink{flow};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      auto fit = flow.find(n);
      if (fit == flow.end() || fit->second.empty()) continue;
      if (n->back) n->back(fit->second, sink);
      if (n->requires_grad) {
        if (n->grad.empty()) n->grad.assign(n->data.size(), S(0));
        const auto& g = fit->second;
        for (std::size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
      }
    }
  }

private:
  NodePtr node_;

  template <typename T>
  friend class TensorOps;
};

// Free-function op surface. Implemented as a befriended static holder so the
// node internals stay private.
template <typename S>
class TensorOps {
  using T = Tensor<S>;
  using Node = typename T::Node;
  using Sink = typename T::GradSink;

public:
  // ---- raw matmul kernels (also used by backward paths) ----
  // c[m,n] += a[m,k] * b[k,n]
  static void mm_nn(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
      const S* ai = a + i * k;
      S* ci = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const S av = ai[p];
        if (av == S(0)) continue;
        const S* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  }
  // c[m,n] += a[m,k] * b[n,k]^T
  static void mm_nt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
      const S* ai = a + i * k;
      S* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const S* bj = b + j * k;
        S acc = S(0);
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] += acc;
      }
    }
  }
  // c[m,n] += a[k,m]^T * b[k,n]
  static void mm_tn(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
      const S* ap = a + p * m;
      const S* bp = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const S av = ap[i];
        if (av == S(0)) continue;
        S* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  }

  static void require_same_shape(const T& a, const T& b, const char* op) {
    if (a.shape() != b.shape())
      throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
  }

  // ---- elementwise ----

  static T add(const T& a, const T& b) {
    require_same_shape(a, b, "add");
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    auto an = a.node(), bn = b.node();
    return T::make_op(a.shape(), std::move(out), {a, b}, [an, bn](const std::vector<S>& g, Sink& sink) {
      if (sink.wants(an)) {
        auto& ga = sink.at(an);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (sink.wants(bn)) {
        auto& gb = sink.at(bn);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }

  static T sub(const T& a, const T& b) {
    require_same_shape(a, b, "sub");
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
    auto an = a.node(), bn = b.node();
    return T::make_op(a.shape(), std::move(out), {a, b}, [an, bn](const std::vector<S>& g, Sink& sink) {
      if (sink.wants(an)) {
        auto& ga = sink.at(an);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (sink.wants(bn)) {
        auto& gb = sink.at(bn);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }

  static T mul(const T& a, const T& b) {
    require_same_shape(a, b, "mul");
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    auto an = a.node(), bn = b.node();
    return T::make_op(a.shape(), std::move(out), {a, b}, [an, bn](const std::vector<S>& g, Sink& sink) {
      if (sink.wants(an)) {
        auto& ga = sink.at(an);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[i];
      }
      if (sink.wants(bn)) {
        auto& gb = sink.at(bn);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->data[i];
      }
    });
  }

  static T div(const T& a, const T& b) {
    require_same_shape(a, b, "div");
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] / bd[i];
    auto an = a.node(), bn = b.node();
    return T::make_op(a.shape(), std::move(out), {a, b}, [an, bn](const std::vector<S>& g, Sink& sink) {
      if (sink.wants(an)) {
        auto& ga = sink.at(an);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bn->data[i];
      }
      if (sink.wants(bn)) {
        auto& gb = sink.at(bn);
        for (std::size_t i = 0; i < g.size(); ++i)
          gb[i] -= g[i] * an->data[i] / (bn->data[i] * bn->data[i]);
      }
    });
  }

  static T minimum(const T& a, const T& b) { return min_max(a, b, /*take_min=*/true); }
  static T maximum(const T& a, const T& b) { return min_max(a, b, /*take_min=*/false); }

  static T add_scalar(const T& a, S c) {
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + c;
    auto an = a.node();
    return T::make_op(a.shape(), std::move(out), {a}, [an](const std::vector<S>& g, Sink& sink) {
      if (!sink.wants(an)) return;
      auto& ga = sink.at(an);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }

  static T mul_scalar(const T& a, S c) {
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * c;
    auto an = a.node();
    return T::make_op(a.shape(), std::move(out), {a}, [an, c](const std::vector<S>& g, Sink& sink) {
      if (!sink.wants(an)) return;
      auto& ga = sink.at(an);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }

  static T neg(const T& a) { return mul_scalar(a, S(-1)); }

  // Generic differentiable unary op: f(x), df(x, y=f(x)).
  template <typename F, typename DF>
  static T unary(const T& a, F f, DF df) {
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(ad[i]);
    auto an = a.node();
    std::vector<S> saved = out;
    return T::make_op(a.shape(), std::move(out), {a},
                      [an, df, saved = std::move(saved)](const std::vector<S>& g, Sink& sink) {
                        if (!sink.wants(an)) return;
                        auto& ga = sink.at(an);
                        for (std::size_t i = 0; i < g.size(); ++i)
                          ga[i] += g[i] * df(an->data[i], saved[i]);
                      });
  }

  static T exp(const T& a) {
    return unary(
        a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
  }
  static T log(const T& a) {
    return unary(
        a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
  }
  static T sigmoid(const T& a) {
    return unary(
        a,
        [](S x) {
          if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
          const S e = std::exp(x);
          return e / (S(1) + e);
        },
        [](S, S y) { return y * (S(1) - y); });
  }
  static T softplus(const T& a) {
    return unary(
        a,
        [](S x) {
          if (x > S(30)) return x;
          if (x < S(-30)) return std::exp(x);
          return std::log1p(std::exp(x));
        },
        [](S x, S) {
          if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
          const S e = std::exp(x);
          return e / (S(1) + e);
        });
  }
  static T relu(const T& a) {
    return unary(
        a, [](S x) { return x > S(0) ? x : S(0); }, [](S x, S) { return x > S(0) ? S(1) : S(0); });
  }
  // Elementwise smooth-L1 (Huber with beta=1): 0.5 x^2 for |x|<1, |x|-0.5 else.
  static T smooth_l1(const T& a) {
    return unary(
        a,
        [](S x) {
          const S ax = std::abs(x);
          return ax < S(1) ? S(0.5) * x * x : ax - S(0.5);
        },
        [](S x, S) {
          if (x > S(1)) return S(1);
          if (x < S(-1)) return S(-1);
          return x;
        });
  }

  // ---- shape ops ----

  static T reshape(const T& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
      throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    auto an = a.node();
    return T::make_op(std::move(shape), a.data(), {a}, [an](const std::vector<S>& g, Sink& sink) {
      if (!sink.wants(an)) return;
      auto& ga = sink.at(an);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }

  static T transpose(const T& a) {
    if (a.rank() != 2) throw DimensionError("transpose expects rank-2, got " + shape_str(a.shape()));
    const std::size_t m = a.extent(0), n = a.extent(1);
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
    auto an = a.node();
    return T::make_op({n, m}, std::move(out), {a}, [an, m, n](const std::vector<S>& g, Sink& sink) {
      if (!sink.wants(an)) return;
      auto& ga = sink.at(an);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }

  static T permute(const T& a, const std::vector<std::size_t>& perm) {
    if (perm.size() != a.rank()) throw DimensionError("permute: order rank mismatch");
    const std::size_t r = a.rank();
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = a.shape()[perm[i]];
    std::vector<std::size_t> in_strides(r, 1), out_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * a.shape()[i];
    for (std::size_t i = r; i-- > 1;) out_strides[i - 1] = out_strides[i] * out_shape[i];
    // Map each output flat index to its source flat index once.
    std::vector<std::size_t> src_of(a.numel());
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t o = 0; o < src_of.size(); ++o) {
      std::size_t src = 0;
      for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_strides[perm[i]];
      src_of[o] = src;
      for (std::size_t i = r; i-- > 0;) {
        if (++idx[i] < out_shape[i]) break;
        idx[i] = 0;
      }
    }
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t o = 0; o < out.size(); ++o) out[o] = ad[src_of[o]];
    auto an = a.node();
    return T::make_op(std::move(out_shape), std::move(out), {a},
                      [an, src_of = std::move(src_of)](const std::vector<S>& g, Sink& sink) {
                        if (!sink.wants(an)) return;
                        auto& ga = sink.at(an);
                        for (std::size_t o = 0; o < g.size(); ++o) ga[src_of[o]] += g[o];
                      });
  }

  // outer/len/inner decomposition of an axis.
  static void axis_split(const Shape& shape, std::size_t axis, std::size_t& outer, std::size_t& len,
                         std::size_t& inner) {
    if (axis >= shape.size()) throw DimensionError("axis out of range");
    outer = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    len = shape[axis];
    inner = 1;
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  }

  static T slice(const T& a, std::size_t axis, std::size_t start, std::size_t len) {
    std::size_t outer, alen, inner;
    axis_split(a.shape(), axis, outer, alen, inner);
    if (start + len > alen)
      throw DimensionError("slice out of range on axis " + std::to_string(axis) + " of " +
                           shape_str(a.shape()));
    Shape out_shape = a.shape();
    out_shape[axis] = len;
    std::vector<S> out(outer * len * inner);
    const auto& ad = a.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::memcpy(out.data() + o * len * inner, ad.data() + (o * alen + start) * inner,
                  len * inner * sizeof(S));
    auto an = a.node();
    return T::make_op(std::move(out_shape), std::move(out), {a},
                      [an, outer, alen, inner, start, len](const std::vector<S>& g, Sink& sink) {
                        if (!sink.wants(an)) return;
                        auto& ga = sink.at(an);
                        for (std::size_t o = 0; o < outer; ++o) {
                          const S* gs = g.data() + o * len * inner;
                          S* gd = ga.data() + (o * alen + start) * inner;
                          for (std::size_t i = 0; i < len * inner; ++i) gd[i] += gs[i];
                        }
                      });
  }

  static T concat(const std::vector<T>& parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    Shape out_shape = parts[0].shape();
    std::size_t total = 0;
    for (const auto& p : parts) {
      if (p.rank() != out_shape.size()) throw DimensionError("concat rank mismatch");
      for (std::size_t i = 0; i < out_shape.size(); ++i)
        if (i != axis && p.shape()[i] != out_shape[i])
          throw DimensionError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                               shape_str(out_shape) + " on non-concat axis");
      total += p.shape()[axis];
    }
    out_shape[axis] = total;
    std::size_t outer, len, inner;
    axis_split(out_shape, axis, outer, len, inner);
    std::vector<S> out(shape_numel(out_shape));
    std::vector<std::size_t> lens;
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t plen = p.shape()[axis];
      const auto& pd = p.data();
      for (std::size_t o = 0; o < outer; ++o)
        std::memcpy(out.data() + (o * len + off) * inner, pd.data() + o * plen * inner,
                    plen * inner * sizeof(S));
      lens.push_back(plen);
      off += plen;
    }
    std::vector<typename T::NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return T::make_op(std::move(out_shape), std::move(out), parts,
                      [nodes, lens, outer, len, inner](const std::vector<S>& g, Sink& sink) {
                        std::size_t off = 0;
                        for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                          const std::size_t plen = lens[pi];
                          if (sink.wants(nodes[pi])) {
                            auto& gp = sink.at(nodes[pi]);
                            for (std::size_t o = 0; o < outer; ++o) {
                              const S* gs = g.data() + (o * len + off) * inner;
                              S* gd = gp.data() + o * plen * inner;
                              for (std::size_t i = 0; i < plen * inner; ++i) gd[i] += gs[i];
                            }
                          }
                          off += plen;
                        }
                      });
  }

  static T gather(const T& a, std::size_t axis, const std::vector<std::size_t>& indices) {
    std::size_t outer, alen, inner;
    axis_split(a.shape(), axis, outer, alen, inner);
    for (std::size_t idx : indices)
      if (idx >= alen) throw DimensionError("gather index out of range");
    Shape out_shape = a.shape();
    out_shape[axis] = indices.size();
    const std::size_t glen = indices.size();
    std::vector<S> out(outer * glen * inner);
    const auto& ad = a.data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < glen; ++i)
        std::memcpy(out.data() + (o * glen + i) * inner, ad.data() + (o * alen + indices[i]) * inner,
                    inner * sizeof(S));
    auto an = a.node();
    return T::make_op(std::move(out_shape), std::move(out), {a},
                      [an, indices, outer, alen, inner, glen](const std::vector<S>& g, Sink& sink) {
                        if (!sink.wants(an)) return;
                        auto& ga = sink.at(an);
                        for (std::size_t o = 0; o < outer; ++o)
                          for (std::size_t i = 0; i < glen; ++i) {
                            const S* gs = g.data() + (o * glen + i) * inner;
                            S* gd = ga.data() + (o * alen + indices[i]) * inner;
                            for (std::size_t k = 0; k < inner; ++k) gd[k] += gs[k];
                          }
                      });
  }

  // ---- reductions ----

  static T sum(const T& a) {
    S acc = S(0);
    for (S v : a.data()) acc += v;
    auto an = a.node();
    return T::make_op({1}, {acc}, {a}, [an](const std::vector<S>& g, Sink& sink) {
      if (!sink.wants(an)) return;
      auto& ga = sink.at(an);
      for (auto& v : ga) v += g[0];
    });
  }

  static T mean(const T& a) { return mul_scalar(sum(a), S(1) / static_cast<S>(a.numel())); }

  static T sum_axis(const T& a, std::size_t axis) {
    std::size_t outer, len, inner;
    axis_split(a.shape(), axis, outer, len, inner);
    Shape out_shape;
    for (std::size_t i = 0; i < a.rank(); ++i)
      if (i != axis) out_shape.push_back(a.shape()[i]);
    if (out_shape.empty()) out_shape.push_back(1);
    std::vector<S> out(outer * inner, S(0));
    const auto& ad = a.data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l) {
        const S* src = ad.data() + (o * len + l) * inner;
        S* dst = out.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    auto an = a.node();
    return T::make_op(std::move(out_shape), std::move(out), {a},
                      [an, outer, len, inner](const std::vector<S>& g, Sink& sink) {
                        if (!sink.wants(an)) return;
                        auto& ga = sink.at(an);
                        for (std::size_t o = 0; o < outer; ++o)
                          for (std::size_t l = 0; l < len; ++l) {
                            S* dst = ga.data() + (o * len + l) * inner;
                            const S* src = g.data() + o * inner;
                            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                          }
                      });
  }

  // ---- linear algebra ----

  static T matmul(const T& a, const T& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
      throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                           shape_str(b.shape()));
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    std::vector<S> out(m * n, S(0));
    mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto an = a.node(), bn = b.node();
    return T::make_op({m, n}, std::move(out), {a, b},
                      [an, bn, m, k, n](const std::vector<S>& g, Sink& sink) {
                        if (sink.wants(an)) mm_nt(g.data(), bn->data.data(), sink.at(an).data(), m, n, k);
                        if (sink.wants(bn)) mm_tn(an->data.data(), g.data(), sink.at(bn).data(), k, m, n);
                      });
  }

  // y = x @ w + broadcast(b); x:[n,k] w:[k,m] b:[m]
  static T linear(const T& x, const T& w, const T& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.extent(1) != w.extent(0) ||
        w.extent(1) != b.extent(0))
      throw DimensionError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                           shape_str(w.shape()) + " b" + shape_str(b.shape()));
    const std::size_t n = x.extent(0), k = x.extent(1), m = w.extent(1);
    std::vector<S> out(n * m);
    for (std::size_t i = 0; i < n; ++i) std::memcpy(out.data() + i * m, b.data().data(), m * sizeof(S));
    mm_nn(x.data().data(), w.data().data(), out.data(), n, k, m);
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return T::make_op({n, m}, std::move(out), {x, w, b},
                      [xn, wn, bn, n, k, m](const std::vector<S>& g, Sink& sink) {
                        if (sink.wants(xn)) mm_nt(g.data(), wn->data.data(), sink.at(xn).data(), n, m, k);
                        if (sink.wants(wn)) mm_tn(xn->data.data(), g.data(), sink.at(wn).data(), k, n, m);
                        if (sink.wants(bn)) {
                          auto& gb = sink.at(bn);
                          for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
                        }
                      });
  }

  // x:[n,d] + broadcast rows of b:[d]
  static T add_rows(const T& x, const T& b) {
    if (x.rank() != 2 || b.rank() != 1 || x.extent(1) != b.extent(0))
      throw DimensionError("add_rows: incompatible shapes " + shape_str(x.shape()) + " and " +
                           shape_str(b.shape()));
    const std::size_t n = x.extent(0), d = x.extent(1);
    std::vector<S> out(x.data());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += b.data()[j];
    auto xn = x.node(), bn = b.node();
    return T::make_op(x.shape(), std::move(out), {x, b},
                      [xn, bn, n, d](const std::vector<S>& g, Sink& sink) {
                        if (sink.wants(xn)) {
                          auto& gx = sink.at(xn);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        }
                        if (sink.wants(bn)) {
                          auto& gb = sink.at(bn);
                          for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
                        }
                      });
  }

  // ---- softmax / layer norm ----

  static T softmax(const T& a, std::size_t axis) {
    for (S v : a.data())
      if (std::isnan(v)) throw NumericError("softmax: NaN in input");
    std::size_t outer, len, inner;
    axis_split(a.shape(), axis, outer, len, inner);
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        S mx = ad[base];
        for (std::size_t l = 1; l < len; ++l) mx = std::max(mx, ad[base + l * inner]);
        S total = S(0);
        for (std::size_t l = 0; l < len; ++l) {
          const S e = std::exp(ad[base + l * inner] - mx);
          out[base + l * inner] = e;
          total += e;
        }
        const S invz = S(1) / total;
        for (std::size_t l = 0; l < len; ++l) out[base + l * inner] *= invz;
      }
    auto an = a.node();
    std::vector<S> y = out;
    return T::make_op(a.shape(), std::move(out), {a},
                      [an, y = std::move(y), outer, len, inner](const std::vector<S>& g, Sink& sink) {
                        if (!sink.wants(an)) return;
                        auto& ga = sink.at(an);
                        for (std::size_t o = 0; o < outer; ++o)
                          for (std::size_t in = 0; in < inner; ++in) {
                            const std::size_t base = o * len * inner + in;
                            S dot = S(0);
                            for (std::size_t l = 0; l < len; ++l)
                              dot += g[base + l * inner] * y[base + l * inner];
                            for (std::size_t l = 0; l < len; ++l)
                              ga[base + l * inner] +=
                                  y[base + l * inner] * (g[base + l * inner] - dot);
                          }
                      });
  }

  static T layer_norm(const T& x, const T& gamma, const T& beta, S eps = S(1e-5)) {
    if (x.rank() < 1 || gamma.rank() != 1 || beta.rank() != 1)
      throw DimensionError("layer_norm: bad ranks");
    const std::size_t d = x.shape().back();
    if (gamma.extent(0) != d || beta.extent(0) != d)
      throw DimensionError("layer_norm: feature width " + std::to_string(d) +
                           " does not match gamma " + shape_str(gamma.shape()) + " / beta " +
                           shape_str(beta.shape()));
    const std::size_t rows = x.numel() / d;
    std::vector<S> out(x.numel());
    std::vector<S> xhat(x.numel());
    std::vector<S> inv_sigma(rows);
    const auto& xd = x.data();
    const auto& gd = gamma.data();
    const auto& bd = beta.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const S* xr = xd.data() + r * d;
      S mu = S(0);
      for (std::size_t j = 0; j < d; ++j) mu += xr[j];
      mu /= static_cast<S>(d);
      S var = S(0);
      for (std::size_t j = 0; j < d; ++j) {
        const S c = xr[j] - mu;
        var += c * c;
      }
      var /= static_cast<S>(d);
      const S is = S(1) / std::sqrt(var + eps);
      inv_sigma[r] = is;
      for (std::size_t j = 0; j < d; ++j) {
        const S h = (xr[j] - mu) * is;
        xhat[r * d + j] = h;
        out[r * d + j] = gd[j] * h + bd[j];
      }
    }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return T::make_op(
        x.shape(), std::move(out), {x, gamma, beta},
        [xn, gn, bn, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma), rows,
         d](const std::vector<S>& g, Sink& sink) {
          for (std::size_t r = 0; r < rows; ++r) {
            const S* gr = g.data() + r * d;
            const S* hr = xhat.data() + r * d;
            if (sink.wants(xn)) {
              auto& gx = sink.at(xn);
              // dxhat = g * gamma; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) * inv_sigma
              S mean_dh = S(0), mean_dh_h = S(0);
              for (std::size_t j = 0; j < d; ++j) {
                const S dh = gr[j] * gn->data[j];
                mean_dh += dh;
                mean_dh_h += dh * hr[j];
              }
              mean_dh /= static_cast<S>(d);
              mean_dh_h /= static_cast<S>(d);
              for (std::size_t j = 0; j < d; ++j) {
                const S dh = gr[j] * gn->data[j];
                gx[r * d + j] += (dh - mean_dh - hr[j] * mean_dh_h) * inv_sigma[r];
              }
            }
            if (sink.wants(gn)) {
              auto& gg = sink.at(gn);
              for (std::size_t j = 0; j < d; ++j) gg[j] += gr[j] * hr[j];
            }
            if (sink.wants(bn)) {
              auto& gb = sink.at(bn);
              for (std::size_t j = 0; j < d; ++j) gb[j] += gr[j];
            }
          }
        });
  }

  // ---- image ops ----

  // Half-pixel (align_corners=false) bilinear resize of [h,w,c].
  // Interpolation uses the lerp form a + f*(b-a) so constant maps stay exact.
  static T bilinear_resize(const T& x, std::size_t out_h, std::size_t out_w) {
    if (x.rank() != 3) throw DimensionError("bilinear_resize expects [h,w,c], got " + shape_str(x.shape()));
    if (out_h < 1 || out_w < 1) throw DimensionError("bilinear_resize: output extents must be >= 1");
    const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
    struct Tap {
      std::size_t lo, hi;
      S frac;
    };
    auto make_taps = [](std::size_t in, std::size_t out) {
      std::vector<Tap> taps(out);
      const double scale = static_cast<double>(in) / static_cast<double>(out);
      for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        std::size_t lo = static_cast<std::size_t>(src);
        if (lo > in - 1) lo = in - 1;
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[o] = {lo, hi, static_cast<S>(src - static_cast<double>(lo))};
      }
      return taps;
    };
    const auto ty = make_taps(h, out_h);
    const auto tx = make_taps(w, out_w);
    std::vector<S> out(out_h * out_w * c);
    const auto& xd = x.data();
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const S p00 = xd[(ty[oy].lo * w + tx[ox].lo) * c + ch];
          const S p01 = xd[(ty[oy].lo * w + tx[ox].hi) * c + ch];
          const S p10 = xd[(ty[oy].hi * w + tx[ox].lo) * c + ch];
          const S p11 = xd[(ty[oy].hi * w + tx[ox].hi) * c + ch];
          const S top = p00 + tx[ox].frac * (p01 - p00);
          const S bot = p10 + tx[ox].frac * (p11 - p10);
          out[(oy * out_w + ox) * c + ch] = top + ty[oy].frac * (bot - top);
        }
    auto xn = x.node();
    return T::make_op({out_h, out_w, c}, std::move(out), {x},
                      [xn, ty, tx, w, c, out_h, out_w](const std::vector<S>& g, Sink& sink) {
                        if (!sink.wants(xn)) return;
                        auto& gx = sink.at(xn);
                        for (std::size_t oy = 0; oy < out_h; ++oy)
                          for (std::size_t ox = 0; ox < out_w; ++ox) {
                            const S fy = ty[oy].frac, fx = tx[ox].frac;
                            const S w00 = (S(1) - fy) * (S(1) - fx);
                            const S w01 = (S(1) - fy) * fx;
                            const S w10 = fy * (S(1) - fx);
                            const S w11 = fy * fx;
                            for (std::size_t ch = 0; ch < c; ++ch) {
                              const S gv = g[(oy * out_w + ox) * c + ch];
                              gx[(ty[oy].lo * w + tx[ox].lo) * c + ch] += w00 * gv;
                              gx[(ty[oy].lo * w + tx[ox].hi) * c + ch] += w01 * gv;
                              gx[(ty[oy].hi * w + tx[ox].lo) * c + ch] += w10 * gv;
                              gx[(ty[oy].hi * w + tx[ox].hi) * c + ch] += w11 * gv;
                            }
                          }
                      });
  }

  // Shape-preserving 3x3 cross-correlation, zero padding, stride 1.
  // x:[h,w,ci] w:[3,3,ci,co] b:[co]
  static T conv2d_3x3(const T& x, const T& w, const T& b) {
    if (x.rank() != 3 || w.rank() != 4 || w.extent(0) != 3 || w.extent(1) != 3)
      throw DimensionError("conv2d_3x3: expected x[h,w,ci] and w[3,3,ci,co], got " +
                           shape_str(x.shape()) + " and " + shape_str(w.shape()));
    const std::size_t h = x.extent(0), ww = x.extent(1), ci = x.extent(2), co = w.extent(3);
    if (w.extent(2) != ci)
      throw DimensionError("conv2d_3x3: input channels " + std::to_string(ci) +
                           " do not match kernel " + shape_str(w.shape()));
    if (b.rank() != 1 || b.extent(0) != co)
      throw DimensionError("conv2d_3x3: bias " + shape_str(b.shape()) + " does not match " +
                           std::to_string(co) + " output channels");
    std::vector<S> out(h * ww * co);
    const auto& xd = x.data();
    const auto& wd = w.data();
    const auto& bd = b.data();
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t cc = 0; cc < ww; ++cc) {
        S* orow = out.data() + (r * ww + cc) * co;
        for (std::size_t o = 0; o < co; ++o) orow[o] = bd[o];
        for (std::size_t dr = 0; dr < 3; ++dr) {
          const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + dr) - 1;
          if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t dc = 0; dc < 3; ++dc) {
            const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(cc + dc) - 1;
            if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(ww)) continue;
            const S* xrow = xd.data() + (sr * ww + sc) * ci;
            const S* wrow = wd.data() + (dr * 3 + dc) * ci * co;
            for (std::size_t i = 0; i < ci; ++i) {
              const S xv = xrow[i];
              if (xv == S(0)) continue;
              const S* wi = wrow + i * co;
              for (std::size_t o = 0; o < co; ++o) orow[o] += xv * wi[o];
            }
          }
        }
      }
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return T::make_op(
        {h, ww, co}, std::move(out), {x, w, b},
        [xn, wn, bn, h, ww, ci, co](const std::vector<S>& g, Sink& sink) {
          const bool want_x = sink.wants(xn), want_w = sink.wants(wn), want_b = sink.wants(bn);
          for (std::size_t r = 0; r < h; ++r)
            for (std::size_t cc = 0; cc < ww; ++cc) {
              const S* grow = g.data() + (r * ww + cc) * co;
              if (want_b) {
                auto& gb = sink.at(bn);
                for (std::size_t o = 0; o < co; ++o) gb[o] += grow[o];
              }
              for (std::size_t dr = 0; dr < 3; ++dr) {
                const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + dr) - 1;
                if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t dc = 0; dc < 3; ++dc) {
                  const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(cc + dc) - 1;
                  if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(ww)) continue;
                  const std::size_t xoff = (sr * ww + sc) * ci;
                  const std::size_t woff = (dr * 3 + dc) * ci * co;
                  if (want_x) {
                    auto& gx = sink.at(xn);
                    for (std::size_t i = 0; i < ci; ++i) {
                      const S* wi = wn->data.data() + woff + i * co;
                      S acc = S(0);
                      for (std::size_t o = 0; o < co; ++o) acc += grow[o] * wi[o];
                      gx[xoff + i] += acc;
                    }
                  }
                  if (want_w) {
                    auto& gw = sink.at(wn);
                    for (std::size_t i = 0; i < ci; ++i) {
                      const S xv = xn->data[xoff + i];
                      if (xv == S(0)) continue;
                      S* gwi = gw.data() + woff + i * co;
                      for (std::size_t o = 0; o < co; ++o) gwi[o] += xv * grow[o];
                    }
                  }
                }
              }
            }
        });
  }

private:
  static T min_max(const T& a, const T& b, bool take_min) {
    require_same_shape(a, b, take_min ? "minimum" : "maximum");
    std::vector<S> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    // Ties route the gradient to the first argument.
    std::vector<unsigned char> pick_a(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const bool first = take_min ? (ad[i] <= bd[i]) : (ad[i] >= bd[i]);
      pick_a[i] = first;
      out[i] = first ? ad[i] : bd[i];
    }
    auto an = a.node(), bn = b.node();
    return T::make_op(a.shape(), std::move(out), {a, b},
                      [an, bn, pick_a = std::move(pick_a)](const std::vector<S>& g, Sink& sink) {
                        if (sink.wants(an)) {
                          auto& ga = sink.at(an);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            if (pick_a[i]) ga[i] += g[i];
                        }
                        if (sink.wants(bn)) {
                          auto& gb = sink.at(bn);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            if (!pick_a[i]) gb[i] += g[i];
                        }
                      });
  }
};

// Convenience aliases for the op surface.
template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) { return TensorOps<S>::add(a, b); }
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) { return TensorOps<S>::sub(a, b); }
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) { return TensorOps<S>::mul(a, b); }
template <typename S> Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) { return TensorOps<S>::div(a, b); }
template <typename S> Tensor<S> minimum(const Tensor<S>& a, const Tensor<S>& b) { return TensorOps<S>::minimum(a, b); }
template <typename S> Tensor<S> maximum(const Tensor<S>& a, const Tensor<S>& b) { return TensorOps<S>::maximum(a, b); }
template <typename S> Tensor<S> add_scalar(const Tensor<S>& a, S c) { return TensorOps<S>::add_scalar(a, c); }
template <typename S> Tensor<S> mul_scalar(const Tensor<S>& a, S c) { return TensorOps<S>::mul_scalar(a, c); }
template <typename S> Tensor<S> neg(const Tensor<S>& a) { return TensorOps<S>::neg(a); }
template <typename S> Tensor<S> exp(const Tensor<S>& a) { return TensorOps<S>::exp(a); }
template <typename S> Tensor<S> log(const Tensor<S>& a) { return TensorOps<S>::log(a); }
template <typename S> Tensor<S> sigmoid(const Tensor<S>& a) { return TensorOps<S>::sigmoid(a); }
template <typename S> Tensor<S> softplus(const Tensor<S>& a) { return TensorOps<S>::softplus(a); }
template <typename S> Tensor<S> relu(const Tensor<S>& a) { return TensorOps<S>::relu(a); }
template <typename S> Tensor<S> smooth_l1(const Tensor<S>& a) { return TensorOps<S>::smooth_l1(a); }
template <typename S> Tensor<S> reshape(const Tensor<S>& a, Shape s) { return TensorOps<S>::reshape(a, std::move(s)); }
template <typename S> Tensor<S> transpose(const Tensor<S>& a) { return TensorOps<S>::transpose(a); }
template <typename S> Tensor<S> permute(const Tensor<S>& a, const std::vector<std::size_t>& p) { return TensorOps<S>::permute(a, p); }
template <typename S> Tensor<S> slice(const Tensor<S>& a, std::size_t axis, std::size_t start, std::size_t len) { return TensorOps<S>::slice(a, axis, start, len); }
template <typename S> Tensor<S> concat(const std::vector<Tensor<S>>& parts, std::size_t axis) { return TensorOps<S>::concat(parts, axis); }
template <typename S> Tensor<S> gather(const Tensor<S>& a, std::size_t axis, const std::vector<std::size_t>& idx) { return TensorOps<S>::gather(a, axis, idx); }
template <typename S> Tensor<S> sum(const Tensor<S>& a) { return TensorOps<S>::sum(a); }
template <typename S> Tensor<S> mean(const Tensor<S>& a) { return TensorOps<S>::mean(a); }
template <typename S> Tensor<S> sum_axis(const Tensor<S>& a, std::size_t axis) { return TensorOps<S>::sum_axis(a, axis); }
template <typename S> Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) { return TensorOps<S>::matmul(a, b); }
template <typename S> Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) { return TensorOps<S>::linear(x, w, b); }
template <typename S> Tensor<S> add_rows(const Tensor<S>& x, const Tensor<S>& b) { return TensorOps<S>::add_rows(x, b); }
template <typename S> Tensor<S> softmax(const Tensor<S>& a, std::size_t axis) { return TensorOps<S>::softmax(a, axis); }
template <typename S> Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& g, const Tensor<S>& b, S eps = S(1e-5)) { return TensorOps<S>::layer_norm(x, g, b, eps); }
template <typename S> Tensor<S> bilinear_resize(const Tensor<S>& x, std::size_t oh, std::size_t ow) { return TensorOps<S>::bilinear_resize(x, oh, ow); }
template <typename S> Tensor<S> conv2d_3x3(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) { return TensorOps<S>::conv2d_3x3(x, w, b); }

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace sta
