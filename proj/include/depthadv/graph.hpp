#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "depthadv/errors.hpp"
#include "depthadv/tensor.hpp"

namespace depthadv {

// Reverse-mode autodiff over dense tensors. A Graph instance is built
// eagerly (each op call computes its output and records a node) and is
// rebuilt for every forward pass; backward() walks the nodes in reverse
// creation order, which is a valid reverse-topological order because an
// op can only consume ids that already exist.
//
// Single-threaded per instance. Distinct instances are independent.

struct NodeId {
  int v = -1;
};

namespace detail {

// Forward convolution: y[co] = b[co] + sum_ci x[ci] * w[co,ci], zero
// padding, 64-bit accumulation per output plane.
template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, int ci_n, int h, int w_in,
                    int co_n, int kh, int kw, int stride, int pad, int oh_n, int ow_n,
                    std::vector<double>& acc) {
  acc.assign(std::size_t(oh_n) * ow_n, 0.0);
  for (int co = 0; co < co_n; ++co) {
    std::fill(acc.begin(), acc.end(), double(b[co]));
    for (int ci = 0; ci < ci_n; ++ci) {
      const T* xc = x + std::size_t(ci) * h * w_in;
      for (int u = 0; u < kh; ++u) {
        // valid output rows: 0 <= oh*stride + u - pad < h
        int oh_lo = 0;
        if (u < pad) oh_lo = (pad - u + stride - 1) / stride;
        int oh_hi = (h - 1 - u + pad) / stride;
        if (oh_hi > oh_n - 1) oh_hi = oh_n - 1;
        for (int v = 0; v < kw; ++v) {
          const double wv = double(w[((std::size_t(co) * ci_n + ci) * kh + u) * kw + v]);
          int ow_lo = 0;
          if (v < pad) ow_lo = (pad - v + stride - 1) / stride;
          int ow_hi = (w_in - 1 - v + pad) / stride;
          if (ow_hi > ow_n - 1) ow_hi = ow_n - 1;
          for (int oh = oh_lo; oh <= oh_hi; ++oh) {
            const T* xrow = xc + std::size_t(oh * stride + u - pad) * w_in + (v - pad);
            double* arow = acc.data() + std::size_t(oh) * ow_n;
            for (int ow = ow_lo; ow <= ow_hi; ++ow) arow[ow] += wv * double(xrow[ow * stride]);
          }
        }
      }
    }
    T* yc = y + std::size_t(co) * oh_n * ow_n;
    for (std::size_t i = 0; i < acc.size(); ++i) yc[i] = T(acc[i]);
  }
}

template <typename T>
void conv2d_backward_input(const T* dy, const T* w, T* dx, int ci_n, int h, int w_in, int co_n,
                           int kh, int kw, int stride, int pad, int oh_n, int ow_n) {
  for (int co = 0; co < co_n; ++co) {
    const T* dyc = dy + std::size_t(co) * oh_n * ow_n;
    for (int ci = 0; ci < ci_n; ++ci) {
      T* dxc = dx + std::size_t(ci) * h * w_in;
      for (int u = 0; u < kh; ++u) {
        int oh_lo = 0;
        if (u < pad) oh_lo = (pad - u + stride - 1) / stride;
        int oh_hi = (h - 1 - u + pad) / stride;
        if (oh_hi > oh_n - 1) oh_hi = oh_n - 1;
        for (int v = 0; v < kw; ++v) {
          const T wv = w[((std::size_t(co) * ci_n + ci) * kh + u) * kw + v];
          int ow_lo = 0;
          if (v < pad) ow_lo = (pad - v + stride - 1) / stride;
          int ow_hi = (w_in - 1 - v + pad) / stride;
          if (ow_hi > ow_n - 1) ow_hi = ow_n - 1;
          for (int oh = oh_lo; oh <= oh_hi; ++oh) {
            const T* dyrow = dyc + std::size_t(oh) * ow_n;
            T* dxrow = dxc + std::size_t(oh * stride + u - pad) * w_in + (v - pad);
            for (int ow = ow_lo; ow <= ow_hi; ++ow) dxrow[ow * stride] += wv * dyrow[ow];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_params(const T* dy, const T* x, T* dw, T* db, int ci_n, int h, int w_in,
                            int co_n, int kh, int kw, int stride, int pad, int oh_n, int ow_n) {
  for (int co = 0; co < co_n; ++co) {
    const T* dyc = dy + std::size_t(co) * oh_n * ow_n;
    if (db) {
      double s = 0.0;
      for (std::size_t i = 0; i < std::size_t(oh_n) * ow_n; ++i) s += double(dyc[i]);
      db[co] += T(s);
    }
    for (int ci = 0; ci < ci_n; ++ci) {
      const T* xc = x + std::size_t(ci) * h * w_in;
      for (int u = 0; u < kh; ++u) {
        int oh_lo = 0;
        if (u < pad) oh_lo = (pad - u + stride - 1) / stride;
        int oh_hi = (h - 1 - u + pad) / stride;
        if (oh_hi > oh_n - 1) oh_hi = oh_n - 1;
        for (int v = 0; v < kw; ++v) {
          int ow_lo = 0;
          if (v < pad) ow_lo = (pad - v + stride - 1) / stride;
          int ow_hi = (w_in - 1 - v + pad) / stride;
          if (ow_hi > ow_n - 1) ow_hi = ow_n - 1;
          double s = 0.0;
          for (int oh = oh_lo; oh <= oh_hi; ++oh) {
            const T* dyrow = dyc + std::size_t(oh) * ow_n;
            const T* xrow = xc + std::size_t(oh * stride + u - pad) * w_in + (v - pad);
            for (int ow = ow_lo; ow <= ow_hi; ++ow) s += double(dyrow[ow]) * double(xrow[ow * stride]);
          }
          dw[((std::size_t(co) * ci_n + ci) * kh + u) * kw + v] += T(s);
        }
      }
    }
  }
}

}  // namespace detail

template <typename T = float>
class Graph {
 public:
  // Leaves copy the tensor in; non-finite data is rejected here, at the
  // graph boundary.
  NodeId leaf(const Tensor<T>& t) {
    if (!all_finite(t)) throw NumericsError("non-finite values at graph boundary");
    Node n;
    n.op = Op::Leaf;
    n.val = t;
    n.needs_grad = t.requires_grad;
    n.is_leaf = true;
    return push(std::move(n));
  }

  // x: [Ci,H,W], w: [Co,Ci,kh,kw], b: [Co]; zero padding.
  NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride, int pad) {
    if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
    if (pad < 0) throw ShapeError("conv2d: negative padding");
    const Tensor<T>& xv = val(x);
    const Tensor<T>& wv = val(w);
    const Tensor<T>& bv = val(b);
    if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1)
      throw ShapeError("conv2d: expected x[C,H,W], w[Co,Ci,kh,kw], b[Co]");
    if (wv.shape[1] != xv.shape[0]) throw ShapeError("conv2d: input channel mismatch");
    if (bv.shape[0] != wv.shape[0]) throw ShapeError("conv2d: bias channel mismatch");
    int h = xv.shape[1], w_in = xv.shape[2], kh = wv.shape[2], kw = wv.shape[3];
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (w_in + 2 * pad - kw) / stride + 1;
    if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: kernel larger than padded input");
    Node n;
    n.op = Op::Conv2d;
    n.in0 = x.v;
    n.in1 = w.v;
    n.in2 = b.v;
    n.stride = stride;
    n.pad = pad;
    n.val = Tensor<T>({wv.shape[0], oh, ow});
    detail::conv2d_forward(xv.data.data(), wv.data.data(), bv.data.data(), n.val.data.data(),
                           xv.shape[0], h, w_in, wv.shape[0], kh, kw, stride, pad, oh, ow,
                           scratch_);
    n.needs_grad = needs(x) || needs(w) || needs(b);
    return push(std::move(n));
  }

  NodeId nearest_upsample2x(NodeId x) {
    const Tensor<T>& xv = val(x);
    if (xv.rank() != 3) throw ShapeError("nearest_upsample2x: expected [C,H,W]");
    int c = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
    Node n;
    n.op = Op::Upsample2x;
    n.in0 = x.v;
    n.val = Tensor<T>({c, 2 * h, 2 * w});
    for (int ci = 0; ci < c; ++ci)
      for (int i = 0; i < h; ++i) {
        const T* src = xv.data.data() + (std::size_t(ci) * h + i) * w;
        T* d0 = n.val.data.data() + (std::size_t(ci) * 2 * h + 2 * i) * 2 * w;
        T* d1 = d0 + 2 * w;
        for (int j = 0; j < w; ++j) {
          d0[2 * j] = d0[2 * j + 1] = src[j];
          d1[2 * j] = d1[2 * j + 1] = src[j];
        }
      }
    n.needs_grad = needs(x);
    return push(std::move(n));
  }

  NodeId relu(NodeId x) { return unary(Op::Relu, x); }
  NodeId elu(NodeId x) { return unary(Op::Elu, x); }
  NodeId sigmoid(NodeId x) { return unary(Op::Sigmoid, x); }
  NodeId abs(NodeId x) { return unary(Op::Abs, x); }

  NodeId add(NodeId a, NodeId b) { return binary(Op::Add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary(Op::Sub, a, b); }
  NodeId div_elementwise(NodeId a, NodeId b) { return binary(Op::DivElem, a, b); }

  NodeId mul_scalar(NodeId x, T s) {
    const Tensor<T>& xv = val(x);
    Node n;
    n.op = Op::MulScalar;
    n.in0 = x.v;
    n.scalar = s;
    n.val = Tensor<T>(xv.shape);
    for (std::size_t i = 0; i < xv.data.size(); ++i) n.val.data[i] = s * xv.data[i];
    n.needs_grad = needs(x);
    return push(std::move(n));
  }

  NodeId concat_channels(NodeId a, NodeId b) {
    const Tensor<T>& av = val(a);
    const Tensor<T>& bv = val(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.shape[1] != bv.shape[1] ||
        av.shape[2] != bv.shape[2])
      throw ShapeError("concat_channels: spatial dims must match");
    Node n;
    n.op = Op::ConcatCh;
    n.in0 = a.v;
    n.in1 = b.v;
    n.val = Tensor<T>({av.shape[0] + bv.shape[0], av.shape[1], av.shape[2]});
    std::copy(av.data.begin(), av.data.end(), n.val.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), n.val.data.begin() + av.data.size());
    n.needs_grad = needs(a) || needs(b);
    return push(std::move(n));
  }

  NodeId mean_all(NodeId x) {
    const Tensor<T>& xv = val(x);
    double s = 0.0;
    for (T v : xv.data) s += double(v);
    Node n;
    n.op = Op::MeanAll;
    n.in0 = x.v;
    n.val = Tensor<T>({1});
    n.val.data[0] = T(s / double(xv.data.size()));
    n.needs_grad = needs(x);
    return push(std::move(n));
  }

  const Tensor<T>& value(NodeId id) const { return val(id); }

  bool has_grad(NodeId id) const {
    return id.v >= 0 && id.v < int(nodes_.size()) && !nodes_[id.v].grad.empty();
  }

  const std::vector<T>& grad(NodeId id) const {
    if (!has_grad(id)) throw ShapeError("grad: node has no gradient (run backward first)");
    return nodes_[id.v].grad;
  }

  Tensor<T> grad_tensor(NodeId id) const {
    Tensor<T> g(val(id).shape);
    g.data = grad(id);
    return g;
  }

  // Populates d(loss)/d(node) for every node on a path to a grad-requiring
  // leaf. Loss must be scalar.
  void backward(NodeId loss) {
    Node& ln = node(loss);
    if (ln.val.data.size() != 1) throw ShapeError("backward: loss must be scalar");
    for (Node& n : nodes_)
      if (n.needs_grad)
        n.grad.assign(n.val.data.size(), T(0));
      else
        n.grad.clear();
    if (!ln.needs_grad) return;  // loss does not depend on any grad leaf
    ln.grad[0] = T(1);
    for (int i = loss.v; i >= 0; --i) {
      Node& n = nodes_[std::size_t(i)];
      if (!n.needs_grad || n.grad.empty()) continue;
      backward_node(n);
    }
  }

  int node_count() const { return int(nodes_.size()); }

 private:
  enum class Op { Leaf, Conv2d, Upsample2x, Relu, Elu, Sigmoid, Abs, Add, Sub, DivElem, MulScalar, ConcatCh, MeanAll };

  struct Node {
    Op op = Op::Leaf;
    int in0 = -1, in1 = -1, in2 = -1;
    T scalar = T(0);
    int stride = 1, pad = 0;
    Tensor<T> val;
    std::vector<T> grad;
    bool needs_grad = false;
    bool is_leaf = false;
  };

  std::vector<Node> nodes_;
  std::vector<double> scratch_;

  NodeId push(Node&& n) {
    nodes_.push_back(std::move(n));
    return NodeId{int(nodes_.size()) - 1};
  }

  Node& node(NodeId id) {
    if (id.v < 0 || id.v >= int(nodes_.size())) throw ShapeError("invalid node id");
    return nodes_[std::size_t(id.v)];
  }
  const Tensor<T>& val(NodeId id) const {
    if (id.v < 0 || id.v >= int(nodes_.size())) throw ShapeError("invalid node id");
    return nodes_[std::size_t(id.v)].val;
  }
  bool needs(NodeId id) const { return nodes_[std::size_t(id.v)].needs_grad; }

  NodeId unary(Op op, NodeId x) {
    const Tensor<T>& xv = val(x);
    Node n;
    n.op = op;
    n.in0 = x.v;
    n.val = Tensor<T>(xv.shape);
    const std::size_t m = xv.data.size();
    switch (op) {
      case Op::Relu:
        for (std::size_t i = 0; i < m; ++i) n.val.data[i] = xv.data[i] > T(0) ? xv.data[i] : T(0);
        break;
      case Op::Elu:
        for (std::size_t i = 0; i < m; ++i)
          n.val.data[i] = xv.data[i] > T(0) ? xv.data[i] : T(std::expm1(double(xv.data[i])));
        break;
      case Op::Sigmoid:
        for (std::size_t i = 0; i < m; ++i) {
          double z = double(xv.data[i]);
          double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
          n.val.data[i] = T(s);
        }
        break;
      case Op::Abs:
        for (std::size_t i = 0; i < m; ++i) n.val.data[i] = std::abs(xv.data[i]);
        break;
      default:
        throw ShapeError("unary: bad op");
    }
    n.needs_grad = needs(x);
    return push(std::move(n));
  }

  NodeId binary(Op op, NodeId a, NodeId b) {
    const Tensor<T>& av = val(a);
    const Tensor<T>& bv = val(b);
    if (!same_shape(av, bv)) throw ShapeError("elementwise op: shape mismatch");
    Node n;
    n.op = op;
    n.in0 = a.v;
    n.in1 = b.v;
    n.val = Tensor<T>(av.shape);
    const std::size_t m = av.data.size();
    switch (op) {
      case Op::Add:
        for (std::size_t i = 0; i < m; ++i) n.val.data[i] = av.data[i] + bv.data[i];
        break;
      case Op::Sub:
        for (std::size_t i = 0; i < m; ++i) n.val.data[i] = av.data[i] - bv.data[i];
        break;
      case Op::DivElem:
        for (std::size_t i = 0; i < m; ++i) n.val.data[i] = av.data[i] / bv.data[i];
        break;
      default:
        throw ShapeError("binary: bad op");
    }
    n.needs_grad = needs(a) || needs(b);
    return push(std::move(n));
  }

  void add_into(int dst, const T* g, std::size_t m) {
    Node& d = nodes_[std::size_t(dst)];
    if (!d.needs_grad) return;
    T* out = d.grad.data();
    for (std::size_t i = 0; i < m; ++i) out[i] += g[i];
  }

  void backward_node(Node& n) {
    const T* g = n.grad.data();
    const std::size_t m = n.grad.size();
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Conv2d: {
        Node& xn = nodes_[std::size_t(n.in0)];
        Node& wn = nodes_[std::size_t(n.in1)];
        Node& bn = nodes_[std::size_t(n.in2)];
        int ci_n = xn.val.shape[0], h = xn.val.shape[1], w_in = xn.val.shape[2];
        int co_n = wn.val.shape[0], kh = wn.val.shape[2], kw = wn.val.shape[3];
        int oh = n.val.shape[1], ow = n.val.shape[2];
        if (xn.needs_grad)
          detail::conv2d_backward_input(g, wn.val.data.data(), xn.grad.data(), ci_n, h, w_in,
                                        co_n, kh, kw, n.stride, n.pad, oh, ow);
        if (wn.needs_grad || bn.needs_grad)
          detail::conv2d_backward_params(g, xn.val.data.data(),
                                         wn.needs_grad ? wn.grad.data() : nullptr,
                                         bn.needs_grad ? bn.grad.data() : nullptr, ci_n, h, w_in,
                                         co_n, kh, kw, n.stride, n.pad, oh, ow);
        break;
      }
      case Op::Upsample2x: {
        Node& xn = nodes_[std::size_t(n.in0)];
        if (!xn.needs_grad) break;
        int c = xn.val.shape[0], h = xn.val.shape[1], w = xn.val.shape[2];
        for (int ci = 0; ci < c; ++ci)
          for (int i = 0; i < h; ++i) {
            const T* g0 = g + (std::size_t(ci) * 2 * h + 2 * i) * 2 * w;
            const T* g1 = g0 + 2 * w;
            T* dst = xn.grad.data() + (std::size_t(ci) * h + i) * w;
            for (int j = 0; j < w; ++j)
              dst[j] += g0[2 * j] + g0[2 * j + 1] + g1[2 * j] + g1[2 * j + 1];
          }
        break;
      }
      case Op::Relu: {
        Node& xn = nodes_[std::size_t(n.in0)];
        if (!xn.needs_grad) break;
        for (std::size_t i = 0; i < m; ++i)
          if (xn.val.data[i] > T(0)) xn.grad[i] += g[i];
        break;
      }
      case Op::Elu: {
        Node& xn = nodes_[std::size_t(n.in0)];
        if (!xn.needs_grad) break;
        for (std::size_t i = 0; i < m; ++i)
          xn.grad[i] += xn.val.data[i] > T(0) ? g[i] : g[i] * (n.val.data[i] + T(1));
        break;
      }
      case Op::Sigmoid: {
        Node& xn = nodes_[std::size_t(n.in0)];
        if (!xn.needs_grad) break;
        for (std::size_t i = 0; i < m; ++i) {
          T y = n.val.data[i];
          xn.grad[i] += g[i] * y * (T(1) - y);
        }
        break;
      }
      case Op::Abs: {
        Node& xn = nodes_[std::size_t(n.in0)];
        if (!xn.needs_grad) break;
        for (std::size_t i = 0; i < m; ++i) {
          T x = xn.val.data[i];
          if (x > T(0))
            xn.grad[i] += g[i];
          else if (x < T(0))
            xn.grad[i] -= g[i];
          // sign(0) = 0: no contribution
        }
        break;
      }
      case Op::Add:
        add_into(n.in0, g, m);
        add_into(n.in1, g, m);
        break;
      case Op::Sub: {
        add_into(n.in0, g, m);
        Node& bn = nodes_[std::size_t(n.in1)];
        if (bn.needs_grad)
          for (std::size_t i = 0; i < m; ++i) bn.grad[i] -= g[i];
        break;
      }
      case Op::DivElem: {
        Node& an = nodes_[std::size_t(n.in0)];
        Node& bn = nodes_[std::size_t(n.in1)];
        if (an.needs_grad)
          for (std::size_t i = 0; i < m; ++i) an.grad[i] += g[i] / bn.val.data[i];
        if (bn.needs_grad)
          for (std::size_t i = 0; i < m; ++i)
            bn.grad[i] -= g[i] * n.val.data[i] / bn.val.data[i];
        break;
      }
      case Op::MulScalar: {
        Node& xn = nodes_[std::size_t(n.in0)];
        if (!xn.needs_grad) break;
        for (std::size_t i = 0; i < m; ++i) xn.grad[i] += n.scalar * g[i];
        break;
      }
      case Op::ConcatCh: {
        Node& an = nodes_[std::size_t(n.in0)];
        Node& bn = nodes_[std::size_t(n.in1)];
        const std::size_t ma = an.val.data.size();
        if (an.needs_grad)
          for (std::size_t i = 0; i < ma; ++i) an.grad[i] += g[i];
        if (bn.needs_grad)
          for (std::size_t i = 0; i < bn.val.data.size(); ++i) bn.grad[i] += g[ma + i];
        break;
      }
      case Op::MeanAll: {
        Node& xn = nodes_[std::size_t(n.in0)];
        if (!xn.needs_grad) break;
        const T ginc = T(double(n.grad[0]) / double(xn.val.data.size()));
        for (std::size_t i = 0; i < xn.grad.size(); ++i) xn.grad[i] += ginc;
        break;
      }
    }
  }
};

// Differentiable clamp of z to [0,1], composed from the primitive ops:
// 1 - relu(1 - relu(z)). Gradient is 1 inside the range, 0 outside.
template <typename T>
inline NodeId clamp01(Graph<T>& g, NodeId z, NodeId ones) {
  NodeId r = g.relu(z);
  NodeId inner = g.relu(g.sub(ones, r));
  return g.sub(ones, inner);
}

}  // namespace depthadv
