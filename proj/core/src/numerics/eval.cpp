// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kernels.hpp"
#include "uniecs/numerics/graph.hpp"

namespace uniecs {
namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

template <typename T>
T stable_sigmoid(T x) {
  T y;
  if (x >= T{0}) {
    y = T{1} / (T{1} + std::exp(-x));
  } else {
    const T e = std::exp(x);
    y = e / (T{1} + e);
  }
  // Keep the open interval (0,1) even where the exact value rounds to 0 or 1.
  const T lo = std::numeric_limits<T>::min();
  const T hi = T{1} - std::numeric_limits<T>::epsilon() / T{2};
  return std::clamp(y, lo, hi);
}

template <typename T>
Tensor<T> like(const Node& node) {
  return Tensor<T>(node.shape);
}

[[noreturn]] void numeric_failure(const Node& node, const std::string& what) {
  throw NumericalError("node " + node.name + ": " + what);
}

template <typename T>
void softmax_rows(const Tensor<T>& x, Tensor<T>& y) {
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t r = 0; r < m; ++r) {
    const T* in = x.data() + r * n;
    T* out = y.data() + r * n;
    T mx = in[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
    T total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = std::exp(in[j] - mx);
      total += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= total;
  }
}

template <typename T>
class Forward {
 public:
  Forward(const Graph& g, const ParameterStore<T>& params, const TensorMap<T>& inputs)
      : g_(g), params_(params), inputs_(inputs) {
    ev_.values.resize(g.size());
    ev_.saved.resize(g.size());
    ev_.saved2.resize(g.size());
  }

  Evaluation<T> run() && {
    for (std::size_t i = 0; i < g_.size(); ++i) {
      const Node& node = g_.nodes()[i];
      ev_.values[i] = eval(node, i);
      if (node.op != Op::kConstant && !all_finite(ev_.values[i])) {
        numeric_failure(node, "produced a non-finite value");
      }
    }
    return std::move(ev_);
  }

 private:
  const Tensor<T>& in(const Node& node, std::size_t j) const { return ev_.values[node.inputs[j].index]; }

  Tensor<T> eval(const Node& node, std::size_t index) {
    switch (node.op) {
      case Op::kInput: {
        auto it = inputs_.find(node.name);
        if (it == inputs_.end()) throw Error("input '" + node.name + "' was not supplied");
        const Tensor<T>& t = it->second;
        if (t.size() != Tensor<T>::element_count(node.shape) || t.cols() != node.shape.back()) {
          throw ShapeError("input '" + node.name + "' expects shape " + to_string(node.shape) + ", got " +
                           to_string(t.shape()));
        }
        return Tensor<T>(node.shape, std::vector<T>(t.values().begin(), t.values().end()));
      }
      case Op::kParameter: {
        if (!params_.contains(node.name)) throw Error("parameter '" + node.name + "' was not supplied");
        const Tensor<T>& t = params_.at(node.name);
        if (t.size() != Tensor<T>::element_count(node.shape) || t.cols() != node.shape.back()) {
          throw ShapeError("parameter '" + node.name + "' expects shape " + to_string(node.shape) + ", got " +
                           to_string(t.shape()));
        }
        return Tensor<T>(node.shape, std::vector<T>(t.values().begin(), t.values().end()));
      }
      case Op::kConstant:
        return g_.constant(node.slot).template cast<T>();
      case Op::kMatMul: {
        const auto& a = in(node, 0);
        const auto& b = in(node, 1);
        Tensor<T> out = like<T>(node);
        kernels::gemm_nn(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols(), false);
        return out;
      }
      case Op::kMatMulNT: {
        const auto& a = in(node, 0);
        const auto& b = in(node, 1);
        Tensor<T> out = like<T>(node);
        kernels::gemm_nt(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.rows(), false, scratch_);
        return out;
      }
      case Op::kTranspose: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        kernels::transpose(x.data(), out.data(), x.rows(), x.cols());
        return out;
      }
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul: {
        const auto& a = in(node, 0);
        const auto& b = in(node, 1);
        Tensor<T> out = like<T>(node);
        const std::size_t n = out.size();
        if (node.op == Op::kAdd) {
          for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
        } else if (node.op == Op::kSub) {
          for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
        }
        return out;
      }
      case Op::kAddRow: {
        const auto& x = in(node, 0);
        const auto& r = in(node, 1);
        Tensor<T> out = like<T>(node);
        const std::size_t m = x.rows(), n = x.cols();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + r[j];
        }
        return out;
      }
      case Op::kSubCol:
      case Op::kMulCol: {
        const auto& x = in(node, 0);
        const auto& c = in(node, 1);
        Tensor<T> out = like<T>(node);
        const std::size_t m = x.rows(), n = x.cols();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = node.op == Op::kSubCol ? x[i * n + j] - c[i] : x[i * n + j] * c[i];
          }
        }
        return out;
      }
      case Op::kScale:
      case Op::kAddScalar: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        const T s = static_cast<T>(node.scalar);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = node.op == Op::kScale ? x[i] * s : x[i] + s;
        return out;
      }
      case Op::kSigmoid: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(x[i]);
        return out;
      }
      case Op::kTanh: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
        return out;
      }
      case Op::kGelu: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        Tensor<T> th = like<T>(node);
        const T c = static_cast<T>(kGeluC), a = static_cast<T>(kGeluA);
        for (std::size_t i = 0; i < out.size(); ++i) {
          const T v = x[i];
          th[i] = std::tanh(c * (v + a * v * v * v));
          out[i] = T{0.5} * v * (T{1} + th[i]);
        }
        ev_.saved[index] = std::move(th);
        return out;
      }
      case Op::kRelu: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
        return out;
      }
      case Op::kSquare: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * x[i];
        return out;
      }
      case Op::kSoftmax: {
        Tensor<T> out = like<T>(node);
        softmax_rows(in(node, 0), out);
        return out;
      }
      case Op::kLogSoftmax: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        Tensor<T> sm = like<T>(node);
        softmax_rows(x, sm);
        const std::size_t m = x.rows(), n = x.cols();
        for (std::size_t r = 0; r < m; ++r) {
          const T* xr = x.data() + r * n;
          T mx = xr[0];
          for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
          T total = 0;
          for (std::size_t j = 0; j < n; ++j) total += std::exp(xr[j] - mx);
          const T lse = mx + std::log(total);
          for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xr[j] - lse;
        }
        ev_.saved[index] = std::move(sm);
        return out;
      }
      case Op::kLayerNorm: {
        const auto& x = in(node, 0);
        const auto& gamma = in(node, 1);
        const auto& beta = in(node, 2);
        const std::size_t m = x.rows(), n = x.cols();
        Tensor<T> out = like<T>(node);
        Tensor<T> xhat = like<T>(node);
        Tensor<T> rstd(Shape{m});
        const T eps = static_cast<T>(node.scalar);
        for (std::size_t r = 0; r < m; ++r) {
          const T* xr = x.data() + r * n;
          T mu = 0;
          for (std::size_t j = 0; j < n; ++j) mu += xr[j];
          mu /= static_cast<T>(n);
          T var = 0;
          for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
          var /= static_cast<T>(n);
          const T rs = T{1} / std::sqrt(var + eps);
          rstd[r] = rs;
          for (std::size_t j = 0; j < n; ++j) {
            const T h = (xr[j] - mu) * rs;
            xhat[r * n + j] = h;
            out[r * n + j] = h * gamma[j] + beta[j];
          }
        }
        ev_.saved[index] = std::move(xhat);
        ev_.saved2[index] = std::move(rstd);
        return out;
      }
      case Op::kL2Normalize: {
        const auto& x = in(node, 0);
        const std::size_t m = x.rows(), n = x.cols();
        Tensor<T> out = like<T>(node);
        Tensor<T> norms(Shape{m});
        for (std::size_t r = 0; r < m; ++r) {
          T ss = 0;
          for (std::size_t j = 0; j < n; ++j) ss += x[r * n + j] * x[r * n + j];
          const T norm = std::sqrt(ss);
          if (!(norm > T{0})) numeric_failure(node, "cannot normalize zero vector in row " + std::to_string(r));
          norms[r] = norm;
          for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x[r * n + j] / norm;
        }
        ev_.saved[index] = std::move(norms);
        return out;
      }
      case Op::kConcatCols: {
        Tensor<T> out = like<T>(node);
        const std::size_t m = out.rows(), n = out.cols();
        std::size_t offset = 0;
        for (std::size_t p = 0; p < node.inputs.size(); ++p) {
          const auto& part = in(node, p);
          const std::size_t w = part.cols();
          for (std::size_t r = 0; r < m; ++r) {
            std::copy_n(part.data() + r * w, w, out.data() + r * n + offset);
          }
          offset += w;
        }
        return out;
      }
      case Op::kConcatRows: {
        Tensor<T> out = like<T>(node);
        T* dst = out.data();
        for (std::size_t p = 0; p < node.inputs.size(); ++p) {
          const auto& part = in(node, p);
          dst = std::copy_n(part.data(), part.size(), dst);
        }
        return out;
      }
      case Op::kSliceCols: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        const std::size_t w = node.last - node.first;
        for (std::size_t r = 0; r < x.rows(); ++r) {
          std::copy_n(x.data() + r * x.cols() + node.first, w, out.data() + r * w);
        }
        return out;
      }
      case Op::kSliceRows: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        std::copy_n(x.data() + node.first * x.cols(), out.size(), out.data());
        return out;
      }
      case Op::kGatherRows: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        const std::size_t n = x.cols();
        const auto& rows = *node.indices;
        for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(x.data() + rows[r] * n, n, out.data() + r * n);
        return out;
      }
      case Op::kSegmentMean: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        const std::size_t n = x.cols();
        const auto& segs = *node.segments;
        for (std::size_t s = 0; s < segs.size(); ++s) {
          if (segs[s].empty()) continue;
          T* o = out.data() + s * n;
          for (std::uint32_t r = segs[s].begin; r < segs[s].end; ++r) {
            for (std::size_t j = 0; j < n; ++j) o[j] += x[r * n + j];
          }
          const T inv = T{1} / static_cast<T>(segs[s].size());
          for (std::size_t j = 0; j < n; ++j) o[j] *= inv;
        }
        return out;
      }
      case Op::kAttention:
        return attention(node, index);
      case Op::kPick: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        const auto& cols = *node.indices;
        for (std::size_t r = 0; r < cols.size(); ++r) out[r] = x[r * x.cols() + cols[r]];
        return out;
      }
      case Op::kRowDot: {
        const auto& a = in(node, 0);
        const auto& b = in(node, 1);
        Tensor<T> out = like<T>(node);
        const std::size_t n = a.cols();
        for (std::size_t r = 0; r < a.rows(); ++r) {
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += a[r * n + j] * b[r * n + j];
          out[r] = acc;
        }
        return out;
      }
      case Op::kSum:
      case Op::kMean: {
        const auto& x = in(node, 0);
        T acc = 0;
        for (T v : x.values()) acc += v;
        if (node.op == Op::kMean) acc /= static_cast<T>(x.size());
        return Tensor<T>::scalar(acc);
      }
      case Op::kTopKMask: {
        const auto& x = in(node, 0);
        Tensor<T> out = like<T>(node);
        const std::size_t m = x.rows(), n = x.cols();
        std::vector<std::uint32_t> order;
        for (std::size_t r = 0; r < m; ++r) {
          order.clear();
          for (std::uint32_t j = 0; j < n; ++j) {
            if (!(node.flag && j == r)) order.push_back(j);
          }
          const std::size_t k = std::min(node.first, order.size());
          const T* xr = x.data() + r * n;
          std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                            [&](std::uint32_t a, std::uint32_t b) { return xr[a] > xr[b] || (xr[a] == xr[b] && a < b); });
          for (std::size_t i = 0; i < k; ++i) out[r * n + order[i]] = T{1};
        }
        return out;
      }
    }
    throw Error("unhandled op");
  }

  Tensor<T> attention(const Node& node, std::size_t index) {
    const auto& q = in(node, 0);
    const auto& k = in(node, 1);
    const auto& v = in(node, 2);
    const AttentionLayout& layout = *node.attention;
    const std::size_t width = q.cols();
    const std::size_t heads = layout.heads;
    const std::size_t dh = width / heads;
    const T scale = T{1} / std::sqrt(static_cast<T>(dh));
    Tensor<T> out = like<T>(node);

    std::size_t total = 0;
    for (const auto& span : layout.spans) total += heads * span.query.size() * span.key.size();
    std::vector<T> probs(total);
    std::size_t cursor = 0;
    for (const auto& span : layout.spans) {
      const std::size_t nk = span.key.size();
      if (nk == 0) continue;
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::uint32_t qi = span.query.begin; qi < span.query.end; ++qi) {
          T* p = probs.data() + cursor;
          cursor += nk;
          const T* qr = q.data() + qi * width + off;
          T mx = -std::numeric_limits<T>::infinity();
          for (std::size_t kj = 0; kj < nk; ++kj) {
            const T* kr = k.data() + (span.key.begin + kj) * width + off;
            T s = 0;
            for (std::size_t d = 0; d < dh; ++d) s += qr[d] * kr[d];
            p[kj] = s * scale;
            mx = std::max(mx, p[kj]);
          }
          T z = 0;
          for (std::size_t kj = 0; kj < nk; ++kj) {
            p[kj] = std::exp(p[kj] - mx);
            z += p[kj];
          }
          for (std::size_t kj = 0; kj < nk; ++kj) p[kj] /= z;
          T* o = out.data() + qi * width + off;
          for (std::size_t kj = 0; kj < nk; ++kj) {
            const T* vr = v.data() + (span.key.begin + kj) * width + off;
            for (std::size_t d = 0; d < dh; ++d) o[d] += p[kj] * vr[d];
          }
        }
      }
    }
    if (total > 0) ev_.saved[index] = Tensor<T>(Shape{total}, std::move(probs));
    return out;
  }

  const Graph& g_;
  const ParameterStore<T>& params_;
  const TensorMap<T>& inputs_;
  Evaluation<T> ev_;
  std::vector<T> scratch_;
};

template <typename T>
class Backward {
 public:
  Backward(const Graph& g, const Evaluation<T>& ev) : g_(g), ev_(ev), grads_(g.size()), live_(g.size(), false) {}

  void run(std::span<const Seed<T>> seeds) {
    for (const auto& seed : seeds) {
      const Node& node = g_.node(seed.node);
      if (ev_.value(seed.node).size() != 1) {
        throw Error("backward needs a scalar output, node " + node.name + " has shape " + to_string(node.shape));
      }
      if (node.requires_grad) live_[seed.node.index] = true;
    }
    for (std::size_t i = g_.size(); i-- > 0;) {
      if (!live_[i]) continue;
      for (NodeId j : g_.nodes()[i].inputs) {
        if (g_.node(j).requires_grad) live_[j.index] = true;
      }
    }
    for (const auto& seed : seeds) {
      if (!live_[seed.node.index]) continue;
      grad(seed.node.index)[0] += seed.weight;
    }
    for (std::size_t i = g_.size(); i-- > 0;) {
      if (!live_[i] || grads_[i].empty()) continue;
      step(g_.nodes()[i], i);
    }
  }

  Gradients<T> collect(const ParameterStore<T>& params) {
    Gradients<T> out;
    for (const auto& e : params.entries()) {
      auto id = g_.find_parameter(e.name);
      if (id && !grads_[id->index].empty()) {
        out.params.add(e.name, Tensor<T>(e.value.shape(), std::vector<T>(grads_[id->index].values().begin(),
                                                                          grads_[id->index].values().end())));
      } else {
        out.params.add(e.name, Tensor<T>(e.value.shape()));
      }
    }
    for (NodeId id : g_.inputs()) {
      const Node& node = g_.node(id);
      if (!node.requires_grad) continue;
      out.inputs.emplace(node.name, grads_[id.index].empty() ? Tensor<T>(node.shape) : grads_[id.index]);
    }
    return out;
  }

 private:
  Tensor<T>& grad(std::size_t i) {
    if (grads_[i].empty()) grads_[i] = Tensor<T>(g_.nodes()[i].shape);
    return grads_[i];
  }

  bool wants(const Node& node, std::size_t j) const { return live_[node.inputs[j].index]; }
  Tensor<T>& din(const Node& node, std::size_t j) { return grad(node.inputs[j].index); }
  const Tensor<T>& x(const Node& node, std::size_t j) const { return ev_.values[node.inputs[j].index]; }

  void step(const Node& node, std::size_t index) {
    const Tensor<T>& dy = grads_[index];
    const Tensor<T>& y = ev_.values[index];
    switch (node.op) {
      case Op::kInput:
      case Op::kParameter:
      case Op::kConstant:
      case Op::kTopKMask:
        return;
      case Op::kMatMul: {
        const auto& a = x(node, 0);
        const auto& b = x(node, 1);
        if (wants(node, 0)) kernels::gemm_nt(dy.data(), b.data(), din(node, 0).data(), a.rows(), b.cols(), a.cols(), true, scratch_);
        if (wants(node, 1)) kernels::gemm_tn(a.data(), dy.data(), din(node, 1).data(), a.rows(), a.cols(), b.cols(), true, scratch_);
        return;
      }
      case Op::kMatMulNT: {
        const auto& a = x(node, 0);
        const auto& b = x(node, 1);
        // y[m,n] = a[m,k] b[n,k]^T
        if (wants(node, 0)) kernels::gemm_nn(dy.data(), b.data(), din(node, 0).data(), a.rows(), b.rows(), a.cols(), true);
        if (wants(node, 1)) kernels::gemm_tn(dy.data(), a.data(), din(node, 1).data(), a.rows(), b.rows(), a.cols(), true, scratch_);
        return;
      }
      case Op::kTranspose: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        const std::size_t m = dy.rows(), n = dy.cols();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) dx[j * m + i] += dy[i * n + j];
        }
        return;
      }
      case Op::kAdd:
      case Op::kSub: {
        if (wants(node, 0)) {
          auto& da = din(node, 0);
          for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
        }
        if (wants(node, 1)) {
          auto& db = din(node, 1);
          if (node.op == Op::kAdd) {
            for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
          } else {
            for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
          }
        }
        return;
      }
      case Op::kMul: {
        const auto& a = x(node, 0);
        const auto& b = x(node, 1);
        if (wants(node, 0)) {
          auto& da = din(node, 0);
          for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b[i];
        }
        if (wants(node, 1)) {
          auto& db = din(node, 1);
          for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a[i];
        }
        return;
      }
      case Op::kAddRow: {
        const std::size_t m = dy.rows(), n = dy.cols();
        if (wants(node, 0)) {
          auto& dx = din(node, 0);
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        }
        if (wants(node, 1)) {
          auto& dr = din(node, 1);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) dr[j] += dy[i * n + j];
          }
        }
        return;
      }
      case Op::kSubCol: {
        const std::size_t m = dy.rows(), n = dy.cols();
        if (wants(node, 0)) {
          auto& dx = din(node, 0);
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        }
        if (wants(node, 1)) {
          auto& dc = din(node, 1);
          for (std::size_t i = 0; i < m; ++i) {
            T acc = 0;
            for (std::size_t j = 0; j < n; ++j) acc += dy[i * n + j];
            dc[i] -= acc;
          }
        }
        return;
      }
      case Op::kMulCol: {
        const auto& xv = x(node, 0);
        const auto& c = x(node, 1);
        const std::size_t m = dy.rows(), n = dy.cols();
        if (wants(node, 0)) {
          auto& dx = din(node, 0);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += dy[i * n + j] * c[i];
          }
        }
        if (wants(node, 1)) {
          auto& dc = din(node, 1);
          for (std::size_t i = 0; i < m; ++i) {
            T acc = 0;
            for (std::size_t j = 0; j < n; ++j) acc += dy[i * n + j] * xv[i * n + j];
            dc[i] += acc;
          }
        }
        return;
      }
      case Op::kScale: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        const T s = static_cast<T>(node.scalar);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * s;
        return;
      }
      case Op::kAddScalar: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        return;
      }
      case Op::kSigmoid: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * y[i] * (T{1} - y[i]);
        return;
      }
      case Op::kTanh: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * (T{1} - y[i] * y[i]);
        return;
      }
      case Op::kGelu: {
        if (!wants(node, 0)) return;
        const auto& xv = x(node, 0);
        const auto& th = ev_.saved[index];
        auto& dx = din(node, 0);
        const T c = static_cast<T>(kGeluC), a = static_cast<T>(kGeluA);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          const T v = xv[i];
          const T t = th[i];
          const T d = T{0.5} * (T{1} + t) + T{0.5} * v * (T{1} - t * t) * c * (T{1} + T{3} * a * v * v);
          dx[i] += dy[i] * d;
        }
        return;
      }
      case Op::kRelu: {
        if (!wants(node, 0)) return;
        const auto& xv = x(node, 0);
        auto& dx = din(node, 0);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          if (xv[i] > T{0}) dx[i] += dy[i];
        }
        return;
      }
      case Op::kSquare: {
        if (!wants(node, 0)) return;
        const auto& xv = x(node, 0);
        auto& dx = din(node, 0);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * T{2} * xv[i];
        return;
      }
      case Op::kSoftmax: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        const std::size_t m = dy.rows(), n = dy.cols();
        for (std::size_t r = 0; r < m; ++r) {
          T dot = 0;
          for (std::size_t j = 0; j < n; ++j) dot += dy[r * n + j] * y[r * n + j];
          for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += y[r * n + j] * (dy[r * n + j] - dot);
        }
        return;
      }
      case Op::kLogSoftmax: {
        if (!wants(node, 0)) return;
        const auto& sm = ev_.saved[index];
        auto& dx = din(node, 0);
        const std::size_t m = dy.rows(), n = dy.cols();
        for (std::size_t r = 0; r < m; ++r) {
          T total = 0;
          for (std::size_t j = 0; j < n; ++j) total += dy[r * n + j];
          for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += dy[r * n + j] - sm[r * n + j] * total;
        }
        return;
      }
      case Op::kLayerNorm: {
        const auto& gamma = x(node, 1);
        const auto& xhat = ev_.saved[index];
        const auto& rstd = ev_.saved2[index];
        const std::size_t m = dy.rows(), n = dy.cols();
        if (wants(node, 1)) {
          auto& dg = din(node, 1);
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t j = 0; j < n; ++j) dg[j] += dy[r * n + j] * xhat[r * n + j];
          }
        }
        if (wants(node, 2)) {
          auto& db = din(node, 2);
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t j = 0; j < n; ++j) db[j] += dy[r * n + j];
          }
        }
        if (wants(node, 0)) {
          auto& dx = din(node, 0);
          const T inv_n = T{1} / static_cast<T>(n);
          for (std::size_t r = 0; r < m; ++r) {
            T mean_d = 0, mean_dx = 0;
            for (std::size_t j = 0; j < n; ++j) {
              const T d = dy[r * n + j] * gamma[j];
              mean_d += d;
              mean_dx += d * xhat[r * n + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const T d = dy[r * n + j] * gamma[j];
              dx[r * n + j] += rstd[r] * (d - mean_d - xhat[r * n + j] * mean_dx);
            }
          }
        }
        return;
      }
      case Op::kL2Normalize: {
        if (!wants(node, 0)) return;
        const auto& norms = ev_.saved[index];
        auto& dx = din(node, 0);
        const std::size_t m = dy.rows(), n = dy.cols();
        for (std::size_t r = 0; r < m; ++r) {
          T dot = 0;
          for (std::size_t j = 0; j < n; ++j) dot += dy[r * n + j] * y[r * n + j];
          for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += (dy[r * n + j] - y[r * n + j] * dot) / norms[r];
        }
        return;
      }
      case Op::kConcatCols: {
        const std::size_t m = dy.rows(), n = dy.cols();
        std::size_t offset = 0;
        for (std::size_t p = 0; p < node.inputs.size(); ++p) {
          const std::size_t w = x(node, p).cols();
          if (wants(node, p)) {
            auto& dp = din(node, p);
            for (std::size_t r = 0; r < m; ++r) {
              for (std::size_t j = 0; j < w; ++j) dp[r * w + j] += dy[r * n + offset + j];
            }
          }
          offset += w;
        }
        return;
      }
      case Op::kConcatRows: {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < node.inputs.size(); ++p) {
          const std::size_t len = x(node, p).size();
          if (wants(node, p)) {
            auto& dp = din(node, p);
            for (std::size_t i = 0; i < len; ++i) dp[i] += dy[offset + i];
          }
          offset += len;
        }
        return;
      }
      case Op::kSliceCols: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        const std::size_t w = dy.cols(), n = dx.cols();
        for (std::size_t r = 0; r < dy.rows(); ++r) {
          for (std::size_t j = 0; j < w; ++j) dx[r * n + node.first + j] += dy[r * w + j];
        }
        return;
      }
      case Op::kSliceRows: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        const std::size_t base = node.first * dx.cols();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[base + i] += dy[i];
        return;
      }
      case Op::kGatherRows: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        const std::size_t n = dy.cols();
        const auto& rows = *node.indices;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          for (std::size_t j = 0; j < n; ++j) dx[rows[r] * n + j] += dy[r * n + j];
        }
        return;
      }
      case Op::kSegmentMean: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        const std::size_t n = dy.cols();
        const auto& segs = *node.segments;
        for (std::size_t s = 0; s < segs.size(); ++s) {
          if (segs[s].empty()) continue;
          const T inv = T{1} / static_cast<T>(segs[s].size());
          for (std::uint32_t r = segs[s].begin; r < segs[s].end; ++r) {
            for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += dy[s * n + j] * inv;
          }
        }
        return;
      }
      case Op::kAttention:
        attention_backward(node, index, dy);
        return;
      case Op::kPick: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        const std::size_t n = dx.cols();
        const auto& cols = *node.indices;
        for (std::size_t r = 0; r < cols.size(); ++r) dx[r * n + cols[r]] += dy[r];
        return;
      }
      case Op::kRowDot: {
        const auto& a = x(node, 0);
        const auto& b = x(node, 1);
        const std::size_t n = a.cols();
        if (wants(node, 0)) {
          auto& da = din(node, 0);
          for (std::size_t r = 0; r < a.rows(); ++r) {
            for (std::size_t j = 0; j < n; ++j) da[r * n + j] += dy[r] * b[r * n + j];
          }
        }
        if (wants(node, 1)) {
          auto& db = din(node, 1);
          for (std::size_t r = 0; r < a.rows(); ++r) {
            for (std::size_t j = 0; j < n; ++j) db[r * n + j] += dy[r] * a[r * n + j];
          }
        }
        return;
      }
      case Op::kSum:
      case Op::kMean: {
        if (!wants(node, 0)) return;
        auto& dx = din(node, 0);
        T g = dy[0];
        if (node.op == Op::kMean) g /= static_cast<T>(dx.size());
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g;
        return;
      }
    }
  }

  void attention_backward(const Node& node, std::size_t index, const Tensor<T>& dy) {
    const auto& q = x(node, 0);
    const auto& k = x(node, 1);
    const auto& v = x(node, 2);
    const AttentionLayout& layout = *node.attention;
    const std::size_t width = q.cols();
    const std::size_t heads = layout.heads;
    const std::size_t dh = width / heads;
    const T scale = T{1} / std::sqrt(static_cast<T>(dh));
    const Tensor<T>& probs = ev_.saved[index];
    Tensor<T>* dq = wants(node, 0) ? &din(node, 0) : nullptr;
    Tensor<T>* dk = wants(node, 1) ? &din(node, 1) : nullptr;
    Tensor<T>* dv = wants(node, 2) ? &din(node, 2) : nullptr;
    std::vector<T> dp;
    std::size_t cursor = 0;
    for (const auto& span : layout.spans) {
      const std::size_t nk = span.key.size();
      if (nk == 0) continue;
      dp.resize(nk);
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::uint32_t qi = span.query.begin; qi < span.query.end; ++qi) {
          const T* p = probs.data() + cursor;
          cursor += nk;
          const T* go = dy.data() + qi * width + off;
          T dot = 0;
          for (std::size_t kj = 0; kj < nk; ++kj) {
            const T* vr = v.data() + (span.key.begin + kj) * width + off;
            T s = 0;
            for (std::size_t d = 0; d < dh; ++d) s += go[d] * vr[d];
            dp[kj] = s;
            dot += s * p[kj];
          }
          if (dv) {
            for (std::size_t kj = 0; kj < nk; ++kj) {
              T* dvr = dv->data() + (span.key.begin + kj) * width + off;
              for (std::size_t d = 0; d < dh; ++d) dvr[d] += p[kj] * go[d];
            }
          }
          const T* qr = q.data() + qi * width + off;
          T* dqr = dq ? dq->data() + qi * width + off : nullptr;
          for (std::size_t kj = 0; kj < nk; ++kj) {
            const T ds = p[kj] * (dp[kj] - dot) * scale;
            const T* kr = k.data() + (span.key.begin + kj) * width + off;
            if (dqr) {
              for (std::size_t d = 0; d < dh; ++d) dqr[d] += ds * kr[d];
            }
            if (dk) {
              T* dkr = dk->data() + (span.key.begin + kj) * width + off;
              for (std::size_t d = 0; d < dh; ++d) dkr[d] += ds * qr[d];
            }
          }
        }
      }
    }
  }

  const Graph& g_;
  const Evaluation<T>& ev_;
  std::vector<Tensor<T>> grads_;
  std::vector<bool> live_;
  std::vector<T> scratch_;
};

}  // namespace

template <typename T>
Evaluation<T> forward(const Graph& graph, const ParameterStore<T>& params, const TensorMap<T>& inputs) {
  return Forward<T>(graph, params, inputs).run();
}

template <typename T>
Gradients<T> backward(const Graph& graph, const Evaluation<T>& eval, std::span<const Seed<T>> seeds,
                      const ParameterStore<T>& params) {
  if (eval.values.size() != graph.size()) throw Error("evaluation does not belong to this graph");
  Backward<T> pass(graph, eval);
  pass.run(seeds);
  return pass.collect(params);
}

template Evaluation<float> forward(const Graph&, const ParameterStore<float>&, const TensorMap<float>&);
template Evaluation<double> forward(const Graph&, const ParameterStore<double>&, const TensorMap<double>&);
template Evaluation<long double> forward(const Graph&, const ParameterStore<long double>&,
                                          const TensorMap<long double>&);
template Gradients<float> backward(const Graph&, const Evaluation<float>&, std::span<const Seed<float>>,
                                   const ParameterStore<float>&);
template Gradients<double> backward(const Graph&, const Evaluation<double>&, std::span<const Seed<double>>,
                                    const ParameterStore<double>&);

}  // namespace uniecs
