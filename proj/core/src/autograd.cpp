#include "nsarm/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

#include <Eigen/Core>

#include "nsarm/gemm.hpp"

namespace nsarm {

template <class T>
void backward(const Var<T>& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward on undefined Var");
  if (loss.value().size() != 1) throw ShapeError("backward expects a scalar loss, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;

  // iterative post-order DFS -> topological order
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> seen;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* n = *it;
    if (n->has_grad && n->backward) n->backward();
  }
}

namespace ag {
namespace {

template <class T>
using NodeP = detail::Node<T>*;

template <class T>
Var<T> make(BasicTensor<T> value, const std::vector<Var<T>>& inputs, const char* what) {
  ensure_finite(value, what);
  Var<T> out(std::move(value), false);
  bool rg = false;
  for (const auto& v : inputs) rg = rg || (v.defined() && v.requires_grad());
  if (rg) {
    out.node()->requires_grad = true;
    for (const auto& v : inputs) {
      if (v.defined()) out.node()->parents.push_back(v.node_ptr());
    }
  }
  return out;
}

template <class T>
bool wants(NodeP<T> n) {
  return n != nullptr && n->requires_grad;
}

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t i = from; i < to; ++i) n *= s[i];
  return n;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Var<T> out = make(nsarm::add(a.value(), b.value()), {a, b}, "add");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), pa = a.node(), pb = b.node();
    out.node()->backward = [self, pa, pb] {
      if (wants(pa)) add_inplace(pa->grad_buffer(), self->grad);
      if (wants(pb)) add_inplace(pb->grad_buffer(), self->grad);
    };
  }
  return out;
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Var<T> out = make(nsarm::sub(a.value(), b.value()), {a, b}, "sub");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), pa = a.node(), pb = b.node();
    out.node()->backward = [self, pa, pb] {
      if (wants(pa)) add_inplace(pa->grad_buffer(), self->grad);
      if (wants(pb)) {
        auto& g = pb->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self->grad[i];
      }
    };
  }
  return out;
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  BasicTensor<T> v = a.value();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= b.value()[i];
  Var<T> out = make(std::move(v), {a, b}, "mul");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), pa = a.node(), pb = b.node();
    out.node()->backward = [self, pa, pb] {
      if (wants(pa)) {
        auto& g = pa->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i] * pb->value[i];
      }
      if (wants(pb)) {
        auto& g = pb->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i] * pa->value[i];
      }
    };
  }
  return out;
}

template <class T>
Var<T> scale(const Var<T>& a, double s) {
  BasicTensor<T> v = a.value();
  for (auto& x : v.data()) x = static_cast<T>(x * s);
  Var<T> out = make(std::move(v), {a}, "scale");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), pa = a.node();
    out.node()->backward = [self, pa, s] {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(self->grad[i] * s);
    };
  }
  return out;
}

template <class T>
Var<T> add_bias(const Var<T>& x, const Var<T>& b) {
  const std::size_t d = b.value().size();
  if (x.shape().empty() || x.shape().back() != d) throw ShapeError("add_bias: trailing dimension mismatch");
  BasicTensor<T> v = x.value();
  const std::size_t rows = v.size() / d;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) v[r * d + j] += b.value()[j];
  Var<T> out = make(std::move(v), {x, b}, "add_bias");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node(), pb = b.node();
    out.node()->backward = [self, px, pb, rows, d] {
      if (wants(px)) add_inplace(px->grad_buffer(), self->grad);
      if (wants(pb)) {
        auto& g = pb->grad_buffer();
        for (std::size_t j = 0; j < d; ++j) {
          double s = 0.0;
          for (std::size_t r = 0; r < rows; ++r) s += self->grad[r * d + j];
          g[j] += static_cast<T>(s);
        }
      }
    };
  }
  return out;
}

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  BasicTensor<T> v({m, n});
  gemm<T>(false, false, m, n, k, T(1), a.value().ptr(), k, b.value().ptr(), n, T(0), v.ptr(), n);
  Var<T> out = make(std::move(v), {a, b}, "matmul");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), pa = a.node(), pb = b.node();
    out.node()->backward = [self, pa, pb, m, k, n] {
      if (wants(pa))
        gemm<T>(false, true, m, k, n, T(1), self->grad.ptr(), n, pb->value.ptr(), n, T(1), pa->grad_buffer().ptr(), k);
      if (wants(pb))
        gemm<T>(true, false, k, n, m, T(1), pa->value.ptr(), k, self->grad.ptr(), n, T(1), pb->grad_buffer().ptr(), n);
    };
  }
  return out;
}

template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (w.shape().size() != 2 || x.shape().empty() || x.shape().back() != w.shape()[0]) {
    throw ShapeError("linear: incompatible " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
  }
  const std::size_t in = w.shape()[0], outd = w.shape()[1];
  const std::size_t rows = x.value().size() / in;
  Shape os = x.shape();
  os.back() = outd;
  BasicTensor<T> v(os);
  gemm<T>(false, false, rows, outd, in, T(1), x.value().ptr(), in, w.value().ptr(), outd, T(0), v.ptr(), outd);
  if (b.defined()) {
    if (b.value().size() != outd) throw ShapeError("linear: bias size mismatch");
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < outd; ++j) v[r * outd + j] += b.value()[j];
  }
  Var<T> out = make(std::move(v), {x, w, b}, "linear");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node(), pw = w.node(), pb = b.defined() ? b.node() : nullptr;
    out.node()->backward = [self, px, pw, pb, rows, in, outd] {
      const T* g = self->grad.ptr();
      if (wants(px)) gemm<T>(false, true, rows, in, outd, T(1), g, outd, pw->value.ptr(), outd, T(1), px->grad_buffer().ptr(), in);
      if (wants(pw)) gemm<T>(true, false, in, outd, rows, T(1), px->value.ptr(), in, g, outd, T(1), pw->grad_buffer().ptr(), outd);
      if (wants(pb)) {
        auto& gb = pb->grad_buffer();
        for (std::size_t j = 0; j < outd; ++j) {
          double s = 0.0;
          for (std::size_t r = 0; r < rows; ++r) s += g[r * outd + j];
          gb[j] += static_cast<T>(s);
        }
      }
    };
  }
  return out;
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::size_t stride, std::size_t pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || ws[2] != xs[3]) {
    throw ShapeError("conv2d: incompatible input " + shape_str(xs) + " and kernel " + shape_str(ws));
  }
  if (stride == 0) throw std::invalid_argument("conv2d: zero stride");
  const std::size_t B = xs[0], H = xs[1], W = xs[2], C = xs[3];
  const std::size_t kh = ws[0], kw = ws[1], O = ws[3];
  if (H + 2 * pad < kh || W + 2 * pad < kw) throw ShapeError("conv2d: kernel larger than padded input");
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
  const std::size_t K = kh * kw * C;
  const std::size_t rows = B * Ho * Wo;

  // im2col in row chunks that stay cache resident; the backward pass rebuilds
  // each chunk instead of keeping the full column matrix alive.
  const std::size_t chunk = std::max<std::size_t>(1, (std::size_t{1} << 17) / K);
  auto fill_cols = [=](const T* xin, std::size_t r0, std::size_t r1, T* cols) {
    std::fill(cols, cols + (r1 - r0) * K, T(0));
    for (std::size_t r = r0; r < r1; ++r) {
      const std::size_t ox = r % Wo, oy = (r / Wo) % Ho, bi = r / (Wo * Ho);
      T* dst = cols + (r - r0) * K;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
        if (iy < 0 || iy >= static_cast<long>(H)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
          if (ix < 0 || ix >= static_cast<long>(W)) continue;
          const T* src = xin + ((bi * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * C;
          std::copy(src, src + C, dst + (ky * kw + kx) * C);
        }
      }
    }
  };

  BasicTensor<T> v({B, Ho, Wo, O});
  {
    std::vector<T> cols(chunk * K);
    for (std::size_t r0 = 0; r0 < rows; r0 += chunk) {
      const std::size_t r1 = std::min(rows, r0 + chunk);
      fill_cols(x.value().ptr(), r0, r1, cols.data());
      gemm<T>(false, false, r1 - r0, O, K, T(1), cols.data(), K, w.value().ptr(), O, T(0), v.ptr() + r0 * O, O);
    }
  }
  if (b.defined()) {
    if (b.value().size() != O) throw ShapeError("conv2d: bias size mismatch");
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < O; ++j) v[r * O + j] += b.value()[j];
  }
  Var<T> out = make(std::move(v), {x, w, b}, "conv2d");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node(), pw = w.node(), pb = b.defined() ? b.node() : nullptr;
    out.node()->backward = [=] {
      const T* g = self->grad.ptr();
      if (wants(pb)) {
        std::vector<double> acc(O, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < O; ++j) acc[j] += g[r * O + j];
        auto& gb = pb->grad_buffer();
        for (std::size_t j = 0; j < O; ++j) gb[j] += static_cast<T>(acc[j]);
      }
      const bool gw = wants(pw), gxw = wants(px);
      if (!gw && !gxw) return;
      std::vector<T> cols(chunk * K), dcols(gxw ? chunk * K : 0);
      T* gx = gxw ? px->grad_buffer().ptr() : nullptr;
      for (std::size_t r0 = 0; r0 < rows; r0 += chunk) {
        const std::size_t r1 = std::min(rows, r0 + chunk), n = r1 - r0;
        if (gw) {
          fill_cols(px->value.ptr(), r0, r1, cols.data());
          gemm<T>(true, false, K, O, n, T(1), cols.data(), K, g + r0 * O, O, T(1), pw->grad_buffer().ptr(), O);
        }
        if (!gxw) continue;
        gemm<T>(false, true, n, K, O, T(1), g + r0 * O, O, pw->value.ptr(), O, T(0), dcols.data(), K);
        for (std::size_t r = r0; r < r1; ++r) {
          const std::size_t ox = r % Wo, oy = (r / Wo) % Ho, bi = r / (Wo * Ho);
          const T* src = dcols.data() + (r - r0) * K;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              T* dst = gx + ((bi * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * C;
              const T* sp = src + (ky * kw + kx) * C;
              for (std::size_t c = 0; c < C; ++c) dst[c] += sp[c];
            }
          }
        }
      }
    };
  }
  return out;
}

template <class T>
Var<T> gelu(const Var<T>& x) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const std::size_t n = x.value().size();
  Eigen::Map<const Arr> z(x.value().ptr(), static_cast<Eigen::Index>(n));
  const T c = static_cast<T>(kGeluC), a = static_cast<T>(0.044715);
  BasicTensor<T> v(x.shape());
  // Vectorized results go to owned (aligned) arrays first: Eigen peels scalar
  // iterations up to the destination's alignment, which would make the
  // values depend on heap addresses.
  const Arr r = T(0.5) * z * (T(1) + (c * (z + a * z.cube())).tanh());
  std::copy(r.data(), r.data() + n, v.ptr());
  Var<T> out = make(std::move(v), {x}, "gelu");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px, n, c, a] {
      Eigen::Map<const Arr> zz(px->value.ptr(), static_cast<Eigen::Index>(n));
      Eigen::Map<const Arr> go(self->grad.ptr(), static_cast<Eigen::Index>(n));
      const Arr t = (c * (zz + a * zz.cube())).tanh();
      const Arr du = c * (T(1) + T(3) * a * zz.square());
      const Arr d = go * (T(0.5) * (T(1) + t) + T(0.5) * zz * (T(1) - t.square()) * du);
      T* g = px->grad_buffer().ptr();
      for (std::size_t i = 0; i < n; ++i) g[i] += d[static_cast<Eigen::Index>(i)];
    };
  }
  return out;
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  BasicTensor<T> v = x.value();
  for (auto& e : v.data()) {
    const double z = e;
    e = static_cast<T>(z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)));
  }
  Var<T> out = make(std::move(v), {x}, "sigmoid");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px] {
      auto& g = px->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = self->value[i];
        g[i] += static_cast<T>(self->grad[i] * s * (1.0 - s));
      }
    };
  }
  return out;
}

template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps) {
  const std::size_t d = x.shape().back();
  if (gain.value().size() != d || bias.value().size() != d) throw ShapeError("layer_norm: parameter size mismatch");
  const std::size_t rows = x.value().size() / d;
  auto xhat = std::make_shared<std::vector<double>>(rows * d);
  auto rstd = std::make_shared<std::vector<double>>(rows);
  BasicTensor<T> v(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.value().ptr() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mu) * rs;
      (*xhat)[r * d + j] = h;
      v[r * d + j] = static_cast<T>(h * gain.value()[j] + bias.value()[j]);
    }
  }
  Var<T> out = make(std::move(v), {x, gain, bias}, "layer_norm");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node(), pg = gain.node(), pb = bias.node();
    out.node()->backward = [=] {
      const auto& g = self->grad;
      if (wants(pg) || wants(pb)) {
        std::vector<double> sg(d, 0.0), sb(d, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) {
            sg[j] += g[r * d + j] * (*xhat)[r * d + j];
            sb[j] += g[r * d + j];
          }
        if (wants(pg)) {
          auto& gg = pg->grad_buffer();
          for (std::size_t j = 0; j < d; ++j) gg[j] += static_cast<T>(sg[j]);
        }
        if (wants(pb)) {
          auto& gb = pb->grad_buffer();
          for (std::size_t j = 0; j < d; ++j) gb[j] += static_cast<T>(sb[j]);
        }
      }
      if (wants(px)) {
        auto& gx = px->grad_buffer();
        std::vector<double> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = static_cast<double>(g[r * d + j]) * pg->value[j];
            m1 += dh[j];
            m2 += dh[j] * (*xhat)[r * d + j];
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] += static_cast<T>((*rstd)[r] * (dh[j] - m1 - (*xhat)[r * d + j] * m2));
        }
      }
    };
  }
  return out;
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Var<T> out = make(x.value().reshaped(std::move(shape)), {x}, "reshape");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px] {
      auto& g = px->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self->grad[i];
    };
  }
  return out;
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw ShapeError("concat: axis out of range");
  const std::size_t outer = prod(s0, 0, axis);
  const std::size_t inner = prod(s0, axis + 1, s0.size());
  std::size_t total = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != s0[i]) throw ShapeError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
    lens.push_back(s[axis]);
    total += s[axis];
  }
  Shape os = s0;
  os[axis] = total;
  BasicTensor<T> v(os);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t chunk = lens[p] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      const T* src = parts[p].value().ptr() + o * chunk;
      std::copy(src, src + chunk, v.ptr() + o * total * inner + off * inner);
    }
    off += lens[p];
  }
  Var<T> out = make(std::move(v), parts, "concat");
  if (out.requires_grad()) {
    NodeP<T> self = out.node();
    std::vector<NodeP<T>> ps;
    for (const auto& p : parts) ps.push_back(p.node());
    out.node()->backward = [self, ps, lens, outer, inner, total] {
      std::size_t off2 = 0;
      for (std::size_t p = 0; p < ps.size(); ++p) {
        const std::size_t chunk = lens[p] * inner;
        if (wants(ps[p])) {
          T* g = ps[p]->grad_buffer().ptr();
          for (std::size_t o = 0; o < outer; ++o) {
            const T* src = self->grad.ptr() + o * total * inner + off2 * inner;
            for (std::size_t i = 0; i < chunk; ++i) g[o * chunk + i] += src[i];
          }
        }
        off2 += lens[p];
      }
    };
  }
  return out;
}

template <class T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw ShapeError("slice: range out of bounds for " + shape_str(s));
  }
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t inner = prod(s, axis + 1, s.size());
  const std::size_t full = s[axis];
  Shape os = s;
  os[axis] = length;
  BasicTensor<T> v(os);
  for (std::size_t o = 0; o < outer; ++o) {
    const T* src = x.value().ptr() + (o * full + start) * inner;
    std::copy(src, src + length * inner, v.ptr() + o * length * inner);
  }
  Var<T> out = make(std::move(v), {x}, "slice");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px, outer, inner, full, start, length] {
      T* g = px->grad_buffer().ptr();
      for (std::size_t o = 0; o < outer; ++o) {
        const T* src = self->grad.ptr() + o * length * inner;
        T* dst = g + (o * full + start) * inner;
        for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
      }
    };
  }
  return out;
}

template <class T>
Var<T> resize(const Var<T>& x, Extent target, ResampleKind kind) {
  const Extent from = spatial_extent(x.shape());
  if (from == target) return x;
  auto tables = std::make_shared<std::pair<ResampleTable, ResampleTable>>(resample_tables(kind, from, target));
  Var<T> out = make(apply_resample(x.value(), tables->first, tables->second), {x}, "resize");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px, tables] {
      add_inplace(px->grad_buffer(), apply_resample_adjoint(self->grad, tables->first, tables->second));
    };
  }
  return out;
}

template <class T>
Var<T> tile_batch(const Var<T>& x, std::size_t batch) {
  Shape os{batch};
  os.insert(os.end(), x.shape().begin(), x.shape().end());
  BasicTensor<T> v(os);
  const std::size_t n = x.value().size();
  for (std::size_t b = 0; b < batch; ++b) std::copy(x.value().ptr(), x.value().ptr() + n, v.ptr() + b * n);
  Var<T> out = make(std::move(v), {x}, "tile_batch");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px, batch, n] {
      auto& g = px->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i) g[i] += self->grad[b * n + i];
    };
  }
  return out;
}

template <class T>
Var<T> grid_embed(const Var<T>& row, const Var<T>& col) {
  if (row.shape().size() != 2 || col.shape().size() != 2 || row.shape()[1] != col.shape()[1]) {
    throw ShapeError("grid_embed: expected [h,D] and [w,D]");
  }
  const std::size_t h = row.shape()[0], w = col.shape()[0], d = row.shape()[1];
  BasicTensor<T> v({h * w, d});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t c = 0; c < d; ++c) v[(i * w + j) * d + c] = row.value()[i * d + c] + col.value()[j * d + c];
  Var<T> out = make(std::move(v), {row, col}, "grid_embed");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), pr = row.node(), pc = col.node();
    out.node()->backward = [self, pr, pc, h, w, d] {
      const auto& g = self->grad;
      if (wants(pr)) {
        auto& gr = pr->grad_buffer();
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j)
            for (std::size_t c = 0; c < d; ++c) gr[i * d + c] += g[(i * w + j) * d + c];
      }
      if (wants(pc)) {
        auto& gc = pc->grad_buffer();
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j)
            for (std::size_t c = 0; c < d; ++c) gc[j * d + c] += g[(i * w + j) * d + c];
      }
    };
  }
  return out;
}

template <class T>
Var<T> block_causal_attention(const Var<T>& qkv, std::size_t heads, const std::vector<std::size_t>& block_ends) {
  const Shape& s = qkv.shape();
  if (s.size() != 3 || s[2] % 3 != 0) throw ShapeError("attention: expected [B, L, 3D], got " + shape_str(s));
  const std::size_t B = s[0], L = s[1], D = s[2] / 3;
  if (heads == 0 || D % heads != 0) throw ShapeError("attention: model dim not divisible by heads");
  if (block_ends.empty() || block_ends.back() != L) throw ShapeError("attention: block boundaries do not cover sequence");
  const std::size_t dh = D / heads;
  const std::size_t ld = 3 * D;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  // probability storage layout: [B][heads][block] each n_k x end_k
  std::vector<std::size_t> pofs{0};
  std::size_t prev = 0;
  for (std::size_t e : block_ends) {
    if (e <= prev) throw ShapeError("attention: block boundaries must increase");
    pofs.push_back(pofs.back() + (e - prev) * e);
    prev = e;
  }
  const std::size_t per_head = pofs.back();
  auto probs = std::make_shared<std::vector<T>>(B * heads * per_head);

  BasicTensor<T> v({B, L, D});
  for (std::size_t b = 0; b < B; ++b) {
    const T* base = qkv.value().ptr() + b * L * ld;
    for (std::size_t h = 0; h < heads; ++h) {
      const T* q = base + h * dh;
      const T* k = base + D + h * dh;
      const T* vv = base + 2 * D + h * dh;
      std::size_t start = 0;
      for (std::size_t blk = 0; blk < block_ends.size(); ++blk) {
        const std::size_t end = block_ends[blk], n = end - start;
        T* p = probs->data() + (b * heads + h) * per_head + pofs[blk];
        gemm<T>(false, true, n, end, dh, static_cast<T>(sc), q + start * ld, ld, k, ld, T(0), p, end);
        for (std::size_t r = 0; r < n; ++r) {
          T* row = p + r * end;
          Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> a(row, static_cast<Eigen::Index>(end));
          const Eigen::Array<T, Eigen::Dynamic, 1> e = (a - a.maxCoeff()).exp();
          double z = 0.0;
          for (std::size_t c = 0; c < end; ++c) z += e[static_cast<Eigen::Index>(c)];
          const T inv = static_cast<T>(1.0 / z);
          for (std::size_t c = 0; c < end; ++c) row[c] = e[static_cast<Eigen::Index>(c)] * inv;
        }
        gemm<T>(false, false, n, dh, end, T(1), p, end, vv, ld, T(0), v.ptr() + (b * L + start) * D + h * dh, D);
        start = end;
      }
    }
  }

  Var<T> out = make(std::move(v), {qkv}, "attention");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = qkv.node();
    out.node()->backward = [=] {
      T* gq_all = px->grad_buffer().ptr();
      std::vector<T> dp;
      for (std::size_t b = 0; b < B; ++b) {
        const T* base = px->value.ptr() + b * L * ld;
        T* gbase = gq_all + b * L * ld;
        const T* go = self->grad.ptr() + b * L * D;
        for (std::size_t h = 0; h < heads; ++h) {
          const T* q = base + h * dh;
          const T* k = base + D + h * dh;
          const T* vv = base + 2 * D + h * dh;
          T* gq = gbase + h * dh;
          T* gk = gbase + D + h * dh;
          T* gv = gbase + 2 * D + h * dh;
          std::size_t start = 0;
          for (std::size_t blk = 0; blk < block_ends.size(); ++blk) {
            const std::size_t end = block_ends[blk], n = end - start;
            const T* p = probs->data() + (b * heads + h) * per_head + pofs[blk];
            const T* gob = go + start * D + h * dh;
            // dV += P^T dO
            gemm<T>(true, false, end, dh, n, T(1), p, end, gob, D, T(1), gv, ld);
            // dP = dO V^T
            dp.assign(n * end, T(0));
            gemm<T>(false, true, n, end, dh, T(1), gob, D, vv, ld, T(0), dp.data(), end);
            for (std::size_t r = 0; r < n; ++r) {
              double dot = 0.0;
              for (std::size_t c = 0; c < end; ++c) dot += static_cast<double>(dp[r * end + c]) * p[r * end + c];
              for (std::size_t c = 0; c < end; ++c)
                dp[r * end + c] = static_cast<T>(p[r * end + c] * (dp[r * end + c] - dot));
            }
            // dQ += sc * dS K ; dK += sc * dS^T Q
            gemm<T>(false, false, n, dh, end, static_cast<T>(sc), dp.data(), end, k, ld, T(1), gq + start * ld, ld);
            gemm<T>(true, false, end, dh, n, static_cast<T>(sc), dp.data(), end, q + start * ld, ld, T(1), gk, ld);
            start = end;
          }
        }
      }
    };
  }
  return out;
}

template <class T>
Var<T> normalize_last(const Var<T>& x, double eps) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.value().size() / d;
  auto norms = std::make_shared<std::vector<double>>(rows);
  BasicTensor<T> v = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(v[r * d + j]) * v[r * d + j];
    const double n = std::sqrt(s);
    (*norms)[r] = n;
    for (std::size_t j = 0; j < d; ++j) v[r * d + j] = n > eps ? static_cast<T>(v[r * d + j] / n) : T(0);
  }
  Var<T> out = make(std::move(v), {x}, "normalize_last");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px, norms, rows, d, eps] {
      auto& g = px->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        const double n = (*norms)[r];
        if (n <= eps) continue;
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(self->grad[r * d + j]) * (px->value[r * d + j] / n);
        for (std::size_t j = 0; j < d; ++j) {
          const double u = px->value[r * d + j] / n;
          g[r * d + j] += static_cast<T>((self->grad[r * d + j] - u * dot) / n);
        }
      }
    };
  }
  return out;
}

template <class T>
Var<T> bsq_straight_through(const Var<T>& x) {
  constexpr double eps = 1e-8;
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.value().size() / d;
  const double mag = 1.0 / std::sqrt(static_cast<double>(d));
  auto norms = std::make_shared<std::vector<double>>(rows);
  BasicTensor<T> v = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(v[r * d + j]) * v[r * d + j];
    const double n = std::sqrt(s);
    (*norms)[r] = n;
    for (std::size_t j = 0; j < d; ++j) {
      const bool bit = n > eps ? v[r * d + j] >= T(0) : true;
      v[r * d + j] = static_cast<T>(bit ? mag : -mag);
    }
  }
  Var<T> out = make(std::move(v), {x}, "bsq_straight_through");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px, norms, rows, d] {
      auto& g = px->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        const double n = (*norms)[r];
        if (n <= eps) {
          // vanishing vector: pass the gradient through unchanged
          for (std::size_t j = 0; j < d; ++j) g[r * d + j] += self->grad[r * d + j];
          continue;
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(self->grad[r * d + j]) * (px->value[r * d + j] / n);
        for (std::size_t j = 0; j < d; ++j) {
          const double u = px->value[r * d + j] / n;
          g[r * d + j] += static_cast<T>((self->grad[r * d + j] - u * dot) / n);
        }
      }
    };
  }
  return out;
}

template <class T>
Var<T> straight_through(const Var<T>& x, const BasicTensor<T>& replacement) {
  if (replacement.shape() != x.shape()) throw ShapeError("straight_through: shape mismatch");
  Var<T> out = make(replacement, {x}, "straight_through");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px] { add_inplace(px->grad_buffer(), self->grad); };
  }
  return out;
}

template <class T>
Var<T> detach(const Var<T>& x) {
  return Var<T>(x.value(), false);
}

template <class T>
Var<T> sum(const Var<T>& x) {
  Var<T> out = make(BasicTensor<T>::scalar(static_cast<T>(nsarm::sum(x.value()))), {x}, "sum");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px] {
      auto& g = px->grad_buffer();
      const T s = self->grad[0];
      for (auto& e : g.data()) e += s;
    };
  }
  return out;
}

template <class T>
Var<T> mean(const Var<T>& x) {
  const double n = static_cast<double>(x.value().size());
  Var<T> out = make(BasicTensor<T>::scalar(static_cast<T>(nsarm::sum(x.value()) / n)), {x}, "mean");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), px = x.node();
    out.node()->backward = [self, px, n] {
      auto& g = px->grad_buffer();
      const T s = static_cast<T>(self->grad[0] / n);
      for (auto& e : g.data()) e += s;
    };
  }
  return out;
}

template <class T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mse");
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = static_cast<double>(a.value()[i]) - static_cast<double>(b.value()[i]);
    s += d * d;
  }
  Var<T> out = make(BasicTensor<T>::scalar(static_cast<T>(s / n)), {a, b}, "mse");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), pa = a.node(), pb = b.node();
    out.node()->backward = [self, pa, pb, n] {
      const double k = 2.0 * self->grad[0] / n;
      const std::size_t m = pa->value.size();
      if (wants(pa)) {
        auto& g = pa->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          g[i] += static_cast<T>(k * (static_cast<double>(pa->value[i]) - static_cast<double>(pb->value[i])));
      }
      if (wants(pb)) {
        auto& g = pb->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          g[i] -= static_cast<T>(k * (static_cast<double>(pa->value[i]) - static_cast<double>(pb->value[i])));
      }
    };
  }
  return out;
}

template <class T>
Var<T> bce_with_logits(const Var<T>& logits, const BasicTensor<T>& labels) {
  if (labels.shape() != logits.shape()) {
    throw ShapeError("bce_with_logits: label shape " + shape_str(labels.shape()) + " vs logits " + shape_str(logits.shape()));
  }
  for (T y : labels.data()) {
    if (y != T(0) && y != T(1)) throw std::invalid_argument("bce_with_logits: labels must be 0 or 1");
  }
  const double n = static_cast<double>(labels.size());
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double z = logits.value()[i];
    // log(1 + exp(-|z|)) + max(z, 0) - z*y
    s += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  Var<T> out = make(BasicTensor<T>::scalar(static_cast<T>(s / n)), {logits}, "bce_with_logits");
  if (out.requires_grad()) {
    NodeP<T> self = out.node(), pz = logits.node();
    auto y = std::make_shared<BasicTensor<T>>(labels);
    out.node()->backward = [self, pz, y, n] {
      auto& g = pz->grad_buffer();
      const double k = self->grad[0] / n;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double z = pz->value[i];
        const double sg = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        g[i] += static_cast<T>(k * (sg - (*y)[i]));
      }
    };
  }
  return out;
}

#define NSARM_INSTANTIATE(T)                                                                       \
  template Var<T> add(const Var<T>&, const Var<T>&);                                               \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                               \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                               \
  template Var<T> scale(const Var<T>&, double);                                                    \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                                          \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                            \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                             \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t, std::size_t);   \
  template Var<T> gelu(const Var<T>&);                                                             \
  template Var<T> sigmoid(const Var<T>&);                                                          \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);                 \
  template Var<T> reshape(const Var<T>&, Shape);                                                   \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                                 \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t, std::size_t);                     \
  template Var<T> resize(const Var<T>&, Extent, ResampleKind);                                     \
  template Var<T> tile_batch(const Var<T>&, std::size_t);                                          \
  template Var<T> grid_embed(const Var<T>&, const Var<T>&);                                        \
  template Var<T> block_causal_attention(const Var<T>&, std::size_t, const std::vector<std::size_t>&); \
  template Var<T> normalize_last(const Var<T>&, double);                                           \
  template Var<T> bsq_straight_through(const Var<T>&);                                             \
  template Var<T> straight_through(const Var<T>&, const BasicTensor<T>&);                          \
  template Var<T> detach(const Var<T>&);                                                           \
  template Var<T> sum(const Var<T>&);                                                              \
  template Var<T> mean(const Var<T>&);                                                             \
  template Var<T> mse(const Var<T>&, const Var<T>&);                                               \
  template Var<T> bce_with_logits(const Var<T>&, const BasicTensor<T>&);

NSARM_INSTANTIATE(float)
NSARM_INSTANTIATE(double)
#undef NSARM_INSTANTIATE

}  // namespace ag

template void backward<float>(const Var<float>&);
template void backward<double>(const Var<double>&);

}  // namespace nsarm
