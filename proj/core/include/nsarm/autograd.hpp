#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "nsarm/resample.hpp"
#include "nsarm/tensor.hpp"

namespace nsarm {

namespace detail {
template <class T>
struct Node {
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward;

  // Zero-initialised on first use.
  BasicTensor<T>& grad_buffer() {
    if (!has_grad) {
      grad = BasicTensor<T>(value.shape(), T(0));
      has_grad = true;
    }
    return grad;
  }
};
}  // namespace detail

// Handle to a node of the reverse-mode tape. Copies share the node.
template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(BasicTensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<detail::Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const BasicTensor<T>& value() const { return node_->value; }
  BasicTensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }
  // Gradient after backward(); zeros if this node received none.
  BasicTensor<T> grad() const {
    return node_->has_grad ? node_->grad : BasicTensor<T>(node_->value.shape(), T(0));
  }
  BasicTensor<T>& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() {
    node_->has_grad = false;
    node_->grad = BasicTensor<T>();
  }

  detail::Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

template <class T>
Var<T> constant(BasicTensor<T> value) {
  return Var<T>(std::move(value), false);
}
template <class T>
Var<T> parameter(BasicTensor<T> value) {
  return Var<T>(std::move(value), true);
}

// Seeds d(loss)/d(loss) = 1 and propagates through the tape. Leaf gradients accumulate.
template <class T>
void backward(const Var<T>& loss);

namespace ag {

template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> scale(const Var<T>& a, double s);
// x[..., D] + b[D]
template <class T> Var<T> add_bias(const Var<T>& x, const Var<T>& b);
// a[M,K] * b[K,N]
template <class T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// x[..., in] * w[in, out] + b[out]; `b` may be undefined.
template <class T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
// x[B,H,W,C], w[kh,kw,C,O], b[O]; zero padding.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::size_t stride, std::size_t pad);
template <class T> Var<T> gelu(const Var<T>& x);
template <class T> Var<T> sigmoid(const Var<T>& x);
// Normalises the last axis.
template <class T> Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps = 1e-5);
template <class T> Var<T> reshape(const Var<T>& x, Shape shape);
template <class T> Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
template <class T> Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t start, std::size_t length);
// Spatial resampling of [H,W,C] / [B,H,W,C]; identity extents pass through.
template <class T> Var<T> resize(const Var<T>& x, Extent target, ResampleKind kind);
// [..] -> [batch, ..]
template <class T> Var<T> tile_batch(const Var<T>& x, std::size_t batch);
// row[h,D], col[w,D] -> [h*w, D] with out[i*w+j] = row[i] + col[j]
template <class T> Var<T> grid_embed(const Var<T>& row, const Var<T>& col);

// Multi-head attention over a sequence split into blocks. qkv is [B, L, 3D]
// laid out as [q | k | v]; a query in block k attends to every key in blocks
// 1..k. block_ends holds cumulative block boundaries, back() == L.
template <class T>
Var<T> block_causal_attention(const Var<T>& qkv, std::size_t heads, const std::vector<std::size_t>& block_ends);

// Unit-normalises the last axis (vectors with norm <= eps map to zero).
template <class T> Var<T> normalize_last(const Var<T>& x, double eps = 1e-8);
// Binary spherical quantization of the last axis. Backward is the Jacobian of
// normalize_last (straight-through on the normalised vector).
template <class T> Var<T> bsq_straight_through(const Var<T>& x);
// Forward value `replacement`, identity gradient into x.
template <class T> Var<T> straight_through(const Var<T>& x, const BasicTensor<T>& replacement);
template <class T> Var<T> detach(const Var<T>& x);

template <class T> Var<T> sum(const Var<T>& x);
template <class T> Var<T> mean(const Var<T>& x);
// mean((a - b)^2)
template <class T> Var<T> mse(const Var<T>& a, const Var<T>& b);
// Mean of -[y log s(z) + (1-y) log(1-s(z))] with labels in {0,1}.
template <class T> Var<T> bce_with_logits(const Var<T>& logits, const BasicTensor<T>& labels);

}  // namespace ag
}  // namespace nsarm
