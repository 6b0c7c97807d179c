#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nsarm/autograd.hpp"
#include "nsarm/rng.hpp"

namespace nsarm {

// Ordered, named collection of trainable tensors.
template <class T>
class ParamSet {
 public:
  Var<T> add(std::string name, BasicTensor<T> init) {
    for (const auto& [n, v] : items_) {
      if (n == name) throw std::invalid_argument("duplicate parameter name " + name);
    }
    Var<T> v = parameter(std::move(init));
    items_.emplace_back(std::move(name), v);
    return v;
  }

  const std::vector<std::pair<std::string, Var<T>>>& items() const { return items_; }
  std::vector<std::pair<std::string, Var<T>>>& items() { return items_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : items_) n += v.value().size();
    return n;
  }

  Var<T> find(const std::string& name) const {
    for (const auto& [n, v] : items_) {
      if (n == name) return v;
    }
    throw std::out_of_range("no parameter named " + name);
  }

  void zero_grad() {
    for (auto& [n, v] : items_) v.zero_grad();
  }

  BasicTensor<T> flatten() const {
    std::vector<T> out;
    out.reserve(scalar_count());
    for (const auto& [n, v] : items_) out.insert(out.end(), v.value().data().begin(), v.value().data().end());
    const std::size_t n = out.size();
    return BasicTensor<T>({n}, std::move(out));
  }

  void unflatten(const BasicTensor<T>& flat) {
    if (flat.size() != scalar_count()) throw ShapeError("unflatten: parameter count mismatch");
    std::size_t off = 0;
    for (auto& [n, v] : items_) {
      auto& dst = v.mutable_value();
      std::copy(flat.ptr() + off, flat.ptr() + off + dst.size(), dst.ptr());
      off += dst.size();
    }
  }

  // Copies values by name (with type conversion); every name must exist here.
  template <class U>
  void assign_from(const ParamSet<U>& other) {
    for (const auto& [n, v] : other.items()) {
      Var<T> dst = find(n);
      if (dst.shape() != v.shape()) {
        throw ShapeError("parameter " + n + " shape " + shape_str(v.shape()) + " vs " + shape_str(dst.shape()));
      }
      dst.mutable_value() = v.value().template cast<T>();
    }
  }

  std::map<std::string, Tensor> export_float() const {
    std::map<std::string, Tensor> out;
    for (const auto& [n, v] : items_) out.emplace(n, v.value().template cast<float>());
    return out;
  }

  // Loads every parameter of this set from `tensors`; extra entries are ignored.
  void import_float(const std::map<std::string, Tensor>& tensors) {
    for (auto& [n, v] : items_) {
      auto it = tensors.find(n);
      if (it == tensors.end()) throw std::runtime_error("checkpoint is missing tensor " + n);
      if (it->second.shape() != v.shape()) {
        throw ShapeError("checkpoint tensor " + n + " has shape " + shape_str(it->second.shape()) + ", expected " +
                         shape_str(v.shape()));
      }
      v.mutable_value() = it->second.template cast<T>();
    }
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> items_;
};

template <class T>
BasicTensor<T> random_normal(Shape shape, double stddev, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.normal() * stddev);
  return t;
}

template <class T>
struct Conv2d {
  Var<T> weight;
  Var<T> bias;
  std::size_t stride = 1;
  std::size_t pad = 1;

  Conv2d() = default;
  Conv2d(ParamSet<T>& ps, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
         std::size_t stride_, Rng& rng, double gain = 1.0)
      : stride(stride_), pad(kernel / 2) {
    const double fan_in = static_cast<double>(kernel * kernel * in);
    weight = ps.add(name + ".weight", random_normal<T>({kernel, kernel, in, out}, gain / std::sqrt(fan_in), rng));
    bias = ps.add(name + ".bias", BasicTensor<T>({out}));
  }

  Var<T> operator()(const Var<T>& x) const { return ag::conv2d(x, weight, bias, stride, pad); }
};

template <class T>
struct Linear {
  Var<T> weight;
  Var<T> bias;

  Linear() = default;
  Linear(ParamSet<T>& ps, const std::string& name, std::size_t in, std::size_t out, double stddev, Rng& rng) {
    weight = ps.add(name + ".weight", random_normal<T>({in, out}, stddev, rng));
    bias = ps.add(name + ".bias", BasicTensor<T>({out}));
  }

  Var<T> operator()(const Var<T>& x) const { return ag::linear(x, weight, bias); }
};

template <class T>
struct LayerNorm {
  Var<T> gain;
  Var<T> bias;

  LayerNorm() = default;
  LayerNorm(ParamSet<T>& ps, const std::string& name, std::size_t dim) {
    gain = ps.add(name + ".gain", BasicTensor<T>({dim}, T(1)));
    bias = ps.add(name + ".bias", BasicTensor<T>({dim}));
  }

  Var<T> operator()(const Var<T>& x) const { return ag::layer_norm(x, gain, bias); }
};

}  // namespace nsarm
