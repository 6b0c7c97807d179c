#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "nsarm/autograd.hpp"
#include "nsarm/nn.hpp"

namespace nsarm {

struct GradCheckOptions {
  double eps = 1e-4;
  // Denominator floor: coordinates whose analytic and numeric gradients are
  // both below this magnitude are compared in absolute terms.
  double floor = 1e-5;
  // Check at most this many coordinates (evenly strided); 0 checks all.
  std::size_t max_coords = 0;
};

// Max relative error between the tape gradient of `f` at `params` and central
// finite differences. Run it on a double instantiation: the perturbation is
// applied and the loss read back in 64-bit.
template <class T>
double grad_check(const std::function<Var<T>(const Var<T>&)>& f, const BasicTensor<T>& params,
                  const GradCheckOptions& opt = {}) {
  if (opt.eps < 1e-5 || opt.eps > 1e-2) throw std::invalid_argument("grad_check: eps must lie in [1e-5, 1e-2]");
  Var<T> p = parameter(params);
  Var<T> loss = f(p);
  if (loss.value().size() != 1) throw ShapeError("grad_check: f must return a scalar");
  backward(loss);
  const BasicTensor<T> analytic = p.grad();

  const std::size_t n = params.size();
  const std::size_t stride = (opt.max_coords == 0 || opt.max_coords >= n) ? 1 : n / opt.max_coords;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; i += stride) {
    BasicTensor<T> plus = params;
    BasicTensor<T> minus = params;
    plus[i] = static_cast<T>(static_cast<double>(plus[i]) + opt.eps);
    minus[i] = static_cast<T>(static_cast<double>(minus[i]) - opt.eps);
    const double fp = static_cast<double>(f(constant(plus)).value().item());
    const double fm = static_cast<double>(f(constant(minus)).value().item());
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw NonFiniteError("grad_check: non-finite f at perturbed point");
    const double numeric = (fp - fm) / (static_cast<double>(plus[i]) - static_cast<double>(minus[i]));
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

// Same check over every tensor of a parameter set; `loss` re-runs the forward
// pass with the parameters' current values (perturbed in place).
template <class T>
double grad_check_params(ParamSet<T>& params, const std::function<Var<T>()>& loss,
                         const GradCheckOptions& opt = {}) {
  if (opt.eps < 1e-5 || opt.eps > 1e-2) throw std::invalid_argument("grad_check: eps must lie in [1e-5, 1e-2]");
  params.zero_grad();
  backward(loss());
  const std::size_t total = params.scalar_count();
  const std::size_t stride = (opt.max_coords == 0 || opt.max_coords >= total) ? 1 : total / opt.max_coords;
  double worst = 0.0;
  std::size_t flat = 0;
  for (auto& [name, v] : params.items()) {
    const BasicTensor<T> analytic = v.grad();
    auto& value = v.mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i, ++flat) {
      if (flat % stride != 0) continue;
      const T orig = value[i];
      value[i] = static_cast<T>(static_cast<double>(orig) + opt.eps);
      const double hi = static_cast<double>(value[i]);
      const double fp = static_cast<double>(loss().value().item());
      value[i] = static_cast<T>(static_cast<double>(orig) - opt.eps);
      const double lo = static_cast<double>(value[i]);
      const double fm = static_cast<double>(loss().value().item());
      value[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) throw NonFiniteError("grad_check: non-finite f at perturbed point");
      const double numeric = (fp - fm) / (hi - lo);
      const double a = analytic[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor}));
    }
  }
  return worst;
}

}  // namespace nsarm
