#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "placekit/nn.hpp"

namespace placekit {

// Central-difference gradient check at 64-bit precision.
//
// eval_grad: zero-grad state is the caller's responsibility inside the
// callback; it must run forward + backward and return the scalar loss, with
// gradients accumulated into the checked parameters.
// eval: forward only, returning the scalar loss at the current values.
//
// Returns the max over coordinates of |a - n| / max(|a|, |n|, 1e-8).
inline double grad_check(const std::function<double()>& eval_grad,
                         const std::function<double()>& eval,
                         const std::vector<nn::ParamT<double>*>& params,
                         double eps = 1e-5) {
  for (auto* p : params) p->grad.zero();
  double base = eval_grad();
  if (!std::isfinite(base))
    throw NonFiniteValue("grad_check: non-finite loss");

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad.data);

  double max_err = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& value = params[pi]->value.data;
    for (std::size_t i = 0; i < value.size(); ++i) {
      double keep = value[i];
      value[i] = keep + eps;
      double fp = eval();
      value[i] = keep - eps;
      double fm = eval();
      value[i] = keep;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NonFiniteValue("grad_check: non-finite perturbed loss");
      double numeric = (fp - fm) / (2 * eps);
      double a = analytic[pi][i];
      double err = std::abs(a - numeric) /
                   std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace placekit
