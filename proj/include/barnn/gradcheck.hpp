#pragma once

#include <functional>

#include "barnn/tensor.hpp"

namespace barnn {

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
/// Throws NumericError if any evaluation of f is non-finite.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

/// max_i |a_i - b_i| / max(|a|_inf, |b|_inf, floor). Norm-relative so that
/// near-zero coordinates do not dominate.
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace barnn
