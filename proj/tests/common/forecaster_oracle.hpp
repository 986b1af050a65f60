#pragma once

// Plain-tensor re-implementation of the BARNN forecaster forward pass and
// loss, used as an independent oracle and to locate relu kinks.

#include <algorithm>
#include <cmath>
#include <limits>

#include "barnn/forecaster.hpp"
#include "barnn/priors.hpp"

namespace oracle {

using barnn::Shape;
using barnn::Tensor;

struct Result {
  double loss = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();  // smallest |relu input| or nonzero sqrt output
};

inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b, Result& r, bool relu) {
  Tensor y(Shape{x.dim(0), w.dim(1)});
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < x.dim(1); ++k) s += x.at(i, k) * w.at(k, j);
      if (relu) {
        r.min_margin = std::min(r.min_margin, std::abs(s));
        s = std::max(0.0, s);
      }
      y.at(i, j) = s;
    }
  return y;
}

inline const Tensor& param(const barnn::ParameterSet& ps, const std::string& name) {
  for (const auto& p : ps.items())
    if (p.name == name) return p.value;
  throw std::runtime_error("no parameter " + name);
}

/// Stochastic BARNN-tVAMP loss at step t: MSE + kl_scale * batch-mean KL.
/// Noise blocks are drawn from `noise` in the same order as the library.
inline Result barnn_loss(const barnn::Forecaster& model, const barnn::ParameterSet& ps, const Tensor& window,
                         const Tensor& target, std::size_t t, std::uint64_t noise_seed, double kl_scale) {
  Result r;
  const Tensor x = model.features(window, t);
  const std::size_t batch = x.dim(0);
  Tensor e = affine(x, param(ps, "encoder.w0"), param(ps, "encoder.b0"), r, true);
  e = affine(e, param(ps, "encoder.w1"), param(ps, "encoder.b1"), r, true);
  const Tensor logits = affine(e, param(ps, "encoder.w2"), param(ps, "encoder.b2"), r, false);
  Tensor alpha = logits;
  for (double& v : alpha.data()) v = std::exp(v);

  barnn::Rng noise(noise_seed);
  Tensor h = affine(x, param(ps, "in.w"), param(ps, "in.b"), r, true);
  for (std::size_t l = 0; l < 2; ++l) {
    const Tensor& w = param(ps, "hidden" + std::to_string(l + 1) + ".w");
    const Tensor& b = param(ps, "hidden" + std::to_string(l + 1) + ".b");
    const Tensor eps = noise.normal_tensor(Shape{batch, w.dim(1)});
    Tensor next(Shape{batch, w.dim(1)});
    for (std::size_t i = 0; i < batch; ++i) {
      const double a = alpha.at(i, l);
      for (std::size_t j = 0; j < w.dim(1); ++j) {
        double m = 0.0, v = 0.0;
        for (std::size_t k = 0; k < w.dim(0); ++k) {
          m += a * h.at(i, k) * w.at(k, j);
          v += (a * h.at(i, k)) * (a * h.at(i, k)) * w.at(k, j) * w.at(k, j);
        }
        if (v > 0.0) r.min_margin = std::min(r.min_margin, std::sqrt(v));
        const double s = m + std::sqrt(v) * eps.at(i, j) + b[j];
        r.min_margin = std::min(r.min_margin, std::abs(s));
        next.at(i, j) = std::max(0.0, s);
      }
    }
    h = next;
  }
  const Tensor y = affine(h, param(ps, "out.w"), param(ps, "out.b"), r, false);
  double mse = 0.0;
  for (std::size_t i = 0; i < batch; ++i) mse += (y.at(i, 0) - target[i]) * (y.at(i, 0) - target[i]);
  mse /= static_cast<double>(batch);

  const auto stats = barnn::tvamp_stats(alpha, t);
  const auto dims = model.layer_dims();
  double kl = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double a[2] = {alpha.at(i, 0), alpha.at(i, 1)};
    kl += barnn::kl_tvamp(a, stats, dims);
  }
  r.loss = mse + kl_scale * kl / static_cast<double>(batch);
  return r;
}

}  // namespace oracle
