#include "barnn/adam.hpp"

#include <cmath>
#include <string>

#include "barnn/errors.hpp"

namespace barnn {

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
  for (const auto& p : params.items()) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void Adam::step(ParameterSet& params, std::span<const Tensor> grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw ShapeError("adam: " + std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) +
                     " parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw ShapeError("adam: gradient shape " + to_string(grads[i].shape()) + " for parameter " + params[i].name +
                       " of shape " + to_string(params[i].value.shape()));
    }
    if (!grads[i].all_finite()) throw NumericError("adam: non-finite gradient for parameter " + params[i].name);
  }

  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double decay = config_.lr * config_.weight_decay;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto p = params[i].value.data();
    auto g = grads[i].data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      p[k] -= decay * p[k];
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.data()) v *= s;
    }
  }
  return norm;
}

}  // namespace barnn
