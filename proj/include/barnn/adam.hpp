#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "barnn/params.hpp"

namespace barnn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: p -= lr * wd * p after the Adam step
};

/// Adam with bias correction and decoupled weight decay.
class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig config);

  /// One update. Throws NumericError naming the first parameter with a
  /// non-finite gradient; parameters are left untouched in that case.
  void step(ParameterSet& params, std::span<const Tensor> grads);

  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t steps_ = 0;
};

/// Rescales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace barnn
