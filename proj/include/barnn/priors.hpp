#pragma once

// Weight priors and their KL divergences against the rate-scaled posterior.
//
// tVAMP: the prior at step t is the batch aggregate of the posteriors,
//   p(w^l) = N(beta^l W^l, (gamma^l W^l)^2),
//   beta^l = mean_k alpha^l_k,  gamma^l = sqrt(mean_k (alpha^l_k)^2),
// and KL(N(aW, (aW)^2) || p) summed over the |W^l| weights of layer l is
//   |W^l|/2 * [((a - beta)/gamma)^2 + (a/gamma)^2 - 1 - 2 ln(a/gamma)],
// which does not depend on the weight values.

#include <span>
#include <vector>

#include "barnn/autodiff.hpp"
#include "barnn/tensor.hpp"

namespace barnn {

struct PriorStats {
  std::vector<double> beta;   // per layer
  std::vector<double> gamma;  // per layer, gamma >= beta > 0
  std::size_t t = 0;
};

enum class PriorKind { None, TVamp, LogUniform };

const char* to_string(PriorKind kind);

/// Batch mean and RMS of the rates, alpha_batch of shape [N, L].
PriorStats tvamp_stats(const Tensor& alpha_batch, std::size_t t = 0);

/// Closed-form KL of one sample's rates against the aggregated prior.
double kl_tvamp(std::span<const double> alpha, const PriorStats& stats, std::span<const double> layer_dims);

/// Molchanov et al. approximation of KL(N(W, a W^2) || log-uniform) for a
/// variance ratio a, summed over layer_dims weights per layer.
double kl_loguniform(std::span<const double> alpha_ratio, std::span<const double> layer_dims);
double kl_loguniform_per_weight(double alpha_ratio);

/// Batch-mean tVAMP KL for rates [B, L]. With stop_gradient the batch
/// statistics enter as constants.
ad::Var kl_tvamp_batch(ad::Var alpha, std::span<const double> layer_dims, bool stop_gradient = false);

/// Batch-mean log-uniform KL for variance ratios [B, L].
ad::Var kl_loguniform_batch(ad::Var alpha_ratio, std::span<const double> layer_dims);

}  // namespace barnn
