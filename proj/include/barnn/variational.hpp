#pragma once

// Posterior machinery: the dropout-rate encoder and linear layers sampled
// with the local reparametrization trick.
//
// Weights are stored [in, out] so a batch of activations H [B, in] maps to
// H W [B, out]. Biases are deterministic and never perturbed.

#include <cstddef>
#include <span>
#include <string>

#include "barnn/autodiff.hpp"
#include "barnn/params.hpp"
#include "barnn/rng.hpp"

namespace barnn {

enum class SampleMode {
  Stochastic,           // fresh eps ~ N(0, I) per call
  Map,                  // eps = 0
  DeterministicAlpha1,  // eps = 0 and alpha forced to 1
};

/// Parametrization of a layer's weight posterior given a per-sample rate a.
enum class PosteriorForm {
  ScaledMean,  // w ~ N(a W, (a W)^2)
  UnitMean,    // w ~ N(W, a^2 W^2), the classic variational-dropout form
};

const char* to_string(SampleMode mode);

/// Plain affine map H W + b.
ad::Var linear(ad::Var h, ad::Var weight, ad::Var bias);

/// Variational linear layer via local reparametrization. `alpha` has one
/// positive rate per batch row, shape [B]. `noise` must be non-null in
/// Stochastic mode; each call draws a fresh [B, out] standard normal block.
ad::Var var_linear_forward(ad::Var h, ad::Var weight, ad::Var bias, ad::Var alpha, SampleMode mode, Rng* noise,
                           PosteriorForm form = PosteriorForm::ScaledMean);

/// Same as above with an explicit noise block E [B, out]; E is ignored
/// outside Stochastic mode.
ad::Var var_linear_forward(ad::Var h, ad::Var weight, ad::Var bias, ad::Var alpha, SampleMode mode,
                           const Tensor& eps, PosteriorForm form = PosteriorForm::ScaledMean);

/// Inverted dropout on the inputs, then the affine map. Active at train and
/// test time.
ad::Var bernoulli_dropout_forward(ad::Var h, ad::Var weight, ad::Var bias, double drop_p, Rng& rng);
Tensor bernoulli_mask(Shape shape, double drop_p, Rng& rng);

/// Sinusoidal encoding of a timestep: for i < dim/2,
/// [sin(t w_i), cos(t w_i)] with w_i = period^(-2i/dim).
Tensor time_embedding(double t, std::size_t dim, double period = 1000.0);

/// MLP E_psi producing one dropout probability per variational layer.
/// Two ReLU hidden layers and a sigmoid head whose weights start at zero,
/// so an untrained encoder emits p = 0.5, alpha = 1.
class PosteriorEncoder {
 public:
  struct Rates {
    ad::Var p;      // [B, L], strictly inside (0, 1)
    ad::Var alpha;  // [B, L], alpha = p / (1 - p)
  };

  PosteriorEncoder() = default;
  PosteriorEncoder(ParameterSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden,
                   std::size_t outputs, Rng& init);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t outputs() const { return outputs_; }

  /// `bound` is the full model parameter list from ParameterSet::bind.
  Rates encode(std::span<const ad::Var> bound, ad::Var input) const;

 private:
  std::size_t input_dim_ = 0;
  std::size_t outputs_ = 0;
  std::size_t first_ = 0;  // index of the first of six parameters
};

}  // namespace barnn
