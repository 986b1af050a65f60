#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "barnn/autodiff.hpp"
#include "barnn/params.hpp"
#include "barnn/priors.hpp"
#include "barnn/rng.hpp"
#include "barnn/variational.hpp"

namespace barnn {

enum class Variant { BarnnTVamp, BarnnLogUniform, McDropout, PlainMlp, Static };

const char* to_string(Variant v);
/// Accepts the tags produced by to_string(Variant).
Variant parse_variant(const std::string& tag);
bool is_barnn(Variant v);
PriorKind prior_of(Variant v);

struct ForecasterConfig {
  Variant variant = Variant::BarnnTVamp;
  std::size_t window = 1;         // past states fed to the network
  std::size_t hidden = 64;
  std::size_t time_features = 8;  // sinusoidal embedding of t
  std::size_t encoder_hidden = 64;
  bool encoder_uses_time = true;
  double dropout_p = 0.2;         // McDropout only
  std::size_t horizon = 100;      // largest valid t
};

/// Autoregressive one-step forecaster y_t = f(y_{t-w..t-1}, t).
///
/// Layout: input map (relu), two hidden layers of `hidden` units (relu), and
/// a scalar output map. The two hidden layers are the variational layers
/// (BARNN variants) or the dropout sites (McDropout).
class Forecaster {
 public:
  static constexpr std::size_t kVariationalLayers = 2;

  struct Input {
    Tensor window;   // [B, window], oldest first
    Tensor initial;  // [B], y_0 of each row (used by the static baseline)
    std::size_t t = 1;
  };

  struct Output {
    ad::Var prediction;  // [B]
    ad::Var p;           // [B, L]; unset unless the variant has an encoder
    ad::Var alpha;       // [B, L]
  };

  struct Sampling {
    SampleMode mode = SampleMode::Stochastic;
    Rng* noise = nullptr;
    /// Optional per-row weight-space noise, one [B, in * out] block per
    /// variational layer, reused across calls to hold w fixed over a rollout.
    const std::vector<Tensor>* fixed_weight_noise = nullptr;
  };

  explicit Forecaster(ForecasterConfig config, std::uint64_t init_seed = 0);

  const ForecasterConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  std::array<double, kVariationalLayers> layer_dims() const;
  std::size_t feature_dim() const { return config_.window + config_.time_features; }

  /// Network input for a batch of windows at step t: [B, window + time_features].
  Tensor features(const Tensor& window, std::size_t t) const;

  Output forward(std::span<const ad::Var> bound, const Input& input, const Sampling& sampling) const;

  /// Gradient-free prediction, [B].
  Tensor predict(const Input& input, const Sampling& sampling) const;

 private:
  ad::Var hidden_layer(std::size_t layer, ad::Var h, std::span<const ad::Var> bound, const Output& rates,
                       const Sampling& sampling) const;

  ForecasterConfig config_;
  ParameterSet params_;
  PosteriorEncoder encoder_;
  std::size_t in_w_ = 0, hid_w_[kVariationalLayers] = {0, 0}, out_w_ = 0;
};

/// Windows [B, w] of states y_{t-w}, ..., y_{t-1} taken from rows of an
/// [N, T + 1] state tensor; indices before 0 repeat y_0.
Tensor window_at(const Tensor& states, std::span<const std::size_t> rows, std::size_t t, std::size_t w);
Tensor column(const Tensor& states, std::span<const std::size_t> rows, std::size_t t);

}  // namespace barnn
