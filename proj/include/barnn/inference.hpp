#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "barnn/forecaster.hpp"

namespace barnn {

/// Monte-Carlo predictive moments over D ensemble members at each of
/// [B, T] points: mean of member means, epistemic variance
/// (1/D) sum mu_i^2 - mu^2, and aleatoric variance (1/D) sum sigma_i^2.
struct EnsembleForecast {
  std::size_t members = 0;
  Tensor mean;        // [B, T]
  Tensor epistemic;   // [B, T]
  Tensor aleatoric;   // [B, T]

  Tensor total_variance() const;
};

/// Member means share one shape; member variances are either empty (all
/// members use sigma2_fixed) or one tensor per member.
EnsembleForecast ensemble_moments(std::span<const Tensor> member_means, std::span<const Tensor> member_vars = {},
                                  double sigma2_fixed = 0.0);

enum class WeightResampling { PerStep, PerTrajectory };

/// How an evaluation forms the model input at step t.
enum class Protocol {
  ClosedLoop,     // feed back the model's own predictions from y_0
  TeacherForced,  // condition on the true previous states (one-step ahead)
};

const char* to_string(Protocol p);

/// Autoregressive rollout from initial states [B]; returns [B, steps + 1]
/// with column 0 equal to the initial states. Throws NumericError naming
/// the step at which a state became non-finite.
Tensor rollout(const Forecaster& model, const Tensor& initial, std::size_t steps, SampleMode mode, Rng& rng,
               WeightResampling resampling = WeightResampling::PerStep);

/// One-step-ahead predictions from true states [B, T + 1]; returns [B, T]
/// where column t - 1 predicts y_t from y_{t-w..t-1}.
Tensor one_step_predictions(const Forecaster& model, const Tensor& states, std::size_t steps, SampleMode mode,
                            Rng& rng);

struct EnsembleOptions {
  std::size_t members = 100;
  std::uint64_t seed = 0;       // member i draws from Rng(seed + i)
  Protocol protocol = Protocol::ClosedLoop;
  SampleMode mode = SampleMode::Stochastic;
  WeightResampling resampling = WeightResampling::PerStep;
  double sigma2_fixed = 0.0;
  std::size_t steps = 100;
  std::size_t threads = 1;
};

/// Runs every member over all rows of `states` ([B, T + 1]; closed loop
/// only reads column 0) and reduces the members in index order.
EnsembleForecast ensemble_forecast(const Forecaster& model, const Tensor& states, const EnsembleOptions& options);

/// Member trajectories [D][B, steps] without reduction.
std::vector<Tensor> ensemble_members(const Forecaster& model, const Tensor& states, const EnsembleOptions& options);

/// A single draw from the one-step predictive distribution: sample weights,
/// take the network mean, and add N(0, sigma2_fixed) observation noise.
Tensor predictive_sample(const Forecaster& model, const Forecaster::Input& input, Rng& rng, double sigma2_fixed = 0.0,
                         SampleMode mode = SampleMode::Stochastic);

}  // namespace barnn
