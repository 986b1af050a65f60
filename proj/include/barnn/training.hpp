#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "barnn/adam.hpp"
#include "barnn/forecaster.hpp"
#include "barnn/lstm.hpp"

namespace barnn {

struct LossParts {
  double fit = 0.0;    // MSE or cross-entropy
  double kl = 0.0;     // batch-mean KL, before weighting
  double total = 0.0;  // fit + kl_weight * kl / n_train
};

struct ForecasterTrainOptions {
  std::size_t epochs = 1500;
  std::size_t batch = 128;
  double lr = 1e-4;
  double weight_decay = 1e-8;
  double kl_weight = 1.0;
  bool stop_prior_gradient = false;
  SampleMode mode = SampleMode::Stochastic;
  std::uint64_t seed = 0;
};

struct ForecasterObjective {
  ad::Var fit;    // MSE of the one-step prediction
  ad::Var kl;     // batch-mean KL; unset without a prior
  ad::Var total;  // fit + kl_weight * kl / n_train
};

/// Builds the minibatch loss at step t on the tape of `bound`.
ForecasterObjective forecaster_objective(const Forecaster& model, std::span<const ad::Var> bound,
                                         const Forecaster::Input& input, const Tensor& target,
                                         const ForecasterTrainOptions& options, std::size_t n_train, Rng* noise);

/// Temporal-ELBO training for the forecaster: each minibatch shares one
/// timestep t ~ U[1, T]; the loss is the one-step MSE at t plus the
/// weighted KL of the rates at t against the chosen prior.
class ForecasterTrainer {
 public:
  ForecasterTrainer(Forecaster& model, Tensor train_states, ForecasterTrainOptions options);

  std::size_t sample_timestep();
  LossParts step(std::span<const std::size_t> rows);
  LossParts step_at(std::span<const std::size_t> rows, std::size_t t);
  /// One shuffled pass over the training set; returns batch-averaged losses.
  LossParts epoch();

  const Adam& optimizer() const { return adam_; }

 private:
  Forecaster& model_;
  Tensor states_;
  ForecasterTrainOptions options_;
  Adam adam_;
  Rng schedule_rng_;
  Rng noise_rng_;
};

struct LstmTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch = 64;
  double lr = 2e-4;
  double weight_decay = 0.0;
  double kl_weight = 1.0;
  double clip_norm = 5.0;
  bool stop_prior_gradient = false;
  SampleMode mode = SampleMode::Stochastic;
  std::uint64_t seed = 0;
};

/// Teacher-forced training of the token model: mean cross-entropy over
/// non-padding targets plus the step-averaged tVAMP KL of both weight groups.
class LstmTrainer {
 public:
  LstmTrainer(LstmModel& model, std::vector<std::vector<std::size_t>> corpus, LstmTrainOptions options);

  LossParts step(std::span<const std::vector<std::size_t>> sequences);
  LossParts epoch();

 private:
  LstmModel& model_;
  std::vector<std::vector<std::size_t>> corpus_;
  LstmTrainOptions options_;
  Adam adam_;
  Rng schedule_rng_;
  Rng noise_rng_;
};

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace barnn
