#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "barnn/autodiff.hpp"
#include "barnn/datagen.hpp"
#include "barnn/params.hpp"
#include "barnn/rng.hpp"
#include "barnn/variational.hpp"

namespace barnn {

struct LstmConfig {
  std::size_t vocab = ring::kVocab;
  std::size_t hidden = 128;
  std::size_t encoder_hidden = 64;
  bool bayesian = true;  // false: deterministic LSTM, no encoder
};

/// Single-layer LSTM over one-hot tokens.
///
/// In the Bayesian form the input-to-hidden and hidden-to-hidden weight
/// groups are variational. One encoder is applied twice per step: to the
/// current token (one-hot, zero-padded to the hidden width) giving the rate
/// of the input group, and to the previous hidden state giving the rate of
/// the recurrent group. The output projection starts at zero.
class LstmModel {
 public:
  static constexpr std::size_t kWeightGroups = 2;

  struct State {
    ad::Var h;  // [B, H]
    ad::Var c;  // [B, H]
  };

  struct Step {
    ad::Var logits;  // [B, V], predicts the next token
    State next;
    ad::Var alpha_input;   // [B]; unset for the deterministic model or alpha-1 mode
    ad::Var alpha_hidden;  // [B]
  };

  struct SequenceLoss {
    ad::Var cross_entropy;  // mean over non-padding targets
    ad::Var kl;             // step-averaged batch-mean KL; unset when not Bayesian
  };

  explicit LstmModel(LstmConfig config, std::uint64_t init_seed = 0);

  const LstmConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  std::array<double, kWeightGroups> group_dims() const;

  State initial_state(ad::Tape& tape, std::size_t batch) const;
  Step step(std::span<const ad::Var> bound, std::span<const std::size_t> tokens, const State& state, SampleMode mode,
            Rng* noise) const;

  /// Teacher-forced loss over sequences of letters/digits; each is framed as
  /// <bos> tokens <eos> and shorter ones are padded with masked <eos>.
  SequenceLoss sequence_loss(std::span<const ad::Var> bound, std::span<const std::vector<std::size_t>> sequences,
                             SampleMode mode, Rng* noise, bool stop_prior_gradient = false) const;

  /// Ancestral sampling of n strings, each stopped at <eos> (not included)
  /// or after max_len tokens.
  std::vector<std::vector<std::size_t>> sample(std::size_t n, std::size_t max_len, SampleMode mode, Rng& rng) const;

 private:
  Tensor one_hot(std::span<const std::size_t> tokens, std::size_t width) const;

  LstmConfig config_;
  ParameterSet params_;
  PosteriorEncoder encoder_;
  std::size_t ih_w_ = 0, hh_w_ = 0, gate_b_ = 0, out_w_ = 0, out_b_ = 0;
};

}  // namespace barnn
