#include "barnn/lstm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "barnn/errors.hpp"
#include "barnn/priors.hpp"

namespace barnn {

LstmModel::LstmModel(LstmConfig config, std::uint64_t init_seed) : config_(config) {
  const std::size_t v = config_.vocab, h = config_.hidden;
  if (v == 0 || h == 0) throw std::invalid_argument("lstm: vocabulary and hidden size must be positive");
  if (config_.bayesian && v > h) throw std::invalid_argument("lstm: encoder needs vocab <= hidden");

  Rng net_init(derive_seed(init_seed, 1));
  ih_w_ = params_.add("lstm.ih.w", uniform_init(Shape{v, 4 * h}, h, net_init));
  hh_w_ = params_.add("lstm.hh.w", uniform_init(Shape{h, 4 * h}, h, net_init));
  Tensor bias = uniform_init(Shape{4 * h}, h, net_init);
  for (std::size_t j = h; j < 2 * h; ++j) bias[j] = 1.0;  // forget gate
  gate_b_ = params_.add("lstm.b", std::move(bias));
  out_w_ = params_.add("out.w", Tensor(Shape{h, v}));
  out_b_ = params_.add("out.b", Tensor(Shape{v}));

  if (config_.bayesian) {
    Rng enc_init(derive_seed(init_seed, 2));
    encoder_ = PosteriorEncoder(params_, "encoder", h, config_.encoder_hidden, 1, enc_init);
  }
}

std::array<double, LstmModel::kWeightGroups> LstmModel::group_dims() const {
  const double h = static_cast<double>(config_.hidden);
  return {static_cast<double>(config_.vocab) * 4.0 * h, h * 4.0 * h};
}

Tensor LstmModel::one_hot(std::span<const std::size_t> tokens, std::size_t width) const {
  Tensor x(Shape{tokens.size(), width});
  for (std::size_t b = 0; b < tokens.size(); ++b) {
    if (tokens[b] >= config_.vocab) throw std::out_of_range("lstm: unknown token id " + std::to_string(tokens[b]));
    x.at(b, tokens[b]) = 1.0;
  }
  return x;
}

LstmModel::State LstmModel::initial_state(ad::Tape& tape, std::size_t batch) const {
  return State{tape.constant(Tensor(Shape{batch, config_.hidden})), tape.constant(Tensor(Shape{batch, config_.hidden}))};
}

LstmModel::Step LstmModel::step(std::span<const ad::Var> bound, std::span<const std::size_t> tokens,
                                const State& state, SampleMode mode, Rng* noise) const {
  if (bound.size() != params_.size()) throw std::invalid_argument("lstm: bound parameter count mismatch");
  ad::Tape& tape = *bound[0].tape();
  const std::size_t batch = tokens.size(), h = config_.hidden;
  ad::Var x = tape.constant(one_hot(tokens, config_.vocab));

  Step out;
  ad::Var gates;
  if (!config_.bayesian || mode == SampleMode::DeterministicAlpha1) {
    gates = ad::matmul(x, bound[ih_w_]) + ad::matmul(state.h, bound[hh_w_]) + bound[gate_b_];
  } else {
    ad::Var token_in = tape.constant(one_hot(tokens, h));
    const Shape rows{batch};
    out.alpha_input = ad::reshape(encoder_.encode(bound, token_in).alpha, rows);
    out.alpha_hidden = ad::reshape(encoder_.encode(bound, state.h).alpha, rows);
    ad::Var zero_bias = tape.constant(Tensor(Shape{4 * h}));
    gates = var_linear_forward(x, bound[ih_w_], zero_bias, out.alpha_input, mode, noise) +
            var_linear_forward(state.h, bound[hh_w_], bound[gate_b_], out.alpha_hidden, mode, noise);
  }
  ad::Var i = ad::sigmoid(ad::slice_cols(gates, 0, h));
  ad::Var f = ad::sigmoid(ad::slice_cols(gates, h, h));
  ad::Var g = ad::tanh(ad::slice_cols(gates, 2 * h, h));
  ad::Var o = ad::sigmoid(ad::slice_cols(gates, 3 * h, h));
  ad::Var c = f * state.c + i * g;
  ad::Var hn = o * ad::tanh(c);
  out.next = State{hn, c};
  out.logits = ad::matmul(hn, bound[out_w_]) + bound[out_b_];
  return out;
}

LstmModel::SequenceLoss LstmModel::sequence_loss(std::span<const ad::Var> bound,
                                                 std::span<const std::vector<std::size_t>> sequences,
                                                 SampleMode mode, Rng* noise, bool stop_prior_gradient) const {
  if (sequences.empty()) throw std::invalid_argument("lstm: empty batch");
  ad::Tape& tape = *bound[0].tape();
  const std::size_t batch = sequences.size();
  std::size_t longest = 0;
  for (const auto& s : sequences) {
    for (std::size_t tok : s) {
      if (tok >= config_.vocab || tok == ring::kBos) throw std::out_of_range("lstm: unknown token id " + std::to_string(tok));
    }
    longest = std::max(longest, s.size());
  }
  const std::size_t steps = longest + 1;
  const auto dims = group_dims();

  State state = initial_state(tape, batch);
  std::vector<std::size_t> inputs(batch), targets(batch);
  Tensor mask(Shape{batch});
  ad::Var nll_sum, kl_sum;
  double target_count = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& seq = sequences[b];
      inputs[b] = s == 0 ? ring::kBos : (s - 1 < seq.size() ? seq[s - 1] : ring::kEos);
      targets[b] = s < seq.size() ? seq[s] : ring::kEos;
      mask[b] = s <= seq.size() ? 1.0 : 0.0;
      target_count += mask[b];
    }
    Step st = step(bound, inputs, state, mode, noise);
    state = st.next;
    ad::Var picked = ad::pick(ad::log_softmax(st.logits), targets);
    ad::Var step_nll = ad::sum(picked * tape.constant(mask));
    nll_sum = nll_sum.valid() ? nll_sum + step_nll : step_nll;
    if (st.alpha_input.valid()) {
      const Shape col{batch, 1};
      ad::Var kl = kl_tvamp_batch(ad::reshape(st.alpha_input, col), std::span(dims).subspan(0, 1), stop_prior_gradient) +
                   kl_tvamp_batch(ad::reshape(st.alpha_hidden, col), std::span(dims).subspan(1, 1), stop_prior_gradient);
      kl_sum = kl_sum.valid() ? kl_sum + kl : kl;
    }
  }
  SequenceLoss loss;
  loss.cross_entropy = ad::scale(nll_sum, -1.0 / target_count);
  if (kl_sum.valid()) loss.kl = ad::scale(kl_sum, 1.0 / static_cast<double>(steps));
  return loss;
}

std::vector<std::vector<std::size_t>> LstmModel::sample(std::size_t n, std::size_t max_len, SampleMode mode,
                                                        Rng& rng) const {
  std::vector<std::vector<std::size_t>> out(n);
  if (n == 0) return out;
  const std::size_t v = config_.vocab;
  Tensor h(Shape{n, config_.hidden}), c(Shape{n, config_.hidden});
  std::vector<std::size_t> tokens(n, ring::kBos);
  std::vector<bool> done(n, false);
  std::vector<double> weights(v);
  for (std::size_t s = 0; s < max_len; ++s) {
    // A fresh tape per step keeps memory flat over long generations.
    ad::Tape tape;
    std::vector<ad::Var> bound;
    bound.reserve(params_.size());
    for (const auto& p : params_.items()) bound.push_back(tape.constant(p.value));
    Step st = step(bound, tokens, State{tape.constant(h), tape.constant(c)}, mode, &rng);
    h = st.next.h.value();
    c = st.next.c.value();
    const Tensor& logits = st.logits.value();

    bool any_open = false;
    for (std::size_t b = 0; b < n; ++b) {
      double mx = logits.at(b, 0);
      for (std::size_t k = 1; k < v; ++k) mx = std::max(mx, logits.at(b, k));
      double z = 0.0;
      for (std::size_t k = 0; k < v; ++k) z += weights[k] = std::exp(logits.at(b, k) - mx);
      const double u = rng.uniform() * z;
      double acc = 0.0;
      std::size_t pick = v - 1;
      for (std::size_t k = 0; k < v; ++k) {
        acc += weights[k];
        if (u < acc) {
          pick = k;
          break;
        }
      }
      // <bos> is never a valid continuation; read it as end of string.
      if (pick == ring::kBos) pick = ring::kEos;
      tokens[b] = pick;
      if (done[b]) continue;
      if (pick == ring::kEos) done[b] = true;
      else out[b].push_back(pick);
      any_open = any_open || !done[b];
    }
    if (!any_open) break;
  }
  return out;
}

}  // namespace barnn
