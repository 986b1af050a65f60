#include "barnn/training.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "barnn/errors.hpp"

namespace barnn {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

namespace {

void check_finite(const LossParts& parts, const char* what) {
  if (!std::isfinite(parts.fit) || !std::isfinite(parts.kl) || !std::isfinite(parts.total)) {
    throw NumericError(std::string(what) + ": loss diverged (fit=" + std::to_string(parts.fit) +
                       ", kl=" + std::to_string(parts.kl) + ")");
  }
}

}  // namespace

ForecasterTrainer::ForecasterTrainer(Forecaster& model, Tensor train_states, ForecasterTrainOptions options)
    : model_(model),
      states_(std::move(train_states)),
      options_(options),
      adam_(model.parameters(), AdamConfig{options.lr, 0.9, 0.999, 1e-8, options.weight_decay}),
      schedule_rng_(derive_seed(options.seed, 10)),
      noise_rng_(derive_seed(options.seed, 11)) {
  if (model.config().variant == Variant::Static) {
    throw std::invalid_argument("static baseline has no parameters; evaluate it directly");
  }
  if (states_.rank() != 2 || states_.dim(0) == 0) throw std::invalid_argument("forecaster trainer: empty training set");
  if (states_.dim(1) < model.config().horizon + 1) {
    throw ShapeError("forecaster trainer: trajectories shorter than the horizon");
  }
  if (options_.batch == 0) throw std::invalid_argument("forecaster trainer: batch size must be positive");
}

std::size_t ForecasterTrainer::sample_timestep() {
  return 1 + schedule_rng_.below(model_.config().horizon);
}

LossParts ForecasterTrainer::step(std::span<const std::size_t> rows) {
  return step_at(rows, sample_timestep());
}

ForecasterObjective forecaster_objective(const Forecaster& model, std::span<const ad::Var> bound,
                                         const Forecaster::Input& input, const Tensor& target,
                                         const ForecasterTrainOptions& options, std::size_t n_train, Rng* noise) {
  ad::Tape& tape = *bound[0].tape();
  const auto out = model.forward(bound, input, {options.mode, noise, nullptr});
  ForecasterObjective obj;
  obj.fit = ad::mean(ad::square(out.prediction - tape.constant(target)));
  obj.total = obj.fit;

  const PriorKind prior = prior_of(model.config().variant);
  if (out.alpha.valid() && prior != PriorKind::None) {
    const auto dims = model.layer_dims();
    obj.kl = prior == PriorKind::TVamp ? kl_tvamp_batch(out.alpha, dims, options.stop_prior_gradient)
                                       : kl_loguniform_batch(ad::square(out.alpha), dims);
    if (options.kl_weight != 0.0) {
      obj.total = obj.fit + ad::scale(obj.kl, options.kl_weight / static_cast<double>(n_train));
    }
  }
  return obj;
}

LossParts ForecasterTrainer::step_at(std::span<const std::size_t> rows, std::size_t t) {
  if (rows.empty()) throw std::invalid_argument("forecaster trainer: empty batch");
  ad::Tape tape;
  const auto bound = model_.parameters().bind(tape);
  Forecaster::Input input{window_at(states_, rows, t, model_.config().window), column(states_, rows, 0), t};
  const auto obj =
      forecaster_objective(model_, bound, input, column(states_, rows, t), options_, states_.dim(0), &noise_rng_);

  LossParts parts;
  parts.fit = obj.fit.value().item();
  if (obj.kl.valid()) parts.kl = obj.kl.value().item();
  parts.total = obj.total.value().item();
  check_finite(parts, "forecaster training");

  auto grads = tape.grad(obj.total, bound);
  adam_.step(model_.parameters(), grads);
  return parts;
}

LossParts ForecasterTrainer::epoch() {
  const auto order = shuffled_indices(states_.dim(0), schedule_rng_);
  LossParts mean;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += options_.batch) {
    const std::size_t end = std::min(order.size(), start + options_.batch);
    const LossParts p = step(std::span(order).subspan(start, end - start));
    mean.fit += p.fit;
    mean.kl += p.kl;
    mean.total += p.total;
    ++batches;
  }
  mean.fit /= static_cast<double>(batches);
  mean.kl /= static_cast<double>(batches);
  mean.total /= static_cast<double>(batches);
  return mean;
}

LstmTrainer::LstmTrainer(LstmModel& model, std::vector<std::vector<std::size_t>> corpus, LstmTrainOptions options)
    : model_(model),
      corpus_(std::move(corpus)),
      options_(options),
      adam_(model.parameters(), AdamConfig{options.lr, 0.9, 0.999, 1e-8, options.weight_decay}),
      schedule_rng_(derive_seed(options.seed, 20)),
      noise_rng_(derive_seed(options.seed, 21)) {
  if (corpus_.empty()) throw std::invalid_argument("lstm trainer: empty corpus");
  if (options_.batch == 0) throw std::invalid_argument("lstm trainer: batch size must be positive");
}

LossParts LstmTrainer::step(std::span<const std::vector<std::size_t>> sequences) {
  ad::Tape tape;
  const auto bound = model_.parameters().bind(tape);
  const auto loss = model_.sequence_loss(bound, sequences, options_.mode, &noise_rng_, options_.stop_prior_gradient);

  ad::Var total = loss.cross_entropy;
  LossParts parts;
  parts.fit = loss.cross_entropy.value().item();
  if (loss.kl.valid()) {
    parts.kl = loss.kl.value().item();
    if (options_.kl_weight != 0.0) {
      total = total + ad::scale(loss.kl, options_.kl_weight / static_cast<double>(corpus_.size()));
    }
  }
  parts.total = total.value().item();
  check_finite(parts, "lstm training");

  auto grads = tape.grad(total, bound);
  if (options_.clip_norm > 0.0) clip_global_norm(grads, options_.clip_norm);
  adam_.step(model_.parameters(), grads);
  return parts;
}

LossParts LstmTrainer::epoch() {
  const auto order = shuffled_indices(corpus_.size(), schedule_rng_);
  LossParts mean;
  std::size_t batches = 0;
  std::vector<std::vector<std::size_t>> batch;
  for (std::size_t start = 0; start < order.size(); start += options_.batch) {
    const std::size_t end = std::min(order.size(), start + options_.batch);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(corpus_[order[i]]);
    const LossParts p = step(batch);
    mean.fit += p.fit;
    mean.kl += p.kl;
    mean.total += p.total;
    ++batches;
  }
  mean.fit /= static_cast<double>(batches);
  mean.kl /= static_cast<double>(batches);
  mean.total /= static_cast<double>(batches);
  return mean;
}

}  // namespace barnn
