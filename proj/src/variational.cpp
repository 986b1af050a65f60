#include "barnn/variational.hpp"

#include <cmath>
#include <string>

#include "barnn/errors.hpp"

namespace barnn {

const char* to_string(SampleMode mode) {
  switch (mode) {
    case SampleMode::Stochastic: return "stochastic";
    case SampleMode::Map: return "map";
    case SampleMode::DeterministicAlpha1: return "deterministic-alpha1";
  }
  return "?";
}

ad::Var linear(ad::Var h, ad::Var weight, ad::Var bias) {
  return ad::matmul(h, weight) + bias;
}

namespace {

void check_layer_inputs(const ad::Var& h, const ad::Var& alpha) {
  if (!h.value().all_finite()) throw NumericError("variational layer: non-finite activations");
  const Tensor& a = alpha.value();
  if (a.rank() != 1 || a.dim(0) != h.value().dim(0)) {
    throw ShapeError("variational layer: rates " + to_string(a.shape()) + " do not match activations " +
                     to_string(h.value().shape()));
  }
  for (double v : a.data()) {
    if (!(v > 0.0)) throw DomainError("variational layer: dropout rate must be positive, got " + std::to_string(v));
  }
}

}  // namespace

ad::Var var_linear_forward(ad::Var h, ad::Var weight, ad::Var bias, ad::Var alpha, SampleMode mode,
                           const Tensor& eps, PosteriorForm form) {
  if (mode == SampleMode::DeterministicAlpha1) return linear(h, weight, bias);
  check_layer_inputs(h, alpha);

  ad::Var scaled = ad::scale_rows(h, alpha);
  ad::Var mean = form == PosteriorForm::ScaledMean ? ad::matmul(scaled, weight) : ad::matmul(h, weight);
  if (mode == SampleMode::Map) return mean + bias;

  if (eps.shape() != mean.shape()) {
    throw ShapeError("variational layer: noise " + to_string(eps.shape()) + " for output " + to_string(mean.shape()));
  }
  ad::Var var = ad::matmul(ad::square(scaled), ad::square(weight));
  ad::Var noise = h.tape()->constant(eps);
  return mean + ad::sqrt(var) * noise + bias;
}

ad::Var var_linear_forward(ad::Var h, ad::Var weight, ad::Var bias, ad::Var alpha, SampleMode mode, Rng* noise,
                           PosteriorForm form) {
  if (mode != SampleMode::Stochastic) return var_linear_forward(h, weight, bias, alpha, mode, Tensor(), form);
  if (noise == nullptr) throw std::invalid_argument("variational layer: stochastic mode needs a noise stream");
  const Shape out{h.value().dim(0), weight.value().dim(1)};
  return var_linear_forward(h, weight, bias, alpha, mode, noise->normal_tensor(out), form);
}

Tensor bernoulli_mask(Shape shape, double drop_p, Rng& rng) {
  if (!(drop_p >= 0.0 && drop_p < 1.0)) {
    throw DomainError("dropout probability must lie in [0, 1), got " + std::to_string(drop_p));
  }
  Tensor mask(std::move(shape));
  const double keep_scale = 1.0 / (1.0 - drop_p);
  for (double& m : mask.data()) m = rng.uniform() < drop_p ? 0.0 : keep_scale;
  return mask;
}

ad::Var bernoulli_dropout_forward(ad::Var h, ad::Var weight, ad::Var bias, double drop_p, Rng& rng) {
  Tensor mask = bernoulli_mask(h.value().shape(), drop_p, rng);
  if (drop_p == 0.0) return linear(h, weight, bias);
  return linear(h * h.tape()->constant(std::move(mask)), weight, bias);
}

Tensor time_embedding(double t, std::size_t dim, double period) {
  Tensor out(Shape{dim});
  for (std::size_t i = 0; 2 * i < dim; ++i) {
    const double freq = std::pow(period, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    out[2 * i] = std::sin(t * freq);
    if (2 * i + 1 < dim) out[2 * i + 1] = std::cos(t * freq);
  }
  return out;
}

PosteriorEncoder::PosteriorEncoder(ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                                   std::size_t hidden, std::size_t outputs, Rng& init)
    : input_dim_(input_dim), outputs_(outputs) {
  first_ = params.add(prefix + ".w0", uniform_init(Shape{input_dim, hidden}, input_dim, init));
  params.add(prefix + ".b0", uniform_init(Shape{hidden}, input_dim, init));
  params.add(prefix + ".w1", uniform_init(Shape{hidden, hidden}, hidden, init));
  params.add(prefix + ".b1", uniform_init(Shape{hidden}, hidden, init));
  params.add(prefix + ".w2", Tensor(Shape{hidden, outputs}));
  params.add(prefix + ".b2", Tensor(Shape{outputs}));
}

PosteriorEncoder::Rates PosteriorEncoder::encode(std::span<const ad::Var> bound, ad::Var input) const {
  if (!input.value().all_finite()) throw NumericError("posterior encoder: non-finite input state");
  if (input.value().rank() != 2 || input.value().dim(1) != input_dim_) {
    throw ShapeError("posterior encoder: expected [B, " + std::to_string(input_dim_) + "] input, got " +
                     to_string(input.value().shape()));
  }
  const auto& w = bound;
  ad::Var h = ad::relu(linear(input, w[first_], w[first_ + 1]));
  h = ad::relu(linear(h, w[first_ + 2], w[first_ + 3]));
  ad::Var logits = linear(h, w[first_ + 4], w[first_ + 5]);
  // p / (1 - p) for p = sigmoid(z) is exp(z); the exp form avoids 1 - p
  // rounding to zero for saturated logits.
  return Rates{ad::sigmoid(logits), ad::exp(logits)};
}

}  // namespace barnn
