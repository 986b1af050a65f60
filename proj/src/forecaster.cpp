#include "barnn/forecaster.hpp"

#include <stdexcept>

#include "barnn/errors.hpp"

namespace barnn {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::BarnnTVamp: return "barnn-tvamp";
    case Variant::BarnnLogUniform: return "barnn-loguniform";
    case Variant::McDropout: return "mc-dropout";
    case Variant::PlainMlp: return "plain-mlp";
    case Variant::Static: return "static";
  }
  return "?";
}

Variant parse_variant(const std::string& tag) {
  for (Variant v : {Variant::BarnnTVamp, Variant::BarnnLogUniform, Variant::McDropout, Variant::PlainMlp,
                    Variant::Static}) {
    if (tag == to_string(v)) return v;
  }
  throw FormatError("unknown model variant '" + tag + "'");
}

bool is_barnn(Variant v) { return v == Variant::BarnnTVamp || v == Variant::BarnnLogUniform; }

PriorKind prior_of(Variant v) {
  if (v == Variant::BarnnTVamp) return PriorKind::TVamp;
  if (v == Variant::BarnnLogUniform) return PriorKind::LogUniform;
  return PriorKind::None;
}

Forecaster::Forecaster(ForecasterConfig config, std::uint64_t init_seed) : config_(config) {
  if (config_.window == 0) throw std::invalid_argument("forecaster: window must be at least 1");
  if (config_.hidden == 0) throw std::invalid_argument("forecaster: hidden width must be positive");
  if (config_.variant == Variant::Static) return;

  // Separate init streams so every variant shares the same main-network init.
  Rng net_init(derive_seed(init_seed, 1));
  const std::size_t in = feature_dim(), h = config_.hidden;
  in_w_ = params_.add("in.w", uniform_init(Shape{in, h}, in, net_init));
  params_.add("in.b", uniform_init(Shape{h}, in, net_init));
  for (std::size_t l = 0; l < kVariationalLayers; ++l) {
    const std::string name = "hidden" + std::to_string(l + 1);
    hid_w_[l] = params_.add(name + ".w", uniform_init(Shape{h, h}, h, net_init));
    params_.add(name + ".b", uniform_init(Shape{h}, h, net_init));
  }
  out_w_ = params_.add("out.w", uniform_init(Shape{h, 1}, h, net_init));
  params_.add("out.b", uniform_init(Shape{1}, h, net_init));

  if (is_barnn(config_.variant)) {
    Rng enc_init(derive_seed(init_seed, 2));
    const std::size_t enc_in = config_.encoder_uses_time ? in : config_.window;
    encoder_ = PosteriorEncoder(params_, "encoder", enc_in, config_.encoder_hidden, kVariationalLayers, enc_init);
  }
}

std::array<double, Forecaster::kVariationalLayers> Forecaster::layer_dims() const {
  const double n = static_cast<double>(config_.hidden * config_.hidden);
  return {n, n};
}

Tensor Forecaster::features(const Tensor& window, std::size_t t) const {
  if (window.rank() != 2 || window.dim(1) != config_.window) {
    throw ShapeError("forecaster: expected window [B, " + std::to_string(config_.window) + "], got " +
                     to_string(window.shape()));
  }
  const std::size_t rows = window.dim(0), w = config_.window, f = feature_dim();
  const Tensor emb = time_embedding(static_cast<double>(t), config_.time_features);
  Tensor out(Shape{rows, f});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < w; ++i) out.at(r, i) = window.at(r, i);
    for (std::size_t i = 0; i < config_.time_features; ++i) out.at(r, w + i) = emb[i];
  }
  return out;
}

namespace {

// Weight-space sample held fixed by the caller: row b uses w = a W (1 + e_b)
// (scaled mean) or W (1 + a e_b) (unit mean).
Tensor fixed_noise_layer(const Tensor& h, const Tensor& w, const Tensor& bias, const Tensor& alpha, const Tensor& eps,
                         PosteriorForm form) {
  const std::size_t rows = h.dim(0), in = w.dim(0), out = w.dim(1);
  if (eps.rank() != 2 || eps.dim(0) != rows || eps.dim(1) != in * out) {
    throw ShapeError("fixed weight noise " + to_string(eps.shape()) + " does not match layer");
  }
  Tensor result(Shape{rows, out});
  for (std::size_t b = 0; b < rows; ++b) {
    const double a = alpha[b];
    for (std::size_t i = 0; i < in; ++i) {
      const double hi = h.at(b, i);
      if (hi == 0.0) continue;
      for (std::size_t j = 0; j < out; ++j) {
        const double e = eps.at(b, i * out + j);
        const double wij = form == PosteriorForm::ScaledMean ? a * w.at(i, j) * (1.0 + e) : w.at(i, j) * (1.0 + a * e);
        result.at(b, j) += hi * wij;
      }
    }
    for (std::size_t j = 0; j < out; ++j) result.at(b, j) += bias[j];
  }
  return result;
}

}  // namespace

ad::Var Forecaster::hidden_layer(std::size_t layer, ad::Var h, std::span<const ad::Var> bound, const Output& rates,
                                 const Sampling& sampling) const {
  const ad::Var& w = bound[hid_w_[layer]];
  const ad::Var& b = bound[hid_w_[layer] + 1];
  switch (config_.variant) {
    case Variant::BarnnTVamp:
    case Variant::BarnnLogUniform: {
      if (sampling.mode == SampleMode::DeterministicAlpha1) return linear(h, w, b);
      const PosteriorForm form =
          config_.variant == Variant::BarnnTVamp ? PosteriorForm::ScaledMean : PosteriorForm::UnitMean;
      ad::Var a = ad::reshape(ad::slice_cols(rates.alpha, layer, 1), Shape{h.value().dim(0)});
      if (sampling.fixed_weight_noise && sampling.mode == SampleMode::Stochastic) {
        return h.tape()->constant(fixed_noise_layer(h.value(), w.value(), b.value(), a.value(),
                                                    sampling.fixed_weight_noise->at(layer), form));
      }
      return var_linear_forward(h, w, b, a, sampling.mode, sampling.noise, form);
    }
    case Variant::McDropout:
      if (sampling.mode != SampleMode::Stochastic) return linear(h, w, b);
      if (!sampling.noise) throw std::invalid_argument("mc-dropout: stochastic mode needs a noise stream");
      return bernoulli_dropout_forward(h, w, b, config_.dropout_p, *sampling.noise);
    case Variant::PlainMlp:
    case Variant::Static:
      break;
  }
  return linear(h, w, b);
}

Forecaster::Output Forecaster::forward(std::span<const ad::Var> bound, const Input& input,
                                       const Sampling& sampling) const {
  if (input.t < 1 || input.t > config_.horizon) {
    throw std::out_of_range("forecaster: timestep " + std::to_string(input.t) + " outside [1, " +
                            std::to_string(config_.horizon) + "]");
  }
  if (!input.window.all_finite()) throw NumericError("forecaster: non-finite state in window");
  if (config_.variant == Variant::Static) {
    throw std::logic_error("forecaster: static baseline has no network; use predict()");
  }
  if (bound.size() != params_.size()) throw std::invalid_argument("forecaster: bound parameter count mismatch");
  ad::Tape* tape = bound[0].tape();
  Output out;
  const Tensor x = features(input.window, input.t);
  ad::Var xv = tape->constant(x);

  if (is_barnn(config_.variant) && sampling.mode != SampleMode::DeterministicAlpha1) {
    ad::Var enc_in = config_.encoder_uses_time ? xv : tape->constant(input.window);
    auto rates = encoder_.encode(bound, enc_in);
    out.p = rates.p;
    out.alpha = rates.alpha;
  }

  ad::Var h = ad::relu(linear(xv, bound[in_w_], bound[in_w_ + 1]));
  for (std::size_t l = 0; l < kVariationalLayers; ++l) h = ad::relu(hidden_layer(l, h, bound, out, sampling));
  ad::Var y = linear(h, bound[out_w_], bound[out_w_ + 1]);
  out.prediction = ad::reshape(y, Shape{x.dim(0)});
  return out;
}

Tensor Forecaster::predict(const Input& input, const Sampling& sampling) const {
  if (config_.variant == Variant::Static) {
    if (input.t < 1 || input.t > config_.horizon) throw std::out_of_range("forecaster: timestep out of range");
    return input.initial;
  }
  ad::Tape tape;
  std::vector<ad::Var> bound;
  bound.reserve(params_.size());
  for (const auto& p : params_.items()) bound.push_back(tape.constant(p.value));
  return forward(bound, input, sampling).prediction.value();
}

Tensor window_at(const Tensor& states, std::span<const std::size_t> rows, std::size_t t, std::size_t w) {
  Tensor out(Shape{rows.size(), w});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < w; ++i) {
      const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(w) + static_cast<std::ptrdiff_t>(i);
      out.at(r, i) = states.at(rows[r], idx < 0 ? 0 : static_cast<std::size_t>(idx));
    }
  }
  return out;
}

Tensor column(const Tensor& states, std::span<const std::size_t> rows, std::size_t t) {
  Tensor out(Shape{rows.size()});
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = states.at(rows[r], t);
  return out;
}

}  // namespace barnn
