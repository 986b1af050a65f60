#include "barnn/priors.hpp"

#include <cmath>
#include <string>

#include "barnn/errors.hpp"

namespace barnn {

namespace {

constexpr double kK1 = 0.63576;
constexpr double kK2 = 1.87320;
constexpr double kK3 = 1.48695;

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw DomainError(std::string(what) + " must be positive, got " + std::to_string(v));
}

Tensor dims_tensor(std::span<const double> layer_dims, double factor) {
  Tensor out(Shape{layer_dims.size()});
  for (std::size_t l = 0; l < layer_dims.size(); ++l) out[l] = factor * layer_dims[l];
  return out;
}

void check_rates(const Tensor& a, std::span<const double> layer_dims, const char* op) {
  if (a.rank() != 2 || a.dim(1) != layer_dims.size()) {
    throw ShapeError(std::string(op) + ": rates " + to_string(a.shape()) + " do not match " +
                     std::to_string(layer_dims.size()) + " layers");
  }
  for (double v : a.data()) require_positive(v, op);
}

}  // namespace

const char* to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::None: return "none";
    case PriorKind::TVamp: return "tvamp";
    case PriorKind::LogUniform: return "loguniform";
  }
  return "?";
}

PriorStats tvamp_stats(const Tensor& alpha_batch, std::size_t t) {
  if (alpha_batch.rank() != 2) throw ShapeError("tvamp_stats: expected [N, L], got " + to_string(alpha_batch.shape()));
  const std::size_t n = alpha_batch.dim(0), layers = alpha_batch.dim(1);
  if (n == 0) throw std::invalid_argument("tvamp_stats: empty batch");
  PriorStats stats{std::vector<double>(layers, 0.0), std::vector<double>(layers, 0.0), t};
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < layers; ++l) {
      const double a = alpha_batch.at(k, l);
      require_positive(a, "tvamp_stats: alpha");
      stats.beta[l] += a;
      stats.gamma[l] += a * a;
    }
  }
  for (std::size_t l = 0; l < layers; ++l) {
    stats.beta[l] /= static_cast<double>(n);
    stats.gamma[l] = std::sqrt(stats.gamma[l] / static_cast<double>(n));
  }
  return stats;
}

double kl_tvamp(std::span<const double> alpha, const PriorStats& stats, std::span<const double> layer_dims) {
  if (alpha.size() != layer_dims.size() || stats.beta.size() != alpha.size() || stats.gamma.size() != alpha.size()) {
    throw ShapeError("kl_tvamp: layer counts disagree");
  }
  double kl = 0.0;
  for (std::size_t l = 0; l < alpha.size(); ++l) {
    require_positive(alpha[l], "kl_tvamp: alpha");
    require_positive(stats.beta[l], "kl_tvamp: beta");
    require_positive(stats.gamma[l], "kl_tvamp: gamma");
    const double d = (alpha[l] - stats.beta[l]) / stats.gamma[l];
    const double r = alpha[l] / stats.gamma[l];
    kl += 0.5 * layer_dims[l] * (d * d + r * r - 1.0 - 2.0 * std::log(r));
  }
  return kl;
}

double kl_loguniform_per_weight(double alpha_ratio) {
  require_positive(alpha_ratio, "kl_loguniform: variance ratio");
  const double s = 1.0 / (1.0 + std::exp(-(kK2 + kK3 * std::log(alpha_ratio))));
  return -(kK1 * s - 0.5 * std::log1p(1.0 / alpha_ratio) - kK1);
}

double kl_loguniform(std::span<const double> alpha_ratio, std::span<const double> layer_dims) {
  if (alpha_ratio.size() != layer_dims.size()) throw ShapeError("kl_loguniform: layer counts disagree");
  double kl = 0.0;
  for (std::size_t l = 0; l < alpha_ratio.size(); ++l) kl += layer_dims[l] * kl_loguniform_per_weight(alpha_ratio[l]);
  return kl;
}

ad::Var kl_tvamp_batch(ad::Var alpha, std::span<const double> layer_dims, bool stop_gradient) {
  check_rates(alpha.value(), layer_dims, "kl_tvamp");
  ad::Tape& tape = *alpha.tape();
  const double inv_n = 1.0 / static_cast<double>(alpha.value().dim(0));

  ad::Var beta = ad::scale(ad::sum_batch(alpha), inv_n);
  ad::Var gamma = ad::sqrt(ad::scale(ad::sum_batch(ad::square(alpha)), inv_n));
  if (stop_gradient) {
    beta = tape.constant(beta.value());
    gamma = tape.constant(gamma.value());
  }
  ad::Var ratio = alpha / gamma;
  ad::Var shift = (alpha - beta) / gamma;
  ad::Var per_layer = ad::add_scalar(ad::square(shift) + ad::square(ratio), -1.0) - ad::scale(ad::log(ratio), 2.0);
  ad::Var weighted = per_layer * tape.constant(dims_tensor(layer_dims, 0.5));
  return ad::scale(ad::sum(weighted), inv_n);
}

ad::Var kl_loguniform_batch(ad::Var alpha_ratio, std::span<const double> layer_dims) {
  check_rates(alpha_ratio.value(), layer_dims, "kl_loguniform");
  ad::Tape& tape = *alpha_ratio.tape();
  ad::Var log_a = ad::log(alpha_ratio);
  ad::Var s = ad::sigmoid(ad::add_scalar(ad::scale(log_a, kK3), kK2));
  ad::Var log1p_inv = ad::log(ad::add_scalar(ad::exp(ad::scale(log_a, -1.0)), 1.0));
  // -(k1 s - 0.5 log(1 + 1/a) - k1)
  ad::Var per_weight = ad::add_scalar(ad::scale(log1p_inv, 0.5) - ad::scale(s, kK1), kK1);
  ad::Var weighted = per_weight * tape.constant(dims_tensor(layer_dims, 1.0));
  return ad::scale(ad::sum(weighted), 1.0 / static_cast<double>(alpha_ratio.value().dim(0)));
}

}  // namespace barnn
