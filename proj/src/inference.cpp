#include "barnn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "barnn/errors.hpp"

namespace barnn {

const char* to_string(Protocol p) {
  return p == Protocol::ClosedLoop ? "closed-loop" : "teacher-forced";
}

Tensor EnsembleForecast::total_variance() const {
  Tensor out = epistemic;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += aleatoric[i];
  return out;
}

EnsembleForecast ensemble_moments(std::span<const Tensor> member_means, std::span<const Tensor> member_vars,
                                  double sigma2_fixed) {
  if (member_means.empty()) throw std::invalid_argument("ensemble_moments: no members");
  if (!member_vars.empty() && member_vars.size() != member_means.size()) {
    throw ShapeError("ensemble_moments: variance count differs from member count");
  }
  if (sigma2_fixed < 0.0) throw DomainError("ensemble_moments: negative observation variance");
  const Shape& shape = member_means.front().shape();
  const double d = static_cast<double>(member_means.size());

  EnsembleForecast out{member_means.size(), Tensor(shape), Tensor(shape), Tensor(shape, 0.0)};
  // Welford updates: identical members give an exact mean and exactly zero
  // spread, and (1/D) M2 equals (1/D) sum mu_i^2 - mu^2.
  Tensor m2(shape);
  for (std::size_t m = 0; m < member_means.size(); ++m) {
    const Tensor& mu = member_means[m];
    if (mu.shape() != shape) throw ShapeError("ensemble_moments: members differ in shape");
    const double k = static_cast<double>(m + 1);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double delta = mu[i] - out.mean[i];
      out.mean[i] += delta / k;
      m2[i] += delta * (mu[i] - out.mean[i]);
    }
    if (!member_vars.empty()) {
      if (member_vars[m].shape() != shape) throw ShapeError("ensemble_moments: variance shape mismatch");
      for (std::size_t i = 0; i < mu.size(); ++i) out.aleatoric[i] += member_vars[m][i];
    }
  }
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    out.epistemic[i] = std::max(0.0, m2[i] / d);
    out.aleatoric[i] = member_vars.empty() ? sigma2_fixed : out.aleatoric[i] / d;
  }
  return out;
}

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

std::vector<Tensor> draw_weight_noise(const Forecaster& model, std::size_t rows, Rng& rng) {
  const std::size_t h = model.config().hidden;
  std::vector<Tensor> eps;
  for (std::size_t l = 0; l < Forecaster::kVariationalLayers; ++l) eps.push_back(rng.normal_tensor(Shape{rows, h * h}));
  return eps;
}

}  // namespace

Tensor rollout(const Forecaster& model, const Tensor& initial, std::size_t steps, SampleMode mode, Rng& rng,
               WeightResampling resampling) {
  if (steps == 0) throw std::invalid_argument("rollout: need at least one step");
  if (initial.rank() != 1) throw ShapeError("rollout: initial states must be [B], got " + to_string(initial.shape()));
  const std::size_t batch = initial.dim(0);
  Tensor traj(Shape{batch, steps + 1});
  for (std::size_t b = 0; b < batch; ++b) traj.at(b, 0) = initial[b];
  const auto rows = all_rows(batch);

  std::vector<Tensor> fixed;
  Forecaster::Sampling sampling{mode, &rng, nullptr};
  if (resampling == WeightResampling::PerTrajectory && mode == SampleMode::Stochastic && is_barnn(model.config().variant)) {
    fixed = draw_weight_noise(model, batch, rng);
    sampling.fixed_weight_noise = &fixed;
  }
  for (std::size_t t = 1; t <= steps; ++t) {
    const Forecaster::Input input{window_at(traj, rows, t, model.config().window), initial, t};
    const Tensor next = model.predict(input, sampling);
    if (!next.all_finite()) throw NumericError("rollout diverged at step " + std::to_string(t));
    for (std::size_t b = 0; b < batch; ++b) traj.at(b, t) = next[b];
  }
  return traj;
}

Tensor one_step_predictions(const Forecaster& model, const Tensor& states, std::size_t steps, SampleMode mode,
                            Rng& rng) {
  if (states.rank() != 2 || states.dim(1) < steps + 1) {
    throw ShapeError("one_step_predictions: need [B, " + std::to_string(steps + 1) + "] states, got " +
                     to_string(states.shape()));
  }
  const std::size_t batch = states.dim(0);
  const auto rows = all_rows(batch);
  const Tensor initial = column(states, rows, 0);
  Tensor out(Shape{batch, steps});
  for (std::size_t t = 1; t <= steps; ++t) {
    const Forecaster::Input input{window_at(states, rows, t, model.config().window), initial, t};
    const Tensor pred = model.predict(input, {mode, &rng, nullptr});
    if (!pred.all_finite()) throw NumericError("one-step prediction non-finite at step " + std::to_string(t));
    for (std::size_t b = 0; b < batch; ++b) out.at(b, t - 1) = pred[b];
  }
  return out;
}

std::vector<Tensor> ensemble_members(const Forecaster& model, const Tensor& states, const EnsembleOptions& options) {
  if (options.members == 0) throw std::invalid_argument("ensemble: need at least one member");
  if (states.rank() != 2 || states.dim(0) == 0) throw ShapeError("ensemble: states must be a non-empty [B, T + 1]");
  std::vector<Tensor> members(options.members);

  auto run_member = [&](std::size_t i) {
    Rng rng(options.seed + i);
    if (options.protocol == Protocol::TeacherForced) {
      members[i] = one_step_predictions(model, states, options.steps, options.mode, rng);
      return;
    }
    const Tensor initial = column(states, all_rows(states.dim(0)), 0);
    const Tensor traj = rollout(model, initial, options.steps, options.mode, rng, options.resampling);
    Tensor pred(Shape{states.dim(0), options.steps});
    for (std::size_t b = 0; b < states.dim(0); ++b) {
      for (std::size_t t = 1; t <= options.steps; ++t) pred.at(b, t - 1) = traj.at(b, t);
    }
    members[i] = std::move(pred);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, options.members));
  if (workers == 1) {
    for (std::size_t i = 0; i < options.members; ++i) run_member(i);
    return members;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < options.members; i += workers) run_member(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return members;
}

EnsembleForecast ensemble_forecast(const Forecaster& model, const Tensor& states, const EnsembleOptions& options) {
  const auto members = ensemble_members(model, states, options);
  return ensemble_moments(members, {}, options.sigma2_fixed);
}

Tensor predictive_sample(const Forecaster& model, const Forecaster::Input& input, Rng& rng, double sigma2_fixed,
                         SampleMode mode) {
  if (sigma2_fixed < 0.0) throw DomainError("predictive_sample: negative observation variance");
  Tensor y = model.predict(input, {mode, &rng, nullptr});
  if (sigma2_fixed > 0.0) {
    const double sd = std::sqrt(sigma2_fixed);
    for (double& v : y.data()) v += sd * rng.normal();
  }
  return y;
}

}  // namespace barnn
