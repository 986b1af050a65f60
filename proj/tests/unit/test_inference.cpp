#include <doctest.h>

#include <cmath>

#include "barnn/datagen.hpp"
#include "barnn/errors.hpp"
#include "barnn/inference.hpp"

using namespace barnn;

namespace {

ForecasterConfig small(Variant v) {
  ForecasterConfig c;
  c.variant = v;
  c.hidden = 8;
  c.encoder_hidden = 8;
  return c;
}

// A BARNN model with a non-trivial encoder so rates vary with the input.
Forecaster noisy_barnn(std::uint64_t seed) {
  Forecaster m(small(Variant::BarnnTVamp), seed);
  Rng r(seed);
  for (auto& p : m.parameters().items())
    if (p.name == "encoder.w2") for (double& v : p.value.data()) v = r.uniform(-0.5, 0.5);
  return m;
}

}  // namespace

TEST_CASE("ensemble moments") {
  SUBCASE("two members {0, 2}") {
    const Tensor m[] = {Tensor::vector({0.0}), Tensor::vector({2.0})};
    const auto f = ensemble_moments(m);
    CHECK(f.members == 2);
    CHECK(f.mean[0] == 1.0);
    CHECK(f.epistemic[0] == 1.0);
    CHECK(f.aleatoric[0] == 0.0);
  }
  SUBCASE("identical members have no epistemic variance") {
    const Tensor m[] = {Tensor::vector({0.3, -0.7}), Tensor::vector({0.3, -0.7}), Tensor::vector({0.3, -0.7})};
    const auto f = ensemble_moments(m, {}, 0.25);
    CHECK(f.mean == Tensor::vector({0.3, -0.7}));
    for (double v : f.epistemic.data()) CHECK(v == 0.0);
    for (double v : f.aleatoric.data()) CHECK(v == 0.25);
    const Tensor total = f.total_variance();
    for (double v : total.data()) CHECK(v == 0.25);
  }
  SUBCASE("member variances are averaged") {
    const Tensor m[] = {Tensor::vector({1.0}), Tensor::vector({1.0})};
    const Tensor v[] = {Tensor::vector({0.1}), Tensor::vector({0.3})};
    CHECK(ensemble_moments(m, v).aleatoric[0] == doctest::Approx(0.2));
  }
  SUBCASE("epistemic variance is shift invariant") {
    Rng rng(1);
    std::vector<Tensor> a, b;
    for (int i = 0; i < 7; ++i) {
      const double x = rng.normal();
      a.push_back(Tensor::vector({x}));
      b.push_back(Tensor::vector({x + 0.5}));
    }
    CHECK(ensemble_moments(a).epistemic[0] == doctest::Approx(ensemble_moments(b).epistemic[0]).epsilon(1e-12));
  }
  SUBCASE("errors") {
    CHECK_THROWS(ensemble_moments(std::span<const Tensor>{}));
    const Tensor m[] = {Tensor::vector({1.0}), Tensor::vector({1.0, 2.0})};
    CHECK_THROWS_AS(ensemble_moments(m), ShapeError);
  }
}

TEST_CASE("rollouts") {
  const Tensor states = stack_states(gen_sinusoid(5, 3));
  const Tensor initial = Tensor::vector({states.at(0, 0), states.at(1, 0), states.at(2, 0)});
  const Forecaster m = noisy_barnn(2);

  SUBCASE("MAP rollout ignores the seed") {
    Rng a(1), b(2);
    CHECK(rollout(m, initial, 20, SampleMode::Map, a) == rollout(m, initial, 20, SampleMode::Map, b));
  }
  SUBCASE("stochastic rollouts with different seeds diverge") {
    Rng a(1), b(2);
    const Tensor x = rollout(m, initial, 10, SampleMode::Stochastic, a);
    const Tensor y = rollout(m, initial, 10, SampleMode::Stochastic, b);
    double dist = 0.0;
    for (std::size_t r = 0; r < 3; ++r) dist += std::abs(x.at(r, 10) - y.at(r, 10));
    CHECK(dist > 0.0);
    for (std::size_t r = 0; r < 3; ++r) CHECK(x.at(r, 0) == initial[r]);
  }
  SUBCASE("per-trajectory weights are reproducible") {
    Rng a(3), b(3);
    CHECK(rollout(m, initial, 10, SampleMode::Stochastic, a, WeightResampling::PerTrajectory) ==
          rollout(m, initial, 10, SampleMode::Stochastic, b, WeightResampling::PerTrajectory));
  }
  SUBCASE("static rollout is constant") {
    ForecasterConfig c;
    c.variant = Variant::Static;
    Forecaster s(c);
    Rng rng(0);
    const Tensor traj = rollout(s, initial, 100, SampleMode::Stochastic, rng);
    CHECK(traj.dim(1) == 101);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t t = 0; t <= 100; ++t) CHECK(traj.at(r, t) == initial[r]);
  }
  SUBCASE("divergence reports the step") {
    Forecaster big = noisy_barnn(2);
    for (auto& p : big.parameters().items())
      if (p.name == "out.b") p.value[0] = 1e308;
    for (auto& p : big.parameters().items())
      if (p.name == "out.w") for (double& v : p.value.data()) v = 1e308;
    Rng rng(0);
    CHECK_THROWS_WITH_AS(rollout(big, initial, 5, SampleMode::Map, rng), doctest::Contains("step"), NumericError);
  }
  SUBCASE("one-step predictions condition on the true states") {
    Rng rng(0);
    const Tensor p = one_step_predictions(m, states, 100, SampleMode::Map, rng);
    CHECK(p.dim(0) == 5);
    CHECK(p.dim(1) == 100);
    const std::size_t rows[] = {0, 1, 2, 3, 4};
    const Tensor want = m.predict({window_at(states, rows, 37, 1), column(states, rows, 0), 37}, {SampleMode::Map});
    for (std::size_t r = 0; r < 5; ++r) CHECK(p.at(r, 36) == want[r]);
  }
}

TEST_CASE("ensemble forecast is reproducible and thread-count independent") {
  const Tensor states = stack_states(gen_sinusoid(4, 8));
  const Forecaster m = noisy_barnn(5);
  for (Protocol protocol : {Protocol::ClosedLoop, Protocol::TeacherForced}) {
    EnsembleOptions o;
    o.members = 6;
    o.seed = 11;
    o.protocol = protocol;
    o.steps = 20;
    const auto serial = ensemble_forecast(m, states, o);
    o.threads = 3;
    const auto threaded = ensemble_forecast(m, states, o);
    CHECK(serial.mean == threaded.mean);
    CHECK(serial.epistemic == threaded.epistemic);
    CHECK(serial.mean.dim(1) == 20);
    const Tensor total = serial.total_variance();
    for (double v : total.data()) CHECK(v >= 0.0);

    // Member i is reproducible from Rng(seed + i).
    const auto members = ensemble_members(m, states, o);
    Rng rng(11 + 4);
    const Tensor m4 = protocol == Protocol::ClosedLoop
                          ? rollout(m, column(states, std::vector<std::size_t>{0, 1, 2, 3}, 0), 20,
                                    SampleMode::Stochastic, rng)
                          : one_step_predictions(m, states, 20, SampleMode::Stochastic, rng);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t t = 0; t < 20; ++t)
        CHECK(members[4].at(r, t) == m4.at(r, t + (protocol == Protocol::ClosedLoop ? 1 : 0)));
  }
}

TEST_CASE("predictive samples") {
  const Forecaster m = noisy_barnn(6);
  const Tensor states = stack_states(gen_sinusoid(1, 9));
  const std::size_t rows[] = {0};
  const Forecaster::Input in{window_at(states, rows, 20, 1), column(states, rows, 0), 20};

  Rng a(1), b(2);
  CHECK(predictive_sample(m, in, a, 0.0, SampleMode::Map) == predictive_sample(m, in, b, 0.0, SampleMode::Map));

  const std::size_t n = 1000;
  std::vector<double> draws;
  Rng rng(3);
  for (std::size_t i = 0; i < n; ++i) draws.push_back(predictive_sample(m, in, rng, 0.01)[0]);
  double mean = 0.0;
  for (double d : draws) mean += d;
  mean /= n;
  double var = 0.0, lag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    var += (draws[i] - mean) * (draws[i] - mean);
    if (i > 0) lag += (draws[i] - mean) * (draws[i - 1] - mean);
  }
  CHECK(std::abs(lag / var) < 3.0 / std::sqrt(static_cast<double>(n)));

  EnsembleOptions o;
  o.members = 1000;
  o.seed = 50;
  o.protocol = Protocol::TeacherForced;
  o.steps = 20;
  const auto f = ensemble_forecast(m, states, o);
  const double se = std::sqrt(var / (n - 1) / n + f.epistemic.at(0, 19) / 1000.0);
  CHECK(std::abs(mean - f.mean.at(0, 19)) < 3.0 * se);
  // Variance decomposition: epistemic + aleatoric matches the variance of full draws.
  const double total = f.epistemic.at(0, 19) + 0.01;
  CHECK(std::abs(var / (n - 1) - total) < 4.0 * total * std::sqrt(2.0 / n));
}
