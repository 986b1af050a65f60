#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "barnn/datagen.hpp"
#include "barnn/errors.hpp"
#include "barnn/metrics.hpp"
#include "barnn/rng.hpp"

using namespace barnn;

namespace {

std::vector<std::size_t> toks(std::initializer_list<const char*> words) {
  std::vector<std::size_t> out;
  for (const char* w : words) out.push_back(ring::token_id(w));
  return out;
}

}  // namespace

TEST_CASE("rmse and mse") {
  const std::vector<double> a = {1.0, 2.0, 3.0};
  CHECK(metric_rmse(a, a) == 0.0);
  const std::vector<double> zero(5, 0.0), one(5, 1.0);
  CHECK(metric_rmse(zero, one) == 1.0);
  CHECK_THROWS(metric_rmse(std::vector<double>{}, std::vector<double>{}));
  CHECK_THROWS_AS(metric_rmse(a, zero), ShapeError);

  Rng rng(1);
  std::vector<double> x(1000), y(1000);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  CHECK(std::abs(metric_rmse(x, y) - std::sqrt(s / 1000.0)) < 1e-12);
  CHECK(std::abs(metric_rmse(x, y) - std::sqrt(metric_mse(x, y))) < 1e-12);
}

TEST_CASE("nll") {
  const std::vector<double> y = {0.1, -0.4, 2.0}, ones(3, 1.0);
  CHECK(metric_nll(y, y, ones) == doctest::Approx(0.9189385).epsilon(1e-7));
  std::vector<double> shifted = y;
  for (double& v : shifted) v += 1.0;
  CHECK(metric_nll(y, shifted, ones) == doctest::Approx(1.4189385).epsilon(1e-7));
  const std::vector<double> small(3, 0.01);
  CHECK(metric_nll(y, y, small) < metric_nll(y, y, ones));
  CHECK_THROWS_AS(metric_nll(y, y, std::vector<double>{1.0, -1.0, 1.0}), DomainError);

  // For a fixed error e the NLL is minimized at s^2 = e^2.
  const std::vector<double> truth(4, 0.0), pred(4, 0.3);
  auto nll_at = [&](double s2) { return metric_nll(truth, pred, std::vector<double>(4, s2)); };
  CHECK(nll_at(0.09) < nll_at(0.08));
  CHECK(nll_at(0.09) < nll_at(0.10));
}

TEST_CASE("ece") {
  Rng rng(7);
  const std::size_t n = 10000;
  std::vector<double> y(n), mu(n), var(n);
  for (std::size_t i = 0; i < n; ++i) {
    mu[i] = rng.uniform(-1.0, 1.0);
    var[i] = rng.uniform(0.1, 2.0);
    y[i] = mu[i] + std::sqrt(var[i]) * rng.normal();
  }
  const auto cal = metric_ece(y, mu, var);
  CHECK(cal.ece < 0.02);
  REQUIRE(cal.curve.size() == 100);
  CHECK(cal.curve.front().first == doctest::Approx(0.005));
  CHECK(cal.curve.back().first == doctest::Approx(0.995));
  for (std::size_t i = 1; i < cal.curve.size(); ++i) CHECK(cal.curve[i].first > cal.curve[i - 1].first);

  // Overconfident predictor always below the truth.
  std::vector<double> above(n), tiny(n, 1e-10);
  for (std::size_t i = 0; i < n; ++i) above[i] = mu[i] + 0.5;
  CHECK(std::abs(metric_ece(above, mu, tiny).ece - 0.5) < 0.02);

  // Affine equivariance.
  std::vector<double> y2(n), mu2(n), var2(n);
  for (std::size_t i = 0; i < n; ++i) {
    y2[i] = 3.0 * y[i] - 2.0;
    mu2[i] = 3.0 * mu[i] - 2.0;
    var2[i] = 9.0 * var[i];
  }
  CHECK(metric_ece(y2, mu2, var2).ece == doctest::Approx(cal.ece).epsilon(1e-9));

  const std::vector<double> zero(n, 0.0);
  CHECK_THROWS(metric_ece(y, mu, zero, 100, 0.0));
  CHECK_NOTHROW(metric_ece(y, mu, zero));
  CHECK_THROWS(metric_ece(y, mu, var, 1));
}

TEST_CASE("metrics are permutation invariant") {
  Rng rng(3);
  std::vector<double> y(200), mu(200), var(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = rng.normal();
    mu[i] = rng.normal();
    var[i] = rng.uniform(0.2, 1.5);
  }
  const auto a = evaluate_metrics(y, mu, var);
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::vector<double> y2, mu2, var2;
  for (std::size_t i : perm) {
    y2.push_back(y[i]);
    mu2.push_back(mu[i]);
    var2.push_back(var[i]);
  }
  const auto b = evaluate_metrics(y2, mu2, var2);
  CHECK(a.mse == doctest::Approx(b.mse).epsilon(1e-12));
  CHECK(a.nll == doctest::Approx(b.nll).epsilon(1e-12));
  CHECK(a.ece == b.ece);
  CHECK(std::abs(a.rmse - std::sqrt(a.mse)) < 1e-12);
}

TEST_CASE("ring validity") {
  auto r = ring_validity(toks({"a", "1", "b", "c", "1"}));
  CHECK(r.valid);
  CHECK(r.ring_count == 1);
  r = ring_validity(toks({"a", "1", "b", "2", "c", "1"}));
  CHECK_FALSE(r.valid);
  CHECK(r.ring_count == 2);
  r = ring_validity(toks({"a", "b", "<eos>"}));
  CHECK(r.valid);
  CHECK(r.ring_count == 0);
  CHECK_THROWS_AS(ring_validity(toks({"a", "<bos>"})), FormatError);
  const std::size_t bad[] = {2, 77};
  CHECK_THROWS_AS(ring_validity(bad), FormatError);

  const std::vector<std::vector<std::size_t>> samples = {toks({"a", "1", "b", "1"}), toks({"a", "1", "b"}),
                                                          toks({"c"})};
  const auto rep = ring_report(samples);
  CHECK(rep.overall.valid == 2);
  CHECK(rep.overall.total == 3);
  CHECK(rep.by_rings.at(1).total == 2);
  CHECK(rep.by_rings.at(1).fraction() == 0.5);
  CHECK(rep.by_rings.at(0).fraction() == 1.0);
}
