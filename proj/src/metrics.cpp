#include "barnn/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "barnn/datagen.hpp"
#include "barnn/errors.hpp"

namespace barnn {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.empty()) throw std::invalid_argument(std::string(op) + ": empty input");
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(a.size()) + " truths vs " + std::to_string(b.size()) +
                     " predictions");
  }
}

double floored(double var, double floor, const char* op) {
  if (var < 0.0) throw DomainError(std::string(op) + ": negative variance");
  const double v = std::max(var, floor);
  if (v == 0.0) throw DomainError(std::string(op) + ": zero variance without a floor");
  return v;
}

}  // namespace

double metric_mse(std::span<const double> truth, std::span<const double> pred_mean) {
  check_pair(truth, pred_mean, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - pred_mean[i];
    s += d * d;
  }
  return s / static_cast<double>(truth.size());
}

double metric_rmse(std::span<const double> truth, std::span<const double> pred_mean) {
  return std::sqrt(metric_mse(truth, pred_mean));
}

double metric_nll(std::span<const double> truth, std::span<const double> pred_mean, std::span<const double> pred_var,
                  double floor) {
  check_pair(truth, pred_mean, "nll");
  check_pair(truth, pred_var, "nll");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double v = floored(pred_var[i], floor, "nll");
    const double d = truth[i] - pred_mean[i];
    s += std::log(2.0 * std::numbers::pi * v) + d * d / v;
  }
  return s / (2.0 * static_cast<double>(truth.size()));
}

Calibration metric_ece(std::span<const double> truth, std::span<const double> pred_mean,
                       std::span<const double> pred_var, std::size_t levels, double floor) {
  check_pair(truth, pred_mean, "ece");
  check_pair(truth, pred_var, "ece");
  if (levels < 2) throw std::invalid_argument("ece: need at least 2 quantile levels");

  // y <= Q_p(m, s^2)  <=>  Phi((y - m) / s) <= p, so each point contributes
  // to every level at or above its predictive CDF value.
  std::vector<std::size_t> hits(levels + 1, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double s = std::sqrt(floored(pred_var[i], floor, "ece"));
    const double cdf = 0.5 * std::erfc(-(truth[i] - pred_mean[i]) / (s * std::numbers::sqrt2));
    // first grid index with p_k >= cdf, p_k = (k + 0.5) / levels
    double k = std::ceil(cdf * static_cast<double>(levels) - 0.5);
    k = std::clamp(k, 0.0, static_cast<double>(levels));
    std::size_t first = static_cast<std::size_t>(k);
    if (first < levels && (static_cast<double>(first) + 0.5) / static_cast<double>(levels) < cdf) ++first;
    ++hits[first];
  }
  Calibration out;
  out.curve.reserve(levels);
  std::size_t covered = 0;
  double gap = 0.0;
  for (std::size_t k = 0; k < levels; ++k) {
    covered += hits[k];
    const double p = (static_cast<double>(k) + 0.5) / static_cast<double>(levels);
    const double p_obs = static_cast<double>(covered) / static_cast<double>(truth.size());
    out.curve.emplace_back(p, p_obs);
    gap += std::abs(p - p_obs);
  }
  out.ece = gap / static_cast<double>(levels);
  return out;
}

RingCheck ring_validity(std::span<const std::size_t> tokens) {
  std::array<std::size_t, ring::kDigits> count{};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::size_t id = tokens[i];
    if (id == ring::kEos) {
      if (i + 1 != tokens.size()) throw FormatError("ring_validity: end token before end of string");
      break;
    }
    if (id == ring::kBos || id >= ring::kVocab) throw FormatError("ring_validity: unexpected token id " + std::to_string(id));
    if (ring::is_digit(id)) ++count[id - ring::kFirstDigit];
  }
  RingCheck out{true, 0};
  for (std::size_t c : count) {
    out.ring_count += (c + 1) / 2;
    if (c != 0 && c != 2) out.valid = false;
  }
  return out;
}

RingReport ring_report(std::span<const std::vector<std::size_t>> samples) {
  RingReport report;
  for (const auto& s : samples) {
    const RingCheck check = ring_validity(s);
    auto& bucket = report.by_rings[check.ring_count];
    ++bucket.total;
    ++report.overall.total;
    if (check.valid) {
      ++bucket.valid;
      ++report.overall.valid;
    }
  }
  return report;
}

MetricsReport evaluate_metrics(std::span<const double> truth, std::span<const double> pred_mean,
                               std::span<const double> pred_var, std::size_t ece_levels) {
  MetricsReport r;
  r.mse = metric_mse(truth, pred_mean);
  r.rmse = std::sqrt(r.mse);
  r.nll = metric_nll(truth, pred_mean, pred_var);
  Calibration cal = metric_ece(truth, pred_mean, pred_var, ece_levels);
  r.ece = cal.ece;
  r.calibration_curve = std::move(cal.curve);
  return r;
}

}  // namespace barnn
