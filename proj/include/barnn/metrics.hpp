#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace barnn {

inline constexpr double kVarianceFloor = 1e-12;

double metric_mse(std::span<const double> truth, std::span<const double> pred_mean);
double metric_rmse(std::span<const double> truth, std::span<const double> pred_mean);

/// Gaussian negative log-likelihood averaged over points,
/// (1 / 2n) sum [log(2 pi s^2) + (y - m)^2 / s^2], with s^2 floored.
double metric_nll(std::span<const double> truth, std::span<const double> pred_mean, std::span<const double> pred_var,
                  double floor = kVarianceFloor);

struct Calibration {
  double ece = 0.0;
  std::vector<std::pair<double, double>> curve;  // (p, observed coverage)
};

/// Mean |p - p_obs| over the uniform grid p_i = (i + 1/2) / levels, where
/// p_obs is the share of points with y <= Q_p(m, s^2). floor = 0 disables
/// flooring, in which case a zero variance is an error.
Calibration metric_ece(std::span<const double> truth, std::span<const double> pred_mean,
                       std::span<const double> pred_var, std::size_t levels = 100, double floor = kVarianceFloor);

struct RingCheck {
  bool valid = false;
  std::size_t ring_count = 0;  // ring openings, counting unclosed ones
};

/// A string is valid when every digit marker occurs zero or two times.
/// A trailing end token is accepted; begin tokens and unknown ids are errors.
RingCheck ring_validity(std::span<const std::size_t> tokens);

struct ValidityTally {
  std::size_t valid = 0;
  std::size_t total = 0;
  double fraction() const { return total ? static_cast<double>(valid) / static_cast<double>(total) : 0.0; }
};

/// Validity by ring count plus the overall tally.
struct RingReport {
  ValidityTally overall;
  std::map<std::size_t, ValidityTally> by_rings;
};

RingReport ring_report(std::span<const std::vector<std::size_t>> samples);

struct MetricsReport {
  double mse = 0.0;
  double rmse = 0.0;
  double nll = 0.0;
  double ece = 0.0;
  std::vector<std::pair<double, double>> calibration_curve;
};

MetricsReport evaluate_metrics(std::span<const double> truth, std::span<const double> pred_mean,
                               std::span<const double> pred_var, std::size_t ece_levels = 100);

}  // namespace barnn
