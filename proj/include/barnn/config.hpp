#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "barnn/errors.hpp"

namespace barnn {

/// Thrown for invalid or unknown settings; the CLI maps it to a usage error.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Config {
  std::string task = "sinusoid";  // sinusoid | rings
  std::string model = "barnn";    // barnn | mlp | dropout | static | lstm
  std::string prior = "tvamp";    // tvamp | loguniform
  double kl_weight = 1.0;
  // Unset fields take the task default from with_task_defaults().
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<double> weight_decay;
  std::optional<std::size_t> batch;
  std::size_t window = 1;
  std::optional<std::size_t> hidden;
  double dropout_p = 0.2;
  double sigma2 = 0.0;
  std::size_t ensemble = 100;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 1;

  /// Sets a field from its textual form. Unknown keys and unparsable values
  /// throw ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Throws ConfigError when a field is out of range or the combination of
  /// task, model and prior is not supported.
  void validate() const;
  /// sinusoid: 1500 epochs, lr 1e-4, wd 1e-8, batch 128, hidden 64.
  /// rings: 30 epochs, lr 2e-4, wd 0, batch 64, hidden 128.
  Config with_task_defaults() const;
};

/// Reads `key = value` lines; blank lines and lines starting with '#' are
/// skipped.
std::map<std::string, std::string> read_key_values(std::istream& in);

}  // namespace barnn
