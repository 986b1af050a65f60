#pragma once

// Checkpoint file layout:
//
//   BARNN1\n
//   #<key> <value>\n            metadata, any number, in order
//   <name> <d0> <d1> ...\n      one line per parameter, in model order
//   \n
//   <payload>                   all parameters' values as little-endian f64
//
// A parameter of rank 0 has a header line holding only its name.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "barnn/errors.hpp"
#include "barnn/forecaster.hpp"
#include "barnn/lstm.hpp"
#include "barnn/params.hpp"

namespace barnn {

inline constexpr const char* kCheckpointMagic = "BARNN1";

struct CheckpointVersionError : FormatError {
  using FormatError::FormatError;
};
struct CheckpointTruncatedError : FormatError {
  using FormatError::FormatError;
};
struct CheckpointLayoutError : FormatError {
  using FormatError::FormatError;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  ParameterSet params;

  /// Throws FormatError when the key is absent.
  const std::string& get(const std::string& key) const;
  void set(std::string key, std::string value);
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const Forecaster& model);
Forecaster forecaster_from_checkpoint(const Checkpoint& ckpt);
Checkpoint to_checkpoint(const LstmModel& model);
LstmModel lstm_from_checkpoint(const Checkpoint& ckpt);

}  // namespace barnn
