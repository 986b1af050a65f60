#include "barnn/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace barnn {

const std::string& Checkpoint::get(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw CheckpointLayoutError("checkpoint: missing metadata key '" + key + "'");
}

void Checkpoint::set(std::string key, std::string value) {
  for (auto& [k, v] : meta) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  meta.emplace_back(std::move(key), std::move(value));
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kCheckpointMagic << '\n';
  for (const auto& [k, v] : ckpt.meta) out << '#' << k << ' ' << v << '\n';
  for (const auto& p : ckpt.params.items()) {
    out << p.name;
    for (std::size_t d : p.value.shape()) out << ' ' << d;
    out << '\n';
  }
  out << '\n';
  for (const auto& p : ckpt.params.items()) {
    for (double v : p.value.data()) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
      out.write(bytes, 8);
    }
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CheckpointTruncatedError("checkpoint: empty file");
  if (line != kCheckpointMagic) {
    throw CheckpointVersionError("checkpoint: unsupported format '" + line.substr(0, 16) + "', expected " +
                                 kCheckpointMagic);
  }
  Checkpoint ckpt;
  std::vector<std::pair<std::string, Shape>> headers;
  bool blank = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      blank = true;
      break;
    }
    if (line[0] == '#') {
      const auto space = line.find(' ');
      if (space == std::string::npos) throw CheckpointLayoutError("checkpoint: malformed metadata line '" + line + "'");
      ckpt.meta.emplace_back(line.substr(1, space - 1), line.substr(space + 1));
      continue;
    }
    std::istringstream ss(line);
    std::string name, dim;
    ss >> name;
    Shape shape;
    while (ss >> dim) {
      std::size_t d = 0;
      auto res = std::from_chars(dim.data(), dim.data() + dim.size(), d);
      if (res.ec != std::errc() || res.ptr != dim.data() + dim.size()) {
        throw CheckpointLayoutError("checkpoint: bad dimension '" + dim + "' for parameter " + name);
      }
      shape.push_back(d);
    }
    headers.emplace_back(name, shape);
  }
  if (!blank) throw CheckpointTruncatedError("checkpoint: header not terminated");

  for (const auto& [name, shape] : headers) {
    Tensor value(shape);
    for (double& v : value.data()) {
      char bytes[8];
      if (!in.read(bytes, 8)) {
        throw CheckpointTruncatedError("checkpoint: payload ends inside parameter " + name + " (declared " +
                                       to_string(shape) + ")");
      }
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
      v = std::bit_cast<double>(bits);
    }
    ckpt.params.add(name, std::move(value));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    const std::string last = headers.empty() ? std::string("<none>") : headers.back().first;
    throw CheckpointLayoutError("checkpoint: payload longer than the header declares (after parameter " + last + ")");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

namespace {

std::size_t to_size(const std::string& s, const char* key) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw CheckpointLayoutError(std::string("checkpoint: bad value for ") + key);
  }
  return v;
}

double to_double(const std::string& s, const char* key) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw CheckpointLayoutError(std::string("checkpoint: bad value for ") + key);
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void copy_parameters(const ParameterSet& from, ParameterSet& into) {
  if (from.size() != into.size()) {
    throw CheckpointLayoutError("checkpoint: holds " + std::to_string(from.size()) + " parameters, model expects " +
                                std::to_string(into.size()));
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].name != into[i].name || from[i].value.shape() != into[i].value.shape()) {
      throw CheckpointLayoutError("checkpoint: parameter " + from[i].name + " " + to_string(from[i].value.shape()) +
                                  " does not match model parameter " + into[i].name + " " +
                                  to_string(into[i].value.shape()));
    }
    into[i].value = from[i].value;
  }
}

}  // namespace

Checkpoint to_checkpoint(const Forecaster& model) {
  const auto& c = model.config();
  Checkpoint ckpt;
  ckpt.set("task", "sinusoid");
  ckpt.set("variant", to_string(c.variant));
  ckpt.set("window", std::to_string(c.window));
  ckpt.set("hidden", std::to_string(c.hidden));
  ckpt.set("time_features", std::to_string(c.time_features));
  ckpt.set("encoder_hidden", std::to_string(c.encoder_hidden));
  ckpt.set("encoder_uses_time", c.encoder_uses_time ? "1" : "0");
  ckpt.set("dropout_p", format_double(c.dropout_p));
  ckpt.set("horizon", std::to_string(c.horizon));
  ckpt.params = model.parameters();
  return ckpt;
}

Forecaster forecaster_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.get("task") != "sinusoid") throw CheckpointLayoutError("checkpoint: task is " + ckpt.get("task") + ", expected sinusoid");
  ForecasterConfig c;
  c.variant = parse_variant(ckpt.get("variant"));
  c.window = to_size(ckpt.get("window"), "window");
  c.hidden = to_size(ckpt.get("hidden"), "hidden");
  c.time_features = to_size(ckpt.get("time_features"), "time_features");
  c.encoder_hidden = to_size(ckpt.get("encoder_hidden"), "encoder_hidden");
  c.encoder_uses_time = ckpt.get("encoder_uses_time") == "1";
  c.dropout_p = to_double(ckpt.get("dropout_p"), "dropout_p");
  c.horizon = to_size(ckpt.get("horizon"), "horizon");
  Forecaster model(c);
  copy_parameters(ckpt.params, model.parameters());
  return model;
}

Checkpoint to_checkpoint(const LstmModel& model) {
  const auto& c = model.config();
  Checkpoint ckpt;
  ckpt.set("task", "rings");
  ckpt.set("variant", c.bayesian ? "barnn-lstm" : "lstm");
  ckpt.set("vocab", std::to_string(c.vocab));
  ckpt.set("hidden", std::to_string(c.hidden));
  ckpt.set("encoder_hidden", std::to_string(c.encoder_hidden));
  ckpt.params = model.parameters();
  return ckpt;
}

LstmModel lstm_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.get("task") != "rings") throw CheckpointLayoutError("checkpoint: task is " + ckpt.get("task") + ", expected rings");
  LstmConfig c;
  const std::string& variant = ckpt.get("variant");
  if (variant != "barnn-lstm" && variant != "lstm") throw CheckpointLayoutError("checkpoint: unknown rnn variant " + variant);
  c.bayesian = variant == "barnn-lstm";
  c.vocab = to_size(ckpt.get("vocab"), "vocab");
  c.hidden = to_size(ckpt.get("hidden"), "hidden");
  c.encoder_hidden = to_size(ckpt.get("encoder_hidden"), "encoder_hidden");
  LstmModel model(c);
  copy_parameters(ckpt.params, model.parameters());
  return model;
}

}  // namespace barnn
