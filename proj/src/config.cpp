#include "barnn/config.hpp"

#include <charconv>
#include <istream>

namespace barnn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("config: cannot parse " + key + " = '" + value + "'");
  }
  return out;
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  if (key == "task") task = value;
  else if (key == "model") model = value;
  else if (key == "prior") prior = value;
  else if (key == "kl_weight") kl_weight = parse_number<double>(key, value);
  else if (key == "epochs") epochs = parse_number<std::size_t>(key, value);
  else if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "wd" || key == "weight_decay") weight_decay = parse_number<double>(key, value);
  else if (key == "batch") batch = parse_number<std::size_t>(key, value);
  else if (key == "window") window = parse_number<std::size_t>(key, value);
  else if (key == "hidden") hidden = parse_number<std::size_t>(key, value);
  else if (key == "dropout_p") dropout_p = parse_number<double>(key, value);
  else if (key == "sigma2") sigma2 = parse_number<double>(key, value);
  else if (key == "ensemble") ensemble = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "eval_seed") eval_seed = parse_number<std::uint64_t>(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

void Config::validate() const {
  if (task != "sinusoid" && task != "rings") throw ConfigError("config: task must be sinusoid or rings, got " + task);
  if (model != "barnn" && model != "mlp" && model != "dropout" && model != "static" && model != "lstm") {
    throw ConfigError("config: unknown model " + model);
  }
  if (prior != "tvamp" && prior != "loguniform") throw ConfigError("config: unknown prior " + prior);
  if (task == "rings" && model != "lstm" && model != "barnn") {
    throw ConfigError("config: the rings task supports models barnn and lstm");
  }
  if (task == "sinusoid" && model == "lstm") throw ConfigError("config: model lstm needs --task rings");
  if (task == "rings" && prior != "tvamp") throw ConfigError("config: the rings task supports only the tvamp prior");
  if (epochs && *epochs == 0) throw ConfigError("config: epochs must be positive");
  if (lr && !(*lr > 0.0)) throw ConfigError("config: lr must be positive");
  if (weight_decay && !(*weight_decay >= 0.0)) throw ConfigError("config: weight decay must be non-negative");
  if (!(kl_weight >= 0.0)) throw ConfigError("config: kl_weight must be non-negative");
  if (batch && *batch == 0) throw ConfigError("config: batch must be positive");
  if (window == 0) throw ConfigError("config: window must be positive");
  if (hidden && *hidden == 0) throw ConfigError("config: hidden must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("config: dropout_p must lie in [0, 1)");
  if (!(sigma2 >= 0.0)) throw ConfigError("config: sigma2 must be non-negative");
  if (ensemble == 0) throw ConfigError("config: ensemble must be positive");
}

Config Config::with_task_defaults() const {
  Config c = *this;
  const bool rings = task == "rings";
  if (!c.epochs) c.epochs = rings ? 30 : 1500;
  if (!c.lr) c.lr = rings ? 2e-4 : 1e-4;
  if (!c.weight_decay) c.weight_decay = rings ? 0.0 : 1e-8;
  if (!c.batch) c.batch = rings ? 64 : 128;
  if (!c.hidden) c.hidden = rings ? 128 : 64;
  return c;
}

std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: " + t);
    }
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

}  // namespace barnn
