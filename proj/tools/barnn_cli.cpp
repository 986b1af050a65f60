// barnn: data generation, training, evaluation and sampling.
//
// Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O or format failure.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "barnn/checkpoint.hpp"
#include "barnn/config.hpp"
#include "barnn/datagen.hpp"
#include "barnn/inference.hpp"
#include "barnn/metrics.hpp"
#include "barnn/training.hpp"

namespace fs = std::filesystem;
using namespace barnn;

namespace {

constexpr int kUsage = 2;
constexpr int kNumeric = 3;
constexpr int kIo = 4;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

fs::path sinusoid_file(const fs::path& dir, bool train) {
  return dir / (train ? "sinusoid_train.csv" : "sinusoid_test.csv");
}
fs::path rings_file(const fs::path& dir) { return dir / "rings.txt"; }

// Settings shared by train, eval and sample. Each is registered as a flag
// and can also come from a --config key=value file; flags win.
const char* const kConfigKeys[] = {"task",      "model",  "prior",  "kl_weight", "epochs",   "lr",
                                   "wd",        "batch",  "window", "hidden",    "dropout_p", "sigma2",
                                   "ensemble",  "seed",   "eval_seed"};

struct ConfigFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void attach(CLI::App* app) {
    for (const char* key : kConfigKeys) {
      std::string flag = key;
      for (char& ch : flag)
        if (ch == '_') ch = '-';
      options[key] = app->add_option("--" + flag, values[key]);
    }
    app->add_option("--config", config_path, "key=value settings file; flags override it");
  }

  Config resolve() const {
    Config c;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot read config " + config_path);
      for (const auto& [k, v] : read_key_values(in)) c.set(k, v);
    }
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) c.set(key, values.at(key));
    c.validate();
    return c.with_task_defaults();
  }
};

Variant forecaster_variant(const Config& c) {
  if (c.model == "barnn") return c.prior == "tvamp" ? Variant::BarnnTVamp : Variant::BarnnLogUniform;
  if (c.model == "mlp") return Variant::PlainMlp;
  if (c.model == "dropout") return Variant::McDropout;
  return Variant::Static;
}

std::string model_tag(Variant v) {
  switch (v) {
    case Variant::BarnnTVamp:
    case Variant::BarnnLogUniform: return "barnn";
    case Variant::McDropout: return "dropout";
    case Variant::PlainMlp: return "mlp";
    case Variant::Static: return "static";
  }
  return "?";
}

std::string prior_tag(Variant v) {
  if (v == Variant::BarnnTVamp) return "tvamp";
  if (v == Variant::BarnnLogUniform) return "loguniform";
  return "none";
}

Tensor load_states(const fs::path& path) {
  auto in = open_in(path);
  return stack_states(read_sinusoid(in));
}

// ---- gen-data ---------------------------------------------------------------

struct GenArgs {
  std::string task = "sinusoid";
  std::size_t train = 1024, test = 100, n = 20000, max_rings = 8, max_len = 40;
  std::uint64_t seed = 0;
  std::string out = "data";
};

int cmd_gen_data(const GenArgs& a) {
  if (a.task == "sinusoid") {
    if (a.train == 0 || a.test == 0) throw ConfigError("gen-data: --train and --test must be positive");
    const std::pair<fs::path, std::vector<Trajectory>> sets[] = {
        {sinusoid_file(a.out, true), gen_sinusoid(a.train, train_split_seed(a.seed))},
        {sinusoid_file(a.out, false), gen_sinusoid(a.test, test_split_seed(a.seed))},
    };
    for (const auto& [path, data] : sets) {
      auto out = open_out(path);
      write_sinusoid(out, data);
      if (!out.flush()) throw IoError("write failed: " + path.string());
      std::cout << "wrote " << data.size() << " records to " << path.string() << "\n";
    }
    return 0;
  }
  if (a.n == 0) throw ConfigError("gen-data: --n must be positive");
  RingCorpusOptions opts;
  opts.max_rings = a.max_rings;
  opts.max_len = a.max_len;
  std::vector<RingString> corpus;
  try {
    corpus = gen_ring_corpus(a.n, opts, a.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const fs::path path = rings_file(a.out);
  auto out = open_out(path);
  write_ring_corpus(out, corpus);
  if (!out.flush()) throw IoError("write failed: " + path.string());
  std::cout << "wrote " << corpus.size() << " records to " << path.string() << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  ConfigFlags flags;
  std::string data = "data";
  std::string out = "run";
  bool quiet = false;
};

class TrainLog {
 public:
  explicit TrainLog(const fs::path& path) : out_(open_out(path)) { out_ << "epoch,fit_loss,kl_loss,total_loss\n"; }
  void row(std::size_t epoch, const LossParts& p) {
    out_ << epoch << ',' << fmt(p.fit) << ',' << fmt(p.kl) << ',' << fmt(p.total) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

void progress(bool quiet, std::size_t epoch, std::size_t epochs, const LossParts& p) {
  if (quiet) return;
  if (epoch == 1 || epoch == epochs || epoch % std::max<std::size_t>(1, epochs / 10) == 0) {
    std::cerr << "epoch " << epoch << "/" << epochs << "  fit " << p.fit << "  kl " << p.kl << "\n";
  }
}

int cmd_train(const TrainArgs& a) {
  const Config c = a.flags.resolve();
  const fs::path out_dir = a.out;
  if (c.task == "sinusoid") {
    const Variant variant = forecaster_variant(c);
    if (variant == Variant::Static) {
      throw ConfigError("static baseline has no parameters; evaluate it directly with `eval --model static`");
    }
    const Tensor states = load_states(sinusoid_file(a.data, true));
    ForecasterConfig fc;
    fc.variant = variant;
    fc.window = c.window;
    fc.hidden = *c.hidden;
    fc.dropout_p = c.dropout_p;
    Forecaster model(fc, c.seed);
    ForecasterTrainOptions opts;
    opts.epochs = *c.epochs;
    opts.batch = *c.batch;
    opts.lr = *c.lr;
    opts.weight_decay = *c.weight_decay;
    opts.kl_weight = c.kl_weight;
    opts.seed = c.seed;
    ForecasterTrainer trainer(model, states, opts);
    TrainLog log(out_dir / "train_log.csv");
    for (std::size_t e = 1; e <= opts.epochs; ++e) {
      const LossParts p = trainer.epoch();
      log.row(e, p);
      progress(a.quiet, e, opts.epochs, p);
    }
    Checkpoint ckpt = to_checkpoint(model);
    ckpt.set("seed", std::to_string(c.seed));
    save_checkpoint(out_dir / "checkpoint.bin", ckpt);
  } else {
    auto in = open_in(rings_file(a.data));
    auto corpus = read_ring_corpus(in);
    LstmConfig lc;
    lc.hidden = *c.hidden;
    lc.bayesian = c.model == "barnn";
    LstmModel model(lc, c.seed);
    LstmTrainOptions opts;
    opts.epochs = *c.epochs;
    opts.batch = *c.batch;
    opts.lr = *c.lr;
    opts.weight_decay = *c.weight_decay;
    opts.kl_weight = c.kl_weight;
    opts.seed = c.seed;
    LstmTrainer trainer(model, std::move(corpus), opts);
    TrainLog log(out_dir / "train_log.csv");
    for (std::size_t e = 1; e <= opts.epochs; ++e) {
      const LossParts p = trainer.epoch();
      log.row(e, p);
      progress(a.quiet, e, opts.epochs, p);
    }
    Checkpoint ckpt = to_checkpoint(model);
    ckpt.set("seed", std::to_string(c.seed));
    save_checkpoint(out_dir / "checkpoint.bin", ckpt);
  }
  std::cout << "wrote " << (out_dir / "checkpoint.bin").string() << " and " << (out_dir / "train_log.csv").string()
            << "\n";
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  ConfigFlags flags;
  std::string checkpoint;
  std::string data = "data";
  std::string out;
  bool map = false;
  bool teacher_forced = false;
  std::size_t threads = 1;
};

int cmd_eval(const EvalArgs& a) {
  const Config c = a.flags.resolve();
  if (c.task != "sinusoid") throw ConfigError("eval: only the sinusoid task is evaluated here; use sample for rings");

  std::optional<Forecaster> model;
  std::uint64_t train_seed = c.seed;
  if (c.model == "static" && a.checkpoint.empty()) {
    ForecasterConfig fc;
    fc.variant = Variant::Static;
    model.emplace(fc);
  } else {
    if (a.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    model.emplace(forecaster_from_checkpoint(ckpt));
    for (const auto& [k, v] : ckpt.meta)
      if (k == "seed") train_seed = std::stoull(v);
  }
  const Variant variant = model->config().variant;
  const Tensor states = load_states(sinusoid_file(a.data, false));
  if (states.dim(1) < model->config().horizon + 1) throw FormatError("eval: test trajectories are too short");

  EnsembleOptions eo;
  const bool deterministic = a.map || variant == Variant::Static || variant == Variant::PlainMlp;
  eo.members = deterministic ? 1 : c.ensemble;
  eo.mode = a.map ? SampleMode::Map : SampleMode::Stochastic;
  eo.protocol = a.teacher_forced ? Protocol::TeacherForced : Protocol::ClosedLoop;
  eo.sigma2_fixed = c.sigma2;
  eo.seed = c.eval_seed;
  eo.steps = model->config().horizon;
  eo.threads = a.threads;
  if (eo.members == 1 && c.sigma2 == 0.0) {
    std::cerr << "warning: a single ensemble member has zero predictive variance; nll and ece use the variance floor "
              << kVarianceFloor << "\n";
  }

  const EnsembleForecast f = ensemble_forecast(*model, states, eo);
  Tensor truth(Shape{states.dim(0), eo.steps});
  for (std::size_t r = 0; r < states.dim(0); ++r)
    for (std::size_t t = 1; t <= eo.steps; ++t) truth.at(r, t - 1) = states.at(r, t);
  const Tensor var = f.total_variance();
  const MetricsReport m = evaluate_metrics(truth.values(), f.mean.values(), var.values());

  std::ostringstream csv;
  csv << "model,prior,seed,D,mse,rmse,nll,ece\n";
  csv << model_tag(variant) << ',' << prior_tag(variant) << ',' << train_seed << ',' << eo.members << ','
      << fmt(m.mse) << ',' << fmt(m.rmse) << ',' << fmt(m.nll) << ',' << fmt(m.ece) << '\n';
  std::cout << csv.str();
  if (!a.out.empty()) {
    auto out = open_out(a.out);
    out << csv.str();
    if (!out.flush()) throw IoError("write failed: " + a.out);
  }
  return 0;
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
  ConfigFlags flags;
  std::string checkpoint;
  std::string data = "data";
  std::string out;
  std::size_t n = 1000;
  std::size_t max_len = 64;
  std::size_t trajectories = 1;
  bool map = false;
  bool teacher_forced = false;
};

int cmd_sample(const SampleArgs& a) {
  const Config c = a.flags.resolve();
  if (a.checkpoint.empty()) throw ConfigError("sample: --checkpoint is required");
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::ostringstream body;

  if (ckpt.get("task") == "rings") {
    const LstmModel model = lstm_from_checkpoint(ckpt);
    Rng rng(c.eval_seed);
    const SampleMode mode = a.map || !model.config().bayesian ? SampleMode::Map : SampleMode::Stochastic;
    const auto samples = model.sample(a.n, a.max_len, mode, rng);
    const RingReport rep = ring_report(samples);
    std::cout << "validity " << rep.overall.fraction() << " (" << rep.overall.valid << "/" << rep.overall.total
              << ")\n";
    std::cout << "rings,valid,total,validity\n";
    for (const auto& [k, t] : rep.by_rings) std::cout << k << ',' << t.valid << ',' << t.total << ',' << fmt(t.fraction()) << '\n';
    for (const auto& s : samples) body << ring::join(s) << '\n';
    if (a.out.empty()) return 0;
  } else {
    const Forecaster model = forecaster_from_checkpoint(ckpt);
    const Tensor all = load_states(sinusoid_file(a.data, false));
    const std::size_t rows_n = std::min(a.trajectories, all.dim(0));
    if (rows_n == 0) throw ConfigError("sample: --trajectories must be positive");
    Tensor states(Shape{rows_n, all.dim(1)});
    for (std::size_t r = 0; r < rows_n; ++r)
      for (std::size_t t = 0; t < all.dim(1); ++t) states.at(r, t) = all.at(r, t);
    EnsembleOptions eo;
    eo.members = c.ensemble;
    eo.seed = c.eval_seed;
    eo.mode = a.map ? SampleMode::Map : SampleMode::Stochastic;
    eo.protocol = a.teacher_forced ? Protocol::TeacherForced : Protocol::ClosedLoop;
    eo.steps = model.config().horizon;
    const auto members = ensemble_members(model, states, eo);
    body << "member,trajectory,t,y\n";
    for (std::size_t m = 0; m < members.size(); ++m)
      for (std::size_t r = 0; r < rows_n; ++r) {
        body << m << ',' << r << ",0," << fmt(states.at(r, 0)) << '\n';
        for (std::size_t t = 1; t <= eo.steps; ++t) body << m << ',' << r << ',' << t << ',' << fmt(members[m].at(r, t - 1)) << '\n';
      }
    if (a.out.empty()) {
      std::cout << body.str();
      return 0;
    }
  }
  auto out = open_out(a.out);
  out << body.str();
  if (!out.flush()) throw IoError("write failed: " + a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian autoregressive networks: data, training, evaluation, sampling"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate the sinusoid or ring-language dataset");
  g->add_option("--task", gen.task)->check(CLI::IsMember({"sinusoid", "rings"}));
  g->add_option("--train", gen.train, "sinusoid training trajectories");
  g->add_option("--test", gen.test, "sinusoid test trajectories");
  g->add_option("--n", gen.n, "ring strings");
  g->add_option("--max-rings", gen.max_rings);
  g->add_option("--max-len", gen.max_len);
  g->add_option("--seed", gen.seed);
  g->add_option("--out", gen.out, "output directory");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write checkpoint.bin and train_log.csv");
  train.flags.attach(t);
  t->add_option("--data", train.data, "dataset directory");
  t->add_option("--out", train.out, "run directory");
  t->add_flag("--quiet", train.quiet);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a forecaster on the test set and print a metrics CSV row");
  eval.flags.attach(e);
  e->add_option("--checkpoint", eval.checkpoint);
  e->add_option("--data", eval.data);
  e->add_option("--out", eval.out, "also write the CSV here");
  e->add_flag("--map", eval.map, "single deterministic pass with posterior-mean weights");
  e->add_flag("--teacher-forced", eval.teacher_forced, "one-step-ahead predictions from the true previous states");
  e->add_option("--threads", eval.threads, "worker threads for ensemble members");

  SampleArgs sample;
  auto* s = app.add_subcommand("sample", "Sample token strings or forecast trajectories from a checkpoint");
  sample.flags.attach(s);
  s->add_option("--checkpoint", sample.checkpoint);
  s->add_option("--data", sample.data);
  s->add_option("--out", sample.out);
  s->add_option("--n", sample.n, "strings to sample (rings)");
  s->add_option("--max-len", sample.max_len, "token limit per string (rings)");
  s->add_option("--trajectories", sample.trajectories, "test trajectories to roll out (sinusoid)");
  s->add_flag("--map", sample.map);
  s->add_flag("--teacher-forced", sample.teacher_forced);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen_data(gen);
    if (t->parsed()) return cmd_train(train);
    if (e->parsed()) return cmd_eval(eval);
    if (s->parsed()) return cmd_sample(sample);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << "\n";
    return kNumeric;
  } catch (const FormatError& err) {
    std::cerr << "format error: " << err.what() << "\n";
    return kIo;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << "\n";
    return kIo;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
