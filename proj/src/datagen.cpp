#include "barnn/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "barnn/errors.hpp"
#include "barnn/rng.hpp"

namespace barnn {

double sinusoid_abscissa(std::size_t t) {
  double x = 0.0;
  for (std::size_t i = 0; i < t; ++i) x += 3.0 * std::numbers::pi / 100.0;
  return x;
}

Trajectory make_sinusoid(std::uint64_t trajectory_seed) {
  Rng rng(trajectory_seed);
  Trajectory tr;
  tr.seed = trajectory_seed;
  for (std::size_t j = 0; j < kSinusoidTerms; ++j) {
    tr.freq[j] = rng.uniform(0.5, 1.5);
    tr.phase[j] = rng.uniform(0.0, 3.0 * std::numbers::pi);
  }
  tr.y.resize(kSinusoidSteps + 1);
  double x = 0.0;
  for (std::size_t t = 0; t <= kSinusoidSteps; ++t) {
    if (t > 0) x += 3.0 * std::numbers::pi / 100.0;
    double s = 0.0;
    for (std::size_t j = 0; j < kSinusoidTerms; ++j) s += std::sin(tr.freq[j] * x + tr.phase[j]);
    tr.y[t] = s / static_cast<double>(kSinusoidTerms);
  }
  return tr;
}

std::vector<Trajectory> gen_sinusoid(std::size_t n, std::uint64_t seed) {
  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(make_sinusoid(derive_seed(seed, i)));
  return out;
}

std::uint64_t train_split_seed(std::uint64_t seed) { return derive_seed(seed, 0x7472); }
std::uint64_t test_split_seed(std::uint64_t seed) { return derive_seed(seed, 0x7465); }

Tensor stack_states(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) return Tensor(Shape{0, kSinusoidSteps + 1});
  const std::size_t len = trajectories.front().y.size();
  Tensor out(Shape{trajectories.size(), len});
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].y.size() != len) throw ShapeError("stack_states: trajectories differ in length");
    std::copy(trajectories[i].y.begin(), trajectories[i].y.end(), out.data().begin() + i * len);
  }
  return out;
}

namespace {

void put_double(std::ostream& out, double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.write(buf, res.ptr - buf);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void write_sinusoid(std::ostream& out, std::span<const Trajectory> trajectories) {
  for (const auto& tr : trajectories) {
    out << tr.seed;
    for (double a : tr.freq) out.put(','), put_double(out, a);
    for (double b : tr.phase) out.put(','), put_double(out, b);
    for (double y : tr.y) out.put(','), put_double(out, y);
    out.put('\n');
  }
}

std::vector<Trajectory> read_sinusoid(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const std::size_t expected = 1 + 2 * kSinusoidTerms + kSinusoidSteps + 1;
    if (fields.size() != expected) {
      throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(expected) + " fields, got " +
                        std::to_string(fields.size()));
    }
    Trajectory tr;
    auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), tr.seed);
    if (res.ec != std::errc()) throw FormatError("line " + std::to_string(lineno) + ": bad seed");
    for (std::size_t j = 0; j < kSinusoidTerms; ++j) {
      tr.freq[j] = parse_double(fields[1 + j], lineno);
      tr.phase[j] = parse_double(fields[1 + kSinusoidTerms + j], lineno);
    }
    for (std::size_t t = 0; t <= kSinusoidSteps; ++t) tr.y.push_back(parse_double(fields[1 + 2 * kSinusoidTerms + t], lineno));
    out.push_back(std::move(tr));
  }
  return out;
}

namespace ring {

std::string token_text(std::size_t id) {
  if (id == kBos) return "<bos>";
  if (id == kEos) return "<eos>";
  if (id >= kFirstLetter && id < kFirstDigit) return std::string(1, static_cast<char>('a' + (id - kFirstLetter)));
  if (id >= kFirstDigit && id < kVocab) return std::string(1, static_cast<char>('1' + (id - kFirstDigit)));
  throw FormatError("unknown token id " + std::to_string(id));
}

std::size_t token_id(std::string_view text) {
  if (text == "<bos>") return kBos;
  if (text == "<eos>") return kEos;
  if (text.size() == 1) {
    const char c = text[0];
    if (c >= 'a' && c < static_cast<char>('a' + kLetters)) return kFirstLetter + static_cast<std::size_t>(c - 'a');
    if (c >= '1' && c <= '9') return kFirstDigit + static_cast<std::size_t>(c - '1');
  }
  throw FormatError("unknown token '" + std::string(text) + "'");
}

bool is_digit(std::size_t id) { return id >= kFirstDigit && id < kVocab; }

std::string join(std::span<const std::size_t> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += token_text(tokens[i]);
  }
  return out;
}

std::vector<std::size_t> split(std::string_view line) {
  std::vector<std::size_t> out;
  std::istringstream ss{std::string(line)};
  std::string tok;
  while (ss >> tok) out.push_back(token_id(tok));
  return out;
}

}  // namespace ring

std::vector<RingString> gen_ring_corpus(std::size_t n, const RingCorpusOptions& options, std::uint64_t seed) {
  const std::size_t max_rings = options.max_rings;
  const std::size_t max_len = options.max_len;
  if (max_rings > ring::kDigits) throw std::invalid_argument("gen_ring_corpus: at most 9 ring markers");
  if (max_len < 4) throw std::invalid_argument("gen_ring_corpus: max_len must be at least 4");
  if (max_len < 2 * max_rings + 2) {
    throw std::invalid_argument("gen_ring_corpus: max_len " + std::to_string(max_len) + " cannot hold " +
                                std::to_string(max_rings) + " rings");
  }
  const std::size_t long_sep = (max_len + 1) / 2;

  std::vector<RingString> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng(derive_seed(seed, s));
    std::size_t rings = 0;
    while (rings < max_rings && rng.uniform() < options.ring_continue_p) ++rings;
    const std::size_t min_len = std::max<std::size_t>(4, 2 * rings + 2);
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);

    std::vector<bool> used(len, false);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 0; r < rings; ++r) {
      const bool want_long = rng.uniform() < options.long_pair_p && len - 1 >= long_sep;
      const std::size_t lo = want_long ? long_sep : 2;
      const std::size_t hi = want_long ? len - 1 : std::min<std::size_t>(6, len - 1);
      bool placed = false;
      for (int attempt = 0; attempt < 64 && !placed && lo <= hi; ++attempt) {
        const std::size_t sep = lo + rng.below(hi - lo + 1);
        const std::size_t open = rng.below(len - sep);
        if (!used[open] && !used[open + sep]) {
          used[open] = used[open + sep] = true;
          pairs.emplace_back(open, open + sep);
          placed = true;
        }
      }
      if (!placed) {
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < len; ++i) {
          if (!used[i]) free.push_back(i);
        }
        const std::size_t a = free[rng.below(free.size())];
        std::size_t b = a;
        while (b == a) b = free[rng.below(free.size())];
        used[a] = used[b] = true;
        pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
    // Markers are numbered in order of opening.
    std::sort(pairs.begin(), pairs.end());
    RingString rs;
    rs.ring_count = rings;
    rs.tokens.assign(len, 0);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      rs.tokens[pairs[r].first] = rs.tokens[pairs[r].second] = ring::kFirstDigit + r;
    }
    for (std::size_t i = 0; i < len; ++i) {
      if (!used[i]) rs.tokens[i] = ring::kFirstLetter + rng.below(ring::kLetters);
    }
    out.push_back(std::move(rs));
  }
  return out;
}

void write_ring_corpus(std::ostream& out, std::span<const RingString> corpus) {
  for (const auto& rs : corpus) out << ring::join(rs.tokens) << '\n';
}

std::vector<std::vector<std::size_t>> read_ring_corpus(std::istream& in) {
  std::vector<std::vector<std::size_t>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(ring::split(line));
  }
  return out;
}

}  // namespace barnn
