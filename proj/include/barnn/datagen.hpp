#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "barnn/tensor.hpp"

namespace barnn {

// ---- sinusoid forecasting task -------------------------------------------

inline constexpr std::size_t kSinusoidSteps = 100;  // states t = 0..100
inline constexpr std::size_t kSinusoidTerms = 5;

struct Trajectory {
  std::uint64_t seed = 0;
  std::array<double, kSinusoidTerms> freq{};   // alpha_j ~ U[0.5, 1.5]
  std::array<double, kSinusoidTerms> phase{};  // beta_j ~ U[0, 3 pi]
  std::vector<double> y;                       // kSinusoidSteps + 1 states
};

/// x_t = t * 3 pi / 100.
double sinusoid_abscissa(std::size_t t);

/// One trajectory with coefficients drawn from its own seed.
Trajectory make_sinusoid(std::uint64_t trajectory_seed);

/// n trajectories; trajectory i uses derive_seed(seed, i).
std::vector<Trajectory> gen_sinusoid(std::size_t n, std::uint64_t seed);

/// Base seeds of the train and test splits for a user seed. Distinct streams.
std::uint64_t train_split_seed(std::uint64_t seed);
std::uint64_t test_split_seed(std::uint64_t seed);

/// States as an [N, T + 1] tensor.
Tensor stack_states(std::span<const Trajectory> trajectories);

/// Text records "seed,alpha1..alpha5,beta1..beta5,y0,...,y100", 17 significant digits.
void write_sinusoid(std::ostream& out, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_sinusoid(std::istream& in);

// ---- ring-closure token language -----------------------------------------

namespace ring {

inline constexpr std::size_t kBos = 0;
inline constexpr std::size_t kEos = 1;
inline constexpr std::size_t kFirstLetter = 2;
inline constexpr std::size_t kLetters = 5;  // a..e
inline constexpr std::size_t kFirstDigit = kFirstLetter + kLetters;
inline constexpr std::size_t kDigits = 9;  // 1..9
inline constexpr std::size_t kVocab = kFirstDigit + kDigits;

std::string token_text(std::size_t id);
/// Throws FormatError for text outside the vocabulary.
std::size_t token_id(std::string_view text);
bool is_digit(std::size_t id);

std::string join(std::span<const std::size_t> tokens);
std::vector<std::size_t> split(std::string_view line);

}  // namespace ring

struct RingString {
  std::vector<std::size_t> tokens;  // letters and digits only
  std::size_t ring_count = 0;
};

struct RingCorpusOptions {
  std::size_t max_rings = 8;
  std::size_t max_len = 40;
  double ring_continue_p = 0.6;  // P(k) proportional to ring_continue_p^k
  double long_pair_p = 0.5;      // share of pairs aimed at separation >= max_len / 2
};

std::vector<RingString> gen_ring_corpus(std::size_t n, const RingCorpusOptions& options, std::uint64_t seed);

void write_ring_corpus(std::ostream& out, std::span<const RingString> corpus);
std::vector<std::vector<std::size_t>> read_ring_corpus(std::istream& in);

}  // namespace barnn
