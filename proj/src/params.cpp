#include "barnn/params.hpp"

#include <cmath>

namespace barnn {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  items_.push_back(Parameter{std::move(name), std::move(value)});
  return items_.size() - 1;
}

std::vector<ad::Var> ParameterSet::bind(ad::Tape& tape) const {
  std::vector<ad::Var> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(tape.leaf(p.value));
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor out(std::move(shape));
  for (double& v : out.data()) v = rng.uniform(-bound, bound);
  return out;
}

}  // namespace barnn
