#pragma once

#include <string>
#include <vector>

#include "barnn/autodiff.hpp"
#include "barnn/rng.hpp"
#include "barnn/tensor.hpp"

namespace barnn {

struct Parameter {
  std::string name;
  Tensor value;
};

/// Ordered, named parameter tensors of a model. Order is fixed at
/// construction and is the order used by checkpoints and optimizers.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return items_.size(); }
  const Parameter& operator[](std::size_t i) const { return items_[i]; }
  Parameter& operator[](std::size_t i) { return items_[i]; }
  const std::vector<Parameter>& items() const { return items_; }
  std::vector<Parameter>& items() { return items_; }

  /// Records every parameter as a leaf on `tape`, in order.
  std::vector<ad::Var> bind(ad::Tape& tape) const;
  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> items_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill.
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace barnn
