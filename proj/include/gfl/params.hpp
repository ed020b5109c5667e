#pragma once
// Named parameter registry. Networks register every trainable tensor here so
// checkpoints, the optimizer, EMA tracking and the parameter census all see
// one flat ordered list.

#include <string>
#include <string_view>
#include <vector>

#include "gfl/autodiff.hpp"
#include "gfl/rng.hpp"

namespace gfl {

class ParamSet {
 public:
  // Creates a trainable leaf. Names must be unique.
  Var add(std::string name, Tensor init);

  const Var* find(std::string_view name) const;

  struct Item {
    std::string name;
    Var var;
  };
  const std::vector<Item>& items() const { return items_; }

  int64_t total_count() const;

  void zero_grads() const;

 private:
  std::vector<Item> items_;
};

// Initializer helpers; the stream is derived from the parameter name so the
// result does not depend on registration order.
Tensor init_normal(std::vector<int64_t> shape, const RandomStream& model_stream,
                   std::string_view name, double stddev);
Tensor init_const(std::vector<int64_t> shape, double value);

}  // namespace gfl
