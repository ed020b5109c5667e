#pragma once
// Versioned checkpoint container: a magic header, the model config as
// canonical text, and named float64 arrays (name, shape, row-major
// little-endian bytes). Loading restores every field bit-exactly.

#include <string>
#include <string_view>
#include <vector>

#include "gfl/tensor.hpp"

namespace gfl {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Checkpoint {
  std::string config_text;
  std::vector<NamedTensor> arrays;

  const Tensor* find(std::string_view name) const;
  double scalar(std::string_view name) const;
  void put_scalar(std::string name, double v);
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gfl
