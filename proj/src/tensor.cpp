#include "gfl/tensor.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

namespace gfl {

int64_t Tensor::checked_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    assert(d > 0);
    n *= d;
  }
  return shape.empty() ? 0 : n;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace gfl
