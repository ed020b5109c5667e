#pragma once
// Dense row-major tensor of doubles with shape metadata. Values are immutable
// by convention once an op has produced them; gradient buffers live in the
// autodiff node, not here.

#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

namespace gfl {

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

  Tensor(std::vector<int64_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    assert(static_cast<int64_t>(data_.size()) == checked_numel(shape_));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor full(std::vector<int64_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double& at(int64_t i, int64_t j) {
    assert(rank() == 2);
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  double at(int64_t i, int64_t j) const {
    assert(rank() == 2);
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  double& at(int64_t c, int64_t y, int64_t x) {
    assert(rank() == 3);
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
  }
  double at(int64_t c, int64_t y, int64_t x) const {
    assert(rank() == 3);
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
  }
  double& at(int64_t n, int64_t c, int64_t y, int64_t x) {
    assert(rank() == 4);
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }
  double at(int64_t n, int64_t c, int64_t y, int64_t x) const {
    assert(rank() == 4);
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  bool all_finite() const;

  std::string shape_str() const;

 private:
  static int64_t checked_numel(const std::vector<int64_t>& shape);

  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

}  // namespace gfl
